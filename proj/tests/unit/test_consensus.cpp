#include <doctest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "snapcluster/consensus.hpp"
#include "snapcluster/error.hpp"
#include "test_util.hpp"

using namespace snapcluster;

namespace {

std::vector<ClusterAssignment> as_runs(const std::vector<std::vector<int>>& labels) {
    std::vector<ClusterAssignment> runs;
    for (const auto& l : labels) runs.push_back(assignment_from_labels(l));
    return runs;
}

ConsensusMatrix from_values(const Eigen::MatrixXd& v) {
    ConsensusMatrix c;
    c.values = v;
    c.repetitions = 10;
    c.nc = 3;
    return c;
}

}  // namespace

TEST_CASE("consensus counts co-assignments") {
    std::vector<std::vector<int>> labels;
    for (int r = 0; r < 10; ++r) labels.push_back({0, 0, r == 3 ? 1 : 0, 1});
    auto c = build_consensus(as_runs(labels));
    CHECK(c.repetitions == 10);
    CHECK(c(0, 1) == 1.0);
    CHECK(c(0, 2) == doctest::Approx(0.9));
    CHECK(c(2, 3) == doctest::Approx(0.1));
    for (std::size_t i = 0; i < 4; ++i) CHECK(c(i, i) == 1.0);

    auto single = build_consensus(as_runs({{0, 1, 0, 2}}));
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) CHECK((single.values(i, j) == 0.0 || single.values(i, j) == 1.0));
    }
    CHECK_THROWS_AS(build_consensus(as_runs({{0, 1}, {0, 1, 2}})), ValidationError);
    CHECK_THROWS_AS(build_consensus(std::vector<ClusterAssignment>{}), ValidationError);
}

TEST_CASE("consensus equals a direct count on random ensembles") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<int>> labels(10, std::vector<int>(20));
        for (auto& run : labels) {
            for (auto& l : run) l = static_cast<int>(rng() % 4);
        }
        auto c = build_consensus(as_runs(labels));
        CHECK(c.values == oracle::count_consensus(labels));
        CHECK(c.values == c.values.transpose());
    }
}

TEST_CASE("histogram conventions") {
    auto ones = from_values(Eigen::MatrixXd::Ones(6, 6));
    auto h = histogram(ones);
    CHECK(h.total == 30);
    CHECK(h.percent[10] == 100.0);
    CHECK(is_stable(h));

    Eigen::MatrixXd half = Eigen::MatrixXd::Identity(4, 4);
    half(0, 1) = half(1, 0) = 1.0;
    half(2, 3) = half(3, 2) = 1.0;
    half(0, 2) = half(2, 0) = 0.04;  // rounds to 0.0
    auto h2 = histogram(from_values(half));
    CHECK(h2.percent[0] == doctest::Approx(200.0 / 3.0));
    CHECK(h2.percent[10] == doctest::Approx(100.0 / 3.0));
    double sum = 0;
    for (double p : h2.percent) sum += p;
    CHECK(sum == doctest::Approx(100.0));
}

TEST_CASE("a Table-2 shaped ensemble is stable and a 0.3/0.7 one is not") {
    // 40 snapshots: blocks of sizes 14, 13, 13 always together except two
    // boundary snapshots that flip between neighbours every other run.
    std::vector<std::vector<int>> labels;
    for (int r = 0; r < 10; ++r) {
        std::vector<int> l(40);
        for (int i = 0; i < 40; ++i) l[static_cast<std::size_t>(i)] = i < 14 ? 0 : (i < 27 ? 1 : 2);
        if (r % 2) l[13] = 1;
        labels.push_back(l);
    }
    auto c = build_consensus(as_runs(labels));
    auto h = histogram(c);
    CHECK(h.percent[0] > 55.0);
    CHECK(h.percent[10] > 25.0);
    CHECK(h.percent[5] > 0.0);
    CHECK(h.intermediate_percent() == 0.0);
    CHECK(is_stable(h));

    std::vector<std::vector<int>> noisy;
    for (int r = 0; r < 10; ++r) {
        std::vector<int> l(30);
        for (int i = 0; i < 30; ++i) l[static_cast<std::size_t>(i)] = i / 10;
        // A rotating third of each block wanders in 3 of 10 runs.
        if (r < 3) {
            for (int i = 0; i < 30; i += 3) l[static_cast<std::size_t>(i)] = (l[static_cast<std::size_t>(i)] + 1) % 3;
        }
        noisy.push_back(l);
    }
    auto cn = build_consensus(as_runs(noisy));
    auto hn = histogram(cn);
    CHECK(hn.percent[7] > 1.0);
    CHECK(hn.percent[3] > 1.0);
    CHECK_FALSE(is_stable(hn));
    CHECK(extract_clusters(cn).nc > 3);
}

TEST_CASE("extraction finds blocks and transitive chains") {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(7, 7);
    const std::vector<int> block{0, 1, 0, 2, 1, 2, 0};
    for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 7; ++j) b(i, j) = block[static_cast<std::size_t>(i)] == block[static_cast<std::size_t>(j)];
    }
    auto a = extract_clusters(from_values(b));
    CHECK(a.nc == 3);
    CHECK(a.labels == std::vector<int>{0, 1, 0, 2, 1, 2, 0});

    Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(3, 3);
    chain(0, 1) = chain(1, 0) = 1.0;
    chain(1, 2) = chain(2, 1) = 1.0;
    CHECK(extract_clusters(from_values(chain)).nc == 1);
    CHECK_THROWS_AS(extract_clusters(from_values(chain), 0.0), ValidationError);
    CHECK_THROWS_AS(extract_clusters(from_values(chain), 1.5), ValidationError);
}

TEST_CASE("extraction equals union-find components") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng() % 64);
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
        const double density = 1.5 / static_cast<double>(n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(rng) < density ? 1.0 : 0.0;
        }
        CHECK(extract_clusters(from_values(m)).labels == oracle::union_find_components(m, 1.0));
    }
}

TEST_CASE("reordering groups labels and preserves entries") {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd v = testutil::random_matrix(rng, 9, 9);
    v = (v + v.transpose()).eval();
    auto a = assignment_from_labels({1, 0, 1, 2, 0, 1, 2, 0, 0});
    auto r = reorder_by_cluster(from_values(v), a);
    CHECK(r.permutation == std::vector<std::size_t>{1, 4, 7, 8, 0, 2, 5, 3, 6});
    for (Eigen::Index i = 0; i < 9; ++i) {
        for (Eigen::Index j = 0; j < 9; ++j) {
            CHECK(r.values(i, j) == v(static_cast<Eigen::Index>(r.permutation[static_cast<std::size_t>(i)]),
                                      static_cast<Eigen::Index>(r.permutation[static_cast<std::size_t>(j)])));
        }
    }
    auto ordered = assignment_from_labels({0, 0, 1, 1, 2});
    auto id = reorder_by_cluster(from_values(Eigen::MatrixXd::Identity(5, 5)), ordered);
    CHECK(id.permutation == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("small clusters merge only when strongly connected") {
    // Cluster 1 (two members) is tied to cluster 0 at 0.7 and to cluster 2 at 0.3.
    const std::vector<int> lab{0, 0, 0, 0, 1, 1, 2, 2, 2, 2};
    auto base = [&](double to0, double to2) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(10, 10);
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 10; ++j) {
                const int a = lab[static_cast<std::size_t>(i)], b = lab[static_cast<std::size_t>(j)];
                if (a == b) m(i, j) = 1.0;
                else if ((a == 1 && b == 0) || (a == 0 && b == 1)) m(i, j) = to0;
                else if ((a == 1 && b == 2) || (a == 2 && b == 1)) m(i, j) = to2;
            }
        }
        return from_values(m);
    };
    auto a = assignment_from_labels(lab);
    auto strong = merge_small_clusters(base(0.7, 0.3), a, 3, 0.7);
    CHECK(strong.assignment.labels == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
    REQUIRE(strong.decisions.size() == 1);
    CHECK(strong.decisions[0].merged);
    CHECK(strong.decisions[0].best_target == 0);

    auto weak = merge_small_clusters(base(0.3, 0.2), a, 3, 0.7);
    CHECK(weak.assignment.labels == lab);
    CHECK_FALSE(weak.decisions[0].merged);

    auto tie = merge_small_clusters(base(0.5, 0.1), a, 3, 0.4);
    CHECK_FALSE(tie.decisions[0].merged);

    auto none = merge_small_clusters(base(0.7, 0.3), a, 2, 0.7);
    CHECK(none.assignment.labels == lab);
    CHECK(none.decisions.empty());
}

TEST_CASE("overrides change only the listed columns") {
    auto a = assignment_from_labels({0, 1, 2, 3, 1, 1, 0, 2, 3, 0, 1, 2, 3, 0, 1, 2});
    CHECK(override_labels(a, {}).assignment.labels == a.labels);
    std::vector<LabelMove> one{{5, 3}};
    auto r = override_labels(a, one);
    for (std::size_t i = 0; i < a.labels.size(); ++i) CHECK((r.assignment.labels[i] != a.labels[i]) == (i == 5));
    REQUIRE(r.audit.size() == 1);
    CHECK(r.audit[0].old_label == 1);

    std::vector<LabelMove> many;
    for (std::size_t c = 0; c < 13; ++c) many.push_back({c, (a.labels[c] + 1) % 4});
    auto m = override_labels(a, many);
    std::size_t diffs = 0;
    for (std::size_t i = 0; i < a.labels.size(); ++i) diffs += m.assignment.labels[i] != a.labels[i];
    CHECK(diffs == 13);

    std::vector<LabelMove> dup{{1, 0}, {1, 2}};
    CHECK_THROWS_AS(override_labels(a, dup), ValidationError);
    std::vector<LabelMove> bad{{1, 4}};
    CHECK_THROWS_AS(override_labels(a, bad), ValidationError);
    std::vector<LabelMove> out_of_range{{16, 0}};
    CHECK_THROWS_AS(override_labels(a, out_of_range), ValidationError);
}

TEST_CASE("consensus files round trip") {
    testutil::TempDir tmp;
    auto c = build_consensus(as_runs({{0, 1, 0}, {0, 0, 1}, {1, 1, 1}}));
    c.nc = 2;
    save_consensus(tmp / "c.cons2", c);
    auto back = load_consensus(tmp / "c.cons2");
    CHECK(back.values == c.values);
    CHECK(back.repetitions == 3);
    CHECK(back.nc == 2);
}
