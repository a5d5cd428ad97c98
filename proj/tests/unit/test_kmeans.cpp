#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kmeans.hpp"
#include "snapcluster/rng.hpp"
#include "test_util.hpp"

using namespace snapcluster;

namespace {

Eigen::MatrixXd blobs(std::mt19937_64& rng, int per_blob, double spread) {
    const Eigen::Vector3d centres[3] = {{0, 0, 0}, {20, 0, 0}, {0, 20, 5}};
    Eigen::MatrixXd x(3, 3 * per_blob);
    std::normal_distribution<double> nd(0.0, spread);
    for (int b = 0; b < 3; ++b) {
        for (int i = 0; i < per_blob; ++i) {
            x.col(b * per_blob + i) = centres[b] + Eigen::Vector3d(nd(rng), nd(rng), nd(rng));
        }
    }
    return x;
}

std::vector<int> blob_truth(int per_blob) {
    std::vector<int> t;
    for (int b = 0; b < 3; ++b) t.insert(t.end(), static_cast<std::size_t>(per_blob), b);
    return t;
}

}  // namespace

TEST_CASE("single cluster gives the column mean") {
    std::mt19937_64 rng(1);
    Eigen::MatrixXd x = testutil::random_matrix(rng, 4, 30);
    KMeansConfig cfg;
    cfg.nc = 1;
    auto a = kmeans_fit(x, cfg);
    Eigen::VectorXd mean = x.rowwise().mean();
    CHECK(testutil::rel_err(Eigen::MatrixXd(a.centroids.col(0)), Eigen::MatrixXd(mean)) < 1e-12);
    CHECK(a.wcss == doctest::Approx((x.colwise() - mean).squaredNorm()).epsilon(1e-12));
    CHECK(a.converged);
}

TEST_CASE("four points split into left and right pairs") {
    Eigen::MatrixXd x(2, 4);
    x << 0, 0, 10, 10, 0, 1, 0, 1;
    const auto truth = oracle::best_two_partition(x);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        KMeansConfig cfg;
        cfg.nc = 2;
        cfg.seed = seed;
        auto a = kmeans_fit(x, cfg);
        const bool one_per_side = (a.centroids(0, 0) < 5) != (a.centroids(0, 1) < 5);
        if (!one_per_side) continue;
        ++hits;
        CHECK(oracle::rand_index(a.labels, truth) == 1.0);
        for (int k = 0; k < 2; ++k) CHECK(a.centroids(1, k) == doctest::Approx(0.5));
    }
    CHECK(hits > 0);
}

TEST_CASE("data equal to its centroids is a fixed point") {
    Eigen::MatrixXd x(2, 3);
    x << 0, 5, 9, 1, -3, 4;
    KMeansConfig cfg;
    cfg.nc = 3;
    auto a = kmeans_fit(x, cfg);
    CHECK(a.converged);
    CHECK(a.iterations_run == 1);
    CHECK(a.wcss == 0.0);
}

TEST_CASE("WCSS trace never increases and assignment is optimal at the end") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = static_cast<Eigen::Index>(10 + rng() % 60);
        Eigen::MatrixXd x = testutil::random_matrix(rng, 1 + static_cast<Eigen::Index>(rng() % 5), n);
        KMeansConfig cfg;
        cfg.nc = 1 + static_cast<int>(rng() % 6);
        cfg.seed = rng();
        cfg.niter = 1 + static_cast<int>(rng() % 30);
        cfg.init = trial % 2 ? KMeansInit::kmeanspp : KMeansInit::random;
        auto a = kmeans_fit(x, cfg);
        for (std::size_t k = 1; k < a.wcss_trace.size(); ++k) CHECK(a.wcss_trace[k] <= a.wcss_trace[k - 1] * (1 + 1e-12));
        for (Eigen::Index i = 0; i < n; ++i) {
            const int own = a.labels[static_cast<std::size_t>(i)];
            REQUIRE(own >= 0);
            REQUIRE(own < cfg.nc);
            const double d_own = (x.col(i) - a.centroids.col(own)).squaredNorm();
            for (int k = 0; k < cfg.nc; ++k) {
                const double dk = (x.col(i) - a.centroids.col(k)).squaredNorm();
                CHECK(d_own <= dk);
                if (dk == d_own) CHECK(own <= k);
            }
        }
        CHECK(a.wcss >= 0.0);
        if (a.converged) {
            CHECK(a.wcss == doctest::Approx(within_cluster_ss(x, a.labels)).epsilon(1e-9));
            for (int k = 0; k < cfg.nc; ++k) {
                Eigen::VectorXd sum = Eigen::VectorXd::Zero(x.rows());
                int members = 0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    if (a.labels[static_cast<std::size_t>(i)] == k) {
                        sum += x.col(i);
                        ++members;
                    }
                }
                if (members > 0) {
                    CHECK(testutil::rel_err(Eigen::MatrixXd(a.centroids.col(k)), Eigen::MatrixXd(sum / members)) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("three blobs are recovered by every repetition") {
    std::mt19937_64 rng(4);
    Eigen::MatrixXd x = blobs(rng, 30, 0.5);
    KMeansConfig cfg;
    cfg.nc = 3;
    cfg.init = KMeansInit::kmeanspp;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cfg.seed = seed;
        auto runs = kmeans_ensemble(x, cfg, 10);
        for (const auto& r : runs) CHECK(pair_counting_agreement(r.labels, blob_truth(30)) == 1.0);
    }
}

TEST_CASE("ensembles are deterministic and independent of job count") {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x = blobs(rng, 40, 3.0);
    KMeansConfig cfg;
    cfg.nc = 4;
    cfg.seed = 77;
    auto a = kmeans_ensemble(x, cfg, 5);
    cfg.jobs = 3;
    auto b = kmeans_ensemble(x, cfg, 5);
    REQUIRE(a.size() == 5);
    for (std::size_t r = 0; r < a.size(); ++r) {
        CHECK(a[r].labels == b[r].labels);
        CHECK(a[r].centroids == b[r].centroids);
        CHECK(a[r].wcss == b[r].wcss);
    }
    KMeansConfig single = cfg;
    single.seed = derive_seed(cfg.seed, 0);
    single.jobs = 1;
    CHECK(kmeans_fit(x, single).labels == a[0].labels);
}

TEST_CASE("configuration is validated") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 3);
    KMeansConfig cfg;
    cfg.nc = 4;
    CHECK_THROWS_AS(kmeans_fit(x, cfg), ValidationError);
    cfg.nc = 0;
    CHECK_THROWS_AS(kmeans_fit(x, cfg), ValidationError);
    cfg.nc = 2;
    cfg.niter = 0;
    CHECK_THROWS_AS(kmeans_fit(x, cfg), ValidationError);
    cfg.niter = 10;
    cfg.thresh = -1;
    CHECK_THROWS_AS(kmeans_fit(x, cfg), ValidationError);
    cfg.thresh = 0;
    x(0, 0) = NAN;
    CHECK_THROWS_AS(kmeans_fit(x, cfg), DataError);
    CHECK_THROWS_AS(parse_kmeans_init("forgy"), ValidationError);
}

TEST_CASE("rand index agrees with the pair-counting oracle") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> a(1 + rng() % 40), b(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = static_cast<int>(rng() % 4);
            b[i] = static_cast<int>(rng() % 3);
        }
        CHECK(pair_counting_agreement(a, b) == doctest::Approx(oracle::rand_index(a, b)).epsilon(1e-14));
        std::vector<int> permuted(a);
        for (int& l : permuted) l = 3 - l;
        CHECK(pair_counting_agreement(a, permuted) == 1.0);
    }
}

TEST_CASE("labels and runs round trip through CSV") {
    testutil::TempDir tmp;
    auto a = assignment_from_labels({2, 0, 1, 2});
    CHECK(a.nc == 3);
    CHECK(relabel_by_first_appearance(a).labels == std::vector<int>{0, 1, 2, 0});
    write_labels_csv(tmp / "l.csv", a, nullptr);
    CHECK(read_labels_csv(tmp / "l.csv").labels == a.labels);
    std::vector<ClusterAssignment> runs{a, assignment_from_labels({0, 0, 1, 1})};
    write_runs_csv(tmp / "r.csv", runs);
    auto back = read_runs_csv(tmp / "r.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].labels == runs[1].labels);
    CHECK_THROWS_AS(validate_assignment(ClusterAssignment{{0, 3}, 2}), ValidationError);
}
