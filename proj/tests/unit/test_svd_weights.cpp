#include <doctest.h>

#include <cmath>
#include <random>

#include "snapcluster/error.hpp"
#include "snapcluster/hierarchical.hpp"
#include "snapcluster/svd_weights.hpp"
#include "test_util.hpp"

using namespace snapcluster;

TEST_CASE("Gram matrix of simple stores") {
    testutil::TempDir tmp;
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(5, 3);
    q(0, 0) = q(2, 1) = q(4, 2) = 1.0;
    CHECK(gram_matrix(testutil::make_store(tmp / "q", q, 2)).isIdentity(0.0));

    Eigen::VectorXd v(4);
    v << 1, -2, 0.5, 3;
    Eigen::MatrixXd x(4, 2);
    x << v, 2 * v;
    Eigen::Matrix2d expect;
    expect << 1, 2, 2, 4;
    CHECK(testutil::rel_err(gram_matrix(testutil::make_store(tmp / "v", x, 3)), v.squaredNorm() * expect) < 1e-15);

    std::mt19937_64 rng(1);
    Eigen::MatrixXd r = testutil::random_matrix(rng, 700, 9);
    auto m = testutil::make_store(tmp / "r", r, 3);
    auto g = gram_matrix(m, 1);
    CHECK(testutil::rel_err(g, r.transpose() * r) < 1e-10);
    CHECK(g == g.transpose());
    CHECK(gram_matrix(m, 3) == g);
}

TEST_CASE("weights of the identity and of a duplicated column") {
    auto w = weights_from_gram(Eigen::Matrix2d::Identity());
    CHECK(w.singular_values(0) == doctest::Approx(1.0));
    CHECK(w.singular_values(1) == doctest::Approx(1.0));
    CHECK(testutil::rel_err(Eigen::MatrixXd(w.values.cwiseAbs() * w.values.cwiseAbs().transpose()),
                            Eigen::MatrixXd(Eigen::Matrix2d::Identity())) < 1e-12);

    std::mt19937_64 rng(2);
    Eigen::MatrixXd x = testutil::random_matrix(rng, 20, 2);
    x.col(1) = x.col(0);
    auto dup = weights_from_gram(gram_matrix(x));
    CHECK(dup.singular_values(1) == 0.0);
    CHECK(dup.deficient[1]);
    CHECK(dup.rank == 1);
    CHECK(testutil::rel_err(Eigen::MatrixXd(dup.values.col(0)), Eigen::MatrixXd(dup.values.col(1))) < 1e-12);

    Eigen::Matrix2d asym;
    asym << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(weights_from_gram(asym), ValidationError);
}

TEST_CASE("weight columns preserve pairwise distances and energy") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        const auto n = static_cast<Eigen::Index>(5 + rng() % 40);
        Eigen::MatrixXd x = testutil::random_matrix(rng, 200 + static_cast<Eigen::Index>(rng() % 800), n);
        auto w = weights_from_gram(gram_matrix(x));
        for (std::size_t k = 1; k < w.modes(); ++k) CHECK(w.singular_values(static_cast<Eigen::Index>(k)) <= w.singular_values(static_cast<Eigen::Index>(k - 1)));
        CHECK(w.singular_values.minCoeff() >= 0.0);
        CHECK(testutil::rel_err(w.singular_values.squaredNorm(), x.squaredNorm()) < 1e-10);
        auto dx = pairwise_distances(x).values, dw = pairwise_distances(w.values).values;
        CHECK(testutil::rel_err(dw, dx) < 1e-8);
        CHECK(testutil::rel_err(Eigen::MatrixXd(w.values.transpose() * w.values), Eigen::MatrixXd(x.transpose() * x)) < 1e-10);
        for (std::size_t k = 0; k < w.modes(); ++k) {
            auto v = w.right_vector(k);
            Eigen::Index first = 0;
            while (first < v.size() && std::abs(v(first)) < 1e-12) ++first;
            CHECK(v(first) > 0.0);
        }
    }
}

TEST_CASE("reconstruction residual follows the spectral identity") {
    testutil::TempDir tmp;
    std::mt19937_64 rng(4);
    Eigen::MatrixXd x = testutil::random_matrix(rng, 500, 12);
    auto m = testutil::make_store(tmp / "s", x, 3);
    auto w = weights_from_gram(gram_matrix(m));
    auto full = reconstruct_check(m, w, 12, 2);
    for (double r : full.residuals) CHECK(r <= 1e-8 * x.norm());
    for (std::size_t k : {1u, 4u, 9u}) {
        auto rep = reconstruct_check(m, w, k, 2);
        for (Eigen::Index i = 0; i < 12; ++i) {
            double expect = 0;
            for (std::size_t j = k; j < 12; ++j) {
                const double wji = w.values(static_cast<Eigen::Index>(j), i);
                expect += wji * wji;  // sigma_j^2 v_ji^2
            }
            CHECK(testutil::rel_err(rep.residuals[static_cast<std::size_t>(i)] * rep.residuals[static_cast<std::size_t>(i)], expect) < 1e-8);
        }
    }
    CHECK_THROWS_AS(reconstruct_check(m, w, 0), ValidationError);
    CHECK_THROWS_AS(reconstruct_check(m, w, 13), ValidationError);
}

TEST_CASE("rank-one data reconstructs from one mode and skips the rest") {
    testutil::TempDir tmp;
    Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(40, -1.0, 2.0);
    Eigen::MatrixXd x(40, 4);
    for (int i = 0; i < 4; ++i) x.col(i) = (i + 1.0) * u;
    auto m = testutil::make_store(tmp / "s", x, 2);
    auto w = weights_from_gram(gram_matrix(m));
    CHECK(w.rank == 1);
    for (double r : reconstruct_check(m, w, 1).residuals) CHECK(r <= 1e-10 * x.norm());
    auto rep = reconstruct_check(m, w, 3);
    CHECK(rep.skipped_modes == std::vector<std::size_t>{1, 2});
}

TEST_CASE("weights files round trip and truncate") {
    testutil::TempDir tmp;
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x = testutil::random_matrix(rng, 30, 6);
    auto w = weights_from_gram(gram_matrix(x));
    save_weights(tmp / "w.wgts", w);
    auto back = load_weights(tmp / "w.wgts");
    CHECK(back.values == w.values);
    CHECK(back.singular_values == w.singular_values);
    CHECK(back.rank == w.rank);
    auto t = truncate_modes(w, 2);
    CHECK(t.modes() == 2);
    CHECK(t.values == w.values.topRows(2));
    CHECK_THROWS_AS(truncate_modes(w, 0), ValidationError);
}
