#pragma once
// Per-snapshot SVD weights computed from the Gram matrix X^T X, so the D x N
// left singular basis never has to exist in memory.
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

// G = X^T X from one pass over the store, per-block partials reduced in
// block order.
Eigen::MatrixXd gram_matrix(const BlockMatrix& m, int jobs = 1);
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& columns);

struct WeightMatrix {
    Eigen::MatrixXd values;               // modes x N; column i is the weight vector of snapshot i
    Eigen::VectorXd singular_values;      // length modes, non-increasing
    std::vector<bool> deficient;          // mode clamped to zero
    std::size_t rank = 0;

    std::size_t modes() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t n() const { return static_cast<std::size_t>(values.cols()); }
    // V column k equals row k of the weights divided by sigma_k.
    Eigen::VectorXd right_vector(std::size_t k) const;
};

inline constexpr double kRankTolerance = 1e-12;

// W = Sigma V^T from G = V Sigma^2 V^T. Eigenvalues below kRankTolerance
// times the largest are clamped to zero. The first nonzero entry of each v_k
// is made positive.
WeightMatrix weights_from_gram(const Eigen::MatrixXd& gram, double symmetry_tolerance = 1e-9);

// Keep the leading `modes` rows.
WeightMatrix truncate_modes(const WeightMatrix& w, std::size_t modes);

struct ReconstructionReport {
    std::vector<double> residuals;           // ||x_i - sum_{k<modes} w_ki u_k|| per snapshot
    std::vector<std::size_t> skipped_modes;  // requested modes with zero singular value
};

// u_k is rebuilt block by block as X v_k / sigma_k.
ReconstructionReport reconstruct_check(const BlockMatrix& m, const WeightMatrix& w, std::size_t k_modes,
                                       int jobs = 1);

// Binary "WGTS": header {rows = modes, cols = N, aux0 = rank}, column-major
// weights followed by the singular values.
void save_weights(const std::filesystem::path& path, const WeightMatrix& w);
WeightMatrix load_weights(const std::filesystem::path& path);

}  // namespace snapcluster
