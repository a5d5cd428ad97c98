#pragma once
// Very sparse random projection of a block-partitioned snapshot matrix.
//
// R is d x D with i.i.d. entries sqrt(s) * {+1 w.p. 1/(2s), 0 w.p. 1 - 1/s,
// -1 w.p. 1/(2s)}. Entry (i, j) is a pure function of (seed, i, j), so the
// projection is built one matrix row at a time as a sum of outer products
// R[:, j] * X[j, :] without materializing R or X.
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

struct JLParams {
    double epsilon = 0.0;
    std::uint64_t n_points = 0;
    std::uint64_t d_min = 0;
};

// Smallest integer d with d >= 4 (eps^2/2 - eps^3/3)^-1 ln N.
JLParams jl_dimension(double epsilon, std::uint64_t n_points);

enum class ProjectionKind : std::uint32_t {
    sparse = 0,
    // Test hook: R[i][j] = 1 if i == j else 0, an exact isometry when d == D.
    identity = 1,
};

struct SparseRPSpec {
    std::uint64_t d = 0;
    std::uint64_t D = 0;
    double s = 1.0;
    std::uint64_t seed = 0;
    ProjectionKind kind = ProjectionKind::sparse;

    double entry(std::uint64_t i, std::uint64_t j) const;
    // Generates column j of R (length d).
    void column(std::uint64_t j, std::span<double> out) const;
    // Factor that turns distances between projected columns into estimates of
    // the original distances: 1/sqrt(d) for random projections, 1 for the
    // identity hook.
    double distance_scale() const;
};

// s <= 0 selects the very sparse choice s = sqrt(D).
SparseRPSpec make_sparse_spec(std::uint64_t d, std::uint64_t D, double s, std::uint64_t seed);

struct ProjectedMatrix {
    Eigen::MatrixXd values;  // d x N, column i is the projection of snapshot i
    SparseRPSpec spec;
    std::string source;

    std::uint64_t d() const { return static_cast<std::uint64_t>(values.rows()); }
    std::uint64_t n() const { return static_cast<std::uint64_t>(values.cols()); }
};

inline constexpr std::uint64_t kDefaultAccumulatorBudget = 8ull << 30;

// X^RP = R X. Blocks are projected into per-block partial accumulators
// (concurrently when jobs > 1) and reduced in block order, so the result is
// bit-identical for any worker count. Throws ValidationError on dimension
// mismatch or when the accumulators would exceed `budget_bytes`.
ProjectedMatrix project_stream(const BlockMatrix& m, const SparseRPSpec& spec, int jobs = 1,
                               std::uint64_t budget_bytes = kDefaultAccumulatorBudget);

// PROJ file: header {rows = d, cols = N, offset = seed, lo = s, aux0 = kind,
// hi = D}, column-major payload.
void save_projected(const std::filesystem::path& path, const ProjectedMatrix& p, Dtype dtype = Dtype::f64);
ProjectedMatrix load_projected(const std::filesystem::path& path);

struct DistortionRow {
    std::uint64_t ref_col = 0;
    std::uint64_t other_col = 0;
    double orig = 0.0;
    double proj = 0.0;
    double ratio = 0.0;    // proj / orig; NaN when flagged
    bool flagged = false;  // zero original distance
};

// Original vs projected distance for every (reference, other) pair with
// other != reference. Original distances come from one streaming pass over
// the store.
std::vector<DistortionRow> distortion_report(const BlockMatrix& m, const ProjectedMatrix& p,
                                             std::span<const std::uint64_t> reference_columns, int jobs = 1);

// CSV `ref_col,other_col,orig,proj,ratio`; flagged pairs leave ratio empty.
void write_distortion_csv(const std::filesystem::path& path, std::span<const DistortionRow> rows);

}  // namespace snapcluster
