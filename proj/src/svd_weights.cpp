#include "snapcluster/svd_weights.hpp"

#include <algorithm>
#include <cmath>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/parallel.hpp"

namespace snapcluster {

namespace {

using Index = Eigen::Index;
using RowChunk = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::size_t kChunkRows = 256;

// Feeds fixed-size row chunks of one block to `fn`. Chunk boundaries depend
// only on the block, never on the worker count.
template <class Fn>
void for_each_chunk(const BlockMatrix& m, std::uint32_t block, Fn&& fn) {
    const Index n = static_cast<Index>(m.n_cols());
    RowChunk chunk(static_cast<Index>(kChunkRows), n);
    Index filled = 0;
    std::uint64_t first_row = 0;
    m.stream_block_rows(block, [&](std::uint64_t row, std::span<const double> values) {
        if (filled == 0) first_row = row;
        std::copy(values.begin(), values.end(), chunk.row(filled).data());
        if (++filled == static_cast<Index>(kChunkRows)) {
            fn(first_row, chunk.topRows(filled));
            filled = 0;
        }
    });
    if (filled > 0) fn(first_row, chunk.topRows(filled));
}

}  // namespace

Eigen::MatrixXd gram_matrix(const BlockMatrix& m, int jobs) {
    const Index n = static_cast<Index>(m.n_cols());
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_jobs(jobs)), m.block_count());
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(n, n);
    std::vector<Eigen::MatrixXd> partial(workers);
    for (std::size_t wave = 0; wave < m.block_count(); wave += workers) {
        const std::size_t count = std::min(workers, m.block_count() - wave);
        parallel_for(count, static_cast<int>(count), [&](std::size_t k) {
            Eigen::MatrixXd& acc = partial[k];
            acc = Eigen::MatrixXd::Zero(n, n);
            for_each_chunk(m, static_cast<std::uint32_t>(wave + k), [&](std::uint64_t, const auto& chunk) {
                acc.noalias() += chunk.transpose() * chunk;
            });
        });
        for (std::size_t k = 0; k < count; ++k) total += partial[k];
    }
    // exact symmetry regardless of summation order inside the product
    Eigen::MatrixXd sym = 0.5 * (total + total.transpose());
    return sym;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& columns) {
    Eigen::MatrixXd g = columns.transpose() * columns;
    return 0.5 * (g + g.transpose());
}

Eigen::VectorXd WeightMatrix::right_vector(std::size_t k) const {
    const double s = singular_values(static_cast<Index>(k));
    if (s <= 0.0) throw ValidationError("mode " + std::to_string(k) + " has zero singular value");
    return values.row(static_cast<Index>(k)).transpose() / s;
}

WeightMatrix weights_from_gram(const Eigen::MatrixXd& gram, double symmetry_tolerance) {
    if (gram.rows() != gram.cols()) throw ValidationError("Gram matrix must be square");
    if (!gram.allFinite()) throw ValidationError("Gram matrix has non-finite entries");
    const Index n = gram.rows();
    const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
    const double asym = (gram - gram.transpose()).cwiseAbs().maxCoeff();
    if (asym > symmetry_tolerance * scale) {
        throw ValidationError("Gram matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
    }
    WeightMatrix w;
    w.values = Eigen::MatrixXd::Zero(n, n);
    w.singular_values = Eigen::VectorXd::Zero(n);
    w.deficient.assign(static_cast<std::size_t>(n), false);
    if (n == 0) return w;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw DataError("eigendecomposition of the Gram matrix failed");
    const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
    const Eigen::MatrixXd& evecs = solver.eigenvectors();
    const double top = std::max(0.0, evals(n - 1));
    for (Index k = 0; k < n; ++k) {
        const Index src = n - 1 - k;
        double lambda = evals(src);
        Eigen::VectorXd v = evecs.col(src);
        for (Index i = 0; i < n; ++i) {
            if (v(i) != 0.0) {
                if (v(i) < 0.0) v = -v;
                break;
            }
        }
        if (!(lambda > kRankTolerance * top) || top == 0.0) {
            lambda = 0.0;
            w.deficient[static_cast<std::size_t>(k)] = true;
        } else {
            ++w.rank;
        }
        const double sigma = std::sqrt(lambda);
        w.singular_values(k) = sigma;
        w.values.row(k) = sigma * v.transpose();
    }
    return w;
}

WeightMatrix truncate_modes(const WeightMatrix& w, std::size_t modes) {
    if (modes < 1 || modes > w.modes()) {
        throw ValidationError("modes must lie in 1.." + std::to_string(w.modes()));
    }
    WeightMatrix t;
    t.values = w.values.topRows(static_cast<Index>(modes));
    t.singular_values = w.singular_values.head(static_cast<Index>(modes));
    t.deficient.assign(w.deficient.begin(), w.deficient.begin() + static_cast<std::ptrdiff_t>(modes));
    t.rank = static_cast<std::size_t>(std::count(t.deficient.begin(), t.deficient.end(), false));
    return t;
}

ReconstructionReport reconstruct_check(const BlockMatrix& m, const WeightMatrix& w, std::size_t k_modes, int jobs) {
    if (w.n() != m.n_cols()) throw ValidationError("weights and store disagree on the number of snapshots");
    if (k_modes < 1 || k_modes > w.modes()) {
        throw ValidationError("k_modes must lie in 1.." + std::to_string(w.modes()));
    }
    ReconstructionReport report;
    std::vector<Index> used;
    for (std::size_t k = 0; k < k_modes; ++k) {
        if (w.deficient[k] || w.singular_values(static_cast<Index>(k)) <= 0.0) {
            report.skipped_modes.push_back(k);
        } else {
            used.push_back(static_cast<Index>(k));
        }
    }
    const Index n = static_cast<Index>(w.n());
    const Index r = static_cast<Index>(used.size());
    // P = V_r V_r^T projects each snapshot onto the kept modes.
    Eigen::MatrixXd vr(n, r);
    for (Index c = 0; c < r; ++c) vr.col(c) = w.right_vector(static_cast<std::size_t>(used[static_cast<std::size_t>(c)]));
    Eigen::MatrixXd wr(r, n);
    for (Index c = 0; c < r; ++c) wr.row(c) = w.values.row(used[static_cast<std::size_t>(c)]);
    Eigen::VectorXd inv_sigma(r);
    for (Index c = 0; c < r; ++c) inv_sigma(c) = 1.0 / w.singular_values(used[static_cast<std::size_t>(c)]);

    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_jobs(jobs)), m.block_count());
    Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::VectorXd> partial(workers);
    for (std::size_t wave = 0; wave < m.block_count(); wave += workers) {
        const std::size_t count = std::min(workers, m.block_count() - wave);
        parallel_for(count, static_cast<int>(count), [&](std::size_t k) {
            Eigen::VectorXd& acc = partial[k];
            acc = Eigen::VectorXd::Zero(n);
            for_each_chunk(m, static_cast<std::uint32_t>(wave + k), [&](std::uint64_t, const auto& chunk) {
                Eigen::MatrixXd u = (chunk * vr) * inv_sigma.asDiagonal();  // rows x r slice of U
                Eigen::MatrixXd resid = chunk - u * wr;
                acc += resid.colwise().squaredNorm().transpose();
            });
        });
        for (std::size_t k = 0; k < count; ++k) total += partial[k];
    }
    report.residuals.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) report.residuals[static_cast<std::size_t>(i)] = std::sqrt(total(i));
    return report;
}

void save_weights(const std::filesystem::path& path, const WeightMatrix& w) {
    FileHeader h;
    h.magic = {'W', 'G', 'T', 'S'};
    h.rows = w.modes();
    h.cols = w.n();
    h.aux0 = static_cast<std::uint32_t>(w.rank);
    std::vector<double> payload(w.values.data(), w.values.data() + w.values.size());
    payload.insert(payload.end(), w.singular_values.data(), w.singular_values.data() + w.singular_values.size());
    File f(path, File::Mode::create);
    f.write_at(0, encode_header(h));
    f.write_at(kHeaderSize, std::as_bytes(std::span<const double>(payload)));
}

WeightMatrix load_weights(const std::filesystem::path& path) {
    File f(path, File::Mode::read);
    FileHeader h = read_header(f, "WGTS");
    if (h.dtype != Dtype::f64) throw FormatError(path.string() + ": weights must be f64");
    const std::uint64_t count = h.rows * h.cols + h.rows;
    if (f.size() != kHeaderSize + count * sizeof(double)) {
        throw FormatError(path.string() + ": file size does not match header");
    }
    std::vector<double> payload(count);
    f.read_at(kHeaderSize, std::as_writable_bytes(std::span<double>(payload)));
    WeightMatrix w;
    const Index rows = static_cast<Index>(h.rows), cols = static_cast<Index>(h.cols);
    w.values = Eigen::Map<const Eigen::MatrixXd>(payload.data(), rows, cols);
    w.singular_values = Eigen::Map<const Eigen::VectorXd>(payload.data() + h.rows * h.cols, rows);
    if (!w.values.allFinite() || !w.singular_values.allFinite()) throw FormatError(path.string() + ": non-finite values");
    w.deficient.resize(h.rows);
    for (std::uint64_t k = 0; k < h.rows; ++k) w.deficient[k] = !(w.singular_values(static_cast<Index>(k)) > 0.0);
    w.rank = h.aux0;
    return w;
}

}  // namespace snapcluster
