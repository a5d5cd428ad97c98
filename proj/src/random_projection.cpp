#include "snapcluster/random_projection.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"
#include "snapcluster/parallel.hpp"
#include "snapcluster/rng.hpp"

namespace snapcluster {

namespace {

constexpr std::string_view kProjMagic = "PROJ";

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

JLParams jl_dimension(double epsilon, std::uint64_t n_points) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon must lie in (0, 1)");
    if (n_points < 2) throw ValidationError("at least two points are required");
    const long double e = epsilon;
    const long double bound = 4.0L / (e * e / 2.0L - e * e * e / 3.0L) * std::log(static_cast<long double>(n_points));
    JLParams p;
    p.epsilon = epsilon;
    p.n_points = n_points;
    p.d_min = static_cast<std::uint64_t>(std::ceil(bound));
    return p;
}

double SparseRPSpec::entry(std::uint64_t i, std::uint64_t j) const {
    if (kind == ProjectionKind::identity) return i == j ? 1.0 : 0.0;
    const double u = to_unit(counter_hash(seed, i, j));
    const double half = 0.5 / s;
    if (u < half) return std::sqrt(s);
    if (u < 2.0 * half) return -std::sqrt(s);
    return 0.0;
}

void SparseRPSpec::column(std::uint64_t j, std::span<double> out) const {
    if (kind == ProjectionKind::identity) {
        std::fill(out.begin(), out.end(), 0.0);
        if (j < out.size()) out[j] = 1.0;
        return;
    }
    const double half = 0.5 / s;
    const double mag = std::sqrt(s);
    for (std::uint64_t i = 0; i < out.size(); ++i) {
        const double u = to_unit(counter_hash(seed, i, j));
        out[i] = u < half ? mag : (u < 2.0 * half ? -mag : 0.0);
    }
}

double SparseRPSpec::distance_scale() const {
    return kind == ProjectionKind::identity ? 1.0 : 1.0 / std::sqrt(static_cast<double>(d));
}

SparseRPSpec make_sparse_spec(std::uint64_t d, std::uint64_t D, double s, std::uint64_t seed) {
    if (d == 0 || D == 0) throw ValidationError("projection dimensions must be positive");
    SparseRPSpec spec;
    spec.d = d;
    spec.D = D;
    spec.s = s > 0.0 ? s : std::sqrt(static_cast<double>(D));
    spec.seed = seed;
    if (spec.s < 1.0) throw ValidationError("sparsity parameter s must be >= 1");
    return spec;
}

ProjectedMatrix project_stream(const BlockMatrix& m, const SparseRPSpec& spec, int jobs, std::uint64_t budget_bytes) {
    if (spec.D != m.n_rows()) {
        throw ValidationError("projection expects D = " + std::to_string(spec.D) + " rows, store has " +
                              std::to_string(m.n_rows()));
    }
    if (spec.d == 0) throw ValidationError("reduced dimension must be positive");
    if (spec.kind == ProjectionKind::sparse && spec.s < 1.0) throw ValidationError("sparsity parameter s must be >= 1");
    const std::uint64_t N = m.n_cols();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_jobs(jobs)), m.block_count());
    const long double bytes = static_cast<long double>(spec.d) * N * sizeof(double) * (workers + 1);
    if (bytes > static_cast<long double>(budget_bytes)) {
        throw ValidationError("projection accumulators need " + std::to_string(static_cast<std::uint64_t>(bytes)) +
                              " bytes, budget is " + std::to_string(budget_bytes));
    }

    RowMajor total = RowMajor::Zero(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(N));
    std::vector<RowMajor> partial(workers);
    for (std::size_t wave = 0; wave < m.block_count(); wave += workers) {
        const std::size_t count = std::min(workers, m.block_count() - wave);
        parallel_for(count, static_cast<int>(count), [&](std::size_t k) {
            RowMajor& acc = partial[k];
            acc.setZero(static_cast<Eigen::Index>(spec.d), static_cast<Eigen::Index>(N));
            std::vector<double> rcol(spec.d);
            m.stream_block_rows(static_cast<std::uint32_t>(wave + k), [&](std::uint64_t j, std::span<const double> row) {
                spec.column(j, rcol);
                Eigen::Map<const Eigen::RowVectorXd> x(row.data(), static_cast<Eigen::Index>(row.size()));
                for (std::uint64_t i = 0; i < spec.d; ++i) {
                    if (rcol[i] != 0.0) acc.row(static_cast<Eigen::Index>(i)) += rcol[i] * x;
                }
            });
        });
        for (std::size_t k = 0; k < count; ++k) total += partial[k];
    }

    ProjectedMatrix p;
    p.values = total;
    p.spec = spec;
    p.source = m.dir().string();
    return p;
}

void save_projected(const std::filesystem::path& path, const ProjectedMatrix& p, Dtype dtype) {
    FileHeader h;
    h.magic = {'P', 'R', 'O', 'J'};
    h.dtype = dtype;
    h.rows = p.d();
    h.cols = p.n();
    h.offset = p.spec.seed;
    h.lo = p.spec.s;
    h.hi = static_cast<double>(p.spec.D);
    h.aux0 = static_cast<std::uint32_t>(p.spec.kind);
    write_array_file(path, h, std::span<const double>(p.values.data(), static_cast<std::size_t>(p.values.size())));
}

ProjectedMatrix load_projected(const std::filesystem::path& path) {
    File f(path, File::Mode::read);
    FileHeader h = read_header(f, kProjMagic);
    if (h.aux0 > 1) throw FormatError(path.string() + ": unknown projection kind");
    auto payload = read_array_payload(f, h);
    ProjectedMatrix p;
    p.values = Eigen::Map<Eigen::MatrixXd>(payload.data(), static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
    p.spec.d = h.rows;
    p.spec.D = static_cast<std::uint64_t>(h.hi);
    p.spec.s = h.lo;
    p.spec.seed = h.offset;
    p.spec.kind = static_cast<ProjectionKind>(h.aux0);
    p.source = path.string();
    return p;
}

std::vector<DistortionRow> distortion_report(const BlockMatrix& m, const ProjectedMatrix& p,
                                             std::span<const std::uint64_t> reference_columns, int jobs) {
    const std::uint64_t N = m.n_cols();
    if (p.n() != N) throw ValidationError("projected matrix and store differ in column count");
    for (auto r : reference_columns) {
        if (r >= N) throw ValidationError("reference column " + std::to_string(r) + " out of range");
    }
    const std::size_t R = reference_columns.size();
    // Squared original distances, accumulated per block and reduced in block order.
    std::vector<std::vector<double>> partial(m.block_count(), std::vector<double>(R * N, 0.0));
    parallel_for(m.block_count(), resolve_jobs(jobs), [&](std::size_t b) {
        auto& acc = partial[b];
        m.stream_block_rows(static_cast<std::uint32_t>(b), [&](std::uint64_t, std::span<const double> row) {
            for (std::size_t k = 0; k < R; ++k) {
                const double xr = row[reference_columns[k]];
                double* a = acc.data() + k * N;
                for (std::uint64_t j = 0; j < N; ++j) {
                    const double diff = xr - row[j];
                    a[j] += diff * diff;
                }
            }
        });
    });
    std::vector<double> sq(R * N, 0.0);
    for (const auto& acc : partial) {
        for (std::size_t i = 0; i < sq.size(); ++i) sq[i] += acc[i];
    }

    const double scale = p.spec.distance_scale();
    std::vector<DistortionRow> rows;
    rows.reserve(R * (N - 1));
    for (std::size_t k = 0; k < R; ++k) {
        const auto ref = reference_columns[k];
        for (std::uint64_t j = 0; j < N; ++j) {
            if (j == ref) continue;
            DistortionRow row;
            row.ref_col = ref;
            row.other_col = j;
            row.orig = std::sqrt(sq[k * N + j]);
            row.proj = scale * (p.values.col(static_cast<Eigen::Index>(ref)) - p.values.col(static_cast<Eigen::Index>(j))).norm();
            if (row.orig == 0.0) {
                row.flagged = true;
                row.ratio = std::numeric_limits<double>::quiet_NaN();
            } else {
                row.ratio = row.proj / row.orig;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_distortion_csv(const std::filesystem::path& path, std::span<const DistortionRow> rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "ref_col,other_col,orig,proj,ratio\n";
    for (const auto& r : rows) {
        out << r.ref_col << ',' << r.other_col << ',' << format_double(r.orig) << ',' << format_double(r.proj) << ',';
        if (!r.flagged) out << format_double(r.ratio);
        out << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace snapcluster
