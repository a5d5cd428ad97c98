#include "snapcluster/report.hpp"

#include <algorithm>
#include <fstream>

#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"

namespace fs = std::filesystem;

namespace snapcluster {

std::vector<ReportRow> report_rows(const ClusterAssignment& a, const SnapshotIndex& index) {
    if (a.size() != index.size()) {
        throw ValidationError("assignment has " + std::to_string(a.size()) + " labels but the index has " +
                              std::to_string(index.size()) + " snapshots");
    }
    std::vector<ReportRow> rows;
    rows.reserve(a.size());
    for (const auto& e : index.entries()) {
        rows.push_back({e.sim_key, e.time_step, index.meta(e.sim_key).he_length, a.labels[e.column], e.column});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& l, const ReportRow& r) {
        return l.sim_key != r.sim_key ? l.sim_key < r.sim_key : l.time_step < r.time_step;
    });
    return rows;
}

Eigen::MatrixXd cluster_means(const BlockMatrix& m, const ClusterAssignment& a) {
    validate_assignment(a);
    if (a.size() != m.n_cols()) throw ValidationError("assignment and store disagree on the number of snapshots");
    const auto sizes = a.cluster_sizes();
    const Eigen::Index nc = a.nc;
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.n_rows()), nc);
    m.stream_rows([&](std::uint64_t row, std::span<const double> values) {
        auto r = means.row(static_cast<Eigen::Index>(row));
        for (std::size_t i = 0; i < values.size(); ++i) r(a.labels[i]) += values[i];
    });
    for (Eigen::Index k = 0; k < nc; ++k) {
        if (sizes[static_cast<std::size_t>(k)] > 0) means.col(k) /= static_cast<double>(sizes[static_cast<std::size_t>(k)]);
    }
    return means;
}

ReportFiles emit_report(const ClusterAssignment& a, const SnapshotIndex& index, const fs::path& out_dir,
                        const BlockMatrix* store) {
    validate_assignment(a);
    auto rows = report_rows(a, index);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    ReportFiles files;
    files.rows_csv = out_dir / "report.csv";
    {
        std::ofstream out(files.rows_csv);
        if (!out) throw IoError("cannot write " + files.rows_csv.string());
        out << "sim_key,time_step,he_length,label\n";
        for (const auto& r : rows) out << r.sim_key << ',' << r.time_step << ',' << format_double(r.he_length) << ',' << r.label << '\n';
        if (!out) throw IoError("write failed on " + files.rows_csv.string());
    }
    files.sizes_csv = out_dir / "cluster_sizes.csv";
    {
        std::ofstream out(files.sizes_csv);
        if (!out) throw IoError("cannot write " + files.sizes_csv.string());
        out << "label,size\n";
        const auto sizes = a.cluster_sizes();
        for (std::size_t k = 0; k < sizes.size(); ++k) out << k << ',' << sizes[k] << '\n';
        if (!out) throw IoError("write failed on " + files.sizes_csv.string());
    }
    if (store != nullptr) {
        Eigen::MatrixXd means = cluster_means(*store, a);
        files.means_dir = out_dir / "means";
        fs::create_directories(files.means_dir, ec);
        if (ec) throw IoError("cannot create " + files.means_dir.string() + ": " + ec.message());
        BlockMatrix out = BlockMatrix::create(files.means_dir, store->specs(), static_cast<std::uint64_t>(a.nc));
        for (const auto& spec : store->specs()) {
            Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block =
                means.middleRows(static_cast<Eigen::Index>(spec.row_offset), static_cast<Eigen::Index>(spec.row_count));
            out.write_columns_block(spec.block_id, 0, static_cast<std::uint64_t>(a.nc),
                                    std::span<const double>(block.data(), static_cast<std::size_t>(block.size())));
        }
        if (auto g = store->grid()) out.attach_grid(*g);
    }
    return files;
}

}  // namespace snapcluster
