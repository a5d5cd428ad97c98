#pragma once
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/assignment.hpp"
#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

struct ReportRow {
    std::string sim_key;
    std::int64_t time_step = 0;
    double he_length = 0.0;
    int label = 0;
    std::uint64_t column = 0;
};

// One row per snapshot ordered by (sim_key, time_step).
std::vector<ReportRow> report_rows(const ClusterAssignment& a, const SnapshotIndex& index);

// Streams the store once; column k of the result is the mean of the member
// columns of cluster k. Result is D x nc.
Eigen::MatrixXd cluster_means(const BlockMatrix& m, const ClusterAssignment& a);

struct ReportFiles {
    std::filesystem::path rows_csv;     // sim_key,time_step,he_length,label
    std::filesystem::path sizes_csv;    // label,size
    std::filesystem::path means_dir;    // block store with one column per cluster; empty if not written
};

// Writes report.csv and cluster_sizes.csv into out_dir, plus the mean
// snapshots as a block store under out_dir/means when a store is given.
ReportFiles emit_report(const ClusterAssignment& a, const SnapshotIndex& index, const std::filesystem::path& out_dir,
                        const BlockMatrix* store = nullptr);

}  // namespace snapcluster
