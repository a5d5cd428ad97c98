#pragma once
// Consensus matrices over k-means ensembles and the cluster extraction that
// reads them.
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/assignment.hpp"

namespace snapcluster {

// Entry (i, j) is the fraction of ensemble runs that put snapshots i and j in
// the same cluster.
struct ConsensusMatrix {
    Eigen::MatrixXd values;
    int repetitions = 0;
    int nc = 0;
    std::string run_tag;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

ConsensusMatrix build_consensus(std::span<const ClusterAssignment> runs);

// Percentages of off-diagonal entries at 0.0, 0.1, ..., 1.0 after rounding
// each entry to the nearest tenth.
struct ConsensusHistogram {
    std::array<std::uint64_t, 11> counts{};
    std::array<double, 11> percent{};
    std::uint64_t total = 0;

    static double bin_value(std::size_t bin) { return static_cast<double>(bin) / 10.0; }
    // Percentage of entries strictly between 0 and 1, excluding 0.5.
    double intermediate_percent() const;
};

ConsensusHistogram histogram(const ConsensusMatrix& c);

// A clustering is called stable when (nearly) every pair is always or never
// together, the 0.5 boundary case aside.
bool is_stable(const ConsensusHistogram& h, double max_intermediate_percent = 1.0);

// Connected components of the graph with an edge wherever c(i, j) >= threshold.
// Rows are scanned in ascending order and labels numbered by discovery.
ClusterAssignment extract_clusters(const ConsensusMatrix& c, double threshold = 1.0);

struct ReorderedMatrix {
    Eigen::MatrixXd values;
    std::vector<std::size_t> permutation;  // new position -> original column
};

// Groups snapshots by label (ascending), keeping column order within a label.
ReorderedMatrix reorder_by_cluster(const ConsensusMatrix& c, const ClusterAssignment& a);

struct MergeDecision {
    int label = 0;              // label of the small cluster in the input
    std::size_t size = 0;
    int best_target = -1;       // input label of the most strongly connected cluster
    double best_mean = 0.0;     // mean consensus between the two clusters
    bool merged = false;
    std::string reason;
};

struct MergeResult {
    ClusterAssignment assignment;
    std::vector<MergeDecision> decisions;
};

// Clusters with fewer than min_size members are merged into the cluster with
// the highest mean consensus when that mean is >= strong_threshold. A best
// mean of exactly 0.5 is never merged. Output labels are renumbered by first
// appearance.
MergeResult merge_small_clusters(const ConsensusMatrix& c, const ClusterAssignment& a, std::size_t min_size,
                                 double strong_threshold = 0.7);

struct LabelMove {
    std::size_t column = 0;
    int new_label = 0;
};

struct OverrideRecord {
    std::size_t column = 0;
    int old_label = 0;
    int new_label = 0;
};

struct OverrideResult {
    ClusterAssignment assignment;
    std::vector<OverrideRecord> audit;
};

OverrideResult override_labels(const ClusterAssignment& a, std::span<const LabelMove> moves);

// Moves CSV `column,new_label`; audit CSV `column,old_label,new_label`.
std::vector<LabelMove> read_moves_csv(const std::filesystem::path& path);
void write_audit_csv(const std::filesystem::path& path, std::span<const OverrideRecord> audit);

// Binary "CONS2": 8-byte magic, u64 N, u32 repetitions, u32 nc, then N x N f64.
void save_consensus(const std::filesystem::path& path, const ConsensusMatrix& c);
ConsensusMatrix load_consensus(const std::filesystem::path& path);
void write_consensus_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values);
// CSV `value,pct`.
void write_histogram_csv(const std::filesystem::path& path, const ConsensusHistogram& h);
void write_merge_report_csv(const std::filesystem::path& path, std::span<const MergeDecision> decisions);

}  // namespace snapcluster
