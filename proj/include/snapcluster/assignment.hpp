#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

// Cluster label per snapshot. Fields other than labels/nc are filled by the
// algorithms that produce them (k-means) and left empty otherwise.
struct ClusterAssignment {
    std::vector<int> labels;
    int nc = 0;
    Eigen::MatrixXd centroids;        // dim x nc
    double wcss = 0.0;
    std::vector<double> wcss_trace;   // objective after each update step
    int iterations_run = 0;
    bool converged = false;
    std::vector<int> empty_clusters;  // clusters reseeded because they emptied

    std::size_t size() const { return labels.size(); }
    std::vector<std::size_t> cluster_sizes() const;
};

// Checks every label is in [0, nc).
void validate_assignment(const ClusterAssignment& a);

// Builds an assignment from raw labels; nc = max label + 1.
ClusterAssignment assignment_from_labels(std::vector<int> labels);

// Renumbers labels 0..k-1 in order of first appearance by column.
ClusterAssignment relabel_by_first_appearance(const ClusterAssignment& a);

// Rand index: fraction of snapshot pairs on which the two clusterings agree
// (both together or both apart). Invariant under label permutation.
double pair_counting_agreement(std::span<const int> a, std::span<const int> b);

// Within-cluster sum of squared distances to cluster means for columns of
// `data` under `labels`.
double within_cluster_ss(const Eigen::MatrixXd& data, std::span<const int> labels);

// CSV `column,sim_key,time_step,label`. Without an index sim_key is empty
// and time_step is -1.
void write_labels_csv(const std::filesystem::path& path, const ClusterAssignment& a, const SnapshotIndex* index);
ClusterAssignment read_labels_csv(const std::filesystem::path& path);

// Ensemble runs side by side: `column,run0,run1,...`.
void write_runs_csv(const std::filesystem::path& path, std::span<const ClusterAssignment> runs);
std::vector<ClusterAssignment> read_runs_csv(const std::filesystem::path& path);

}  // namespace snapcluster
