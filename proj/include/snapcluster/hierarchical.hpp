#pragma once
// Agglomerative clustering over a precomputed Euclidean distance matrix.
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/assignment.hpp"
#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

struct DistanceMatrix {
    Eigen::MatrixXd values;  // symmetric, zero diagonal
    std::string metric = "euclidean";

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

// Throws ValidationError unless the matrix is square, symmetric, finite,
// non-negative with a zero diagonal.
void validate_distance_matrix(const DistanceMatrix& d);

// Column distances of a store from one streaming pass; per-block squared
// partial sums are reduced in block order.
DistanceMatrix pairwise_distances(const BlockMatrix& m, int jobs = 1);
DistanceMatrix pairwise_distances(const Eigen::MatrixXd& columns);

enum class Linkage { single, complete, average, ward };

Linkage parse_linkage(const std::string& name);
std::string linkage_name(Linkage l);

// Merge record. Leaves are nodes 0..N-1; the cluster created by merge step s
// is node N + s. For Ward linkage the dissimilarity is the increase in the
// error sum of squares caused by the merge.
struct Merge {
    int left = 0;
    int right = 0;
    double dissimilarity = 0.0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::size_t n_leaves = 0;
    std::vector<Merge> merges;  // N - 1 entries
    bool monotonic = true;      // dissimilarities non-decreasing
};

// Full merge sequence via Lance-Williams updates. At every step the least
// dissimilar pair of clusters merges; ties go to the smallest
// (left_node, right_node) pair.
Dendrogram build_dendrogram(const DistanceMatrix& d, Linkage linkage);

// Labels after applying the first N - nc merges, numbered by first
// appearance in column order.
ClusterAssignment cut_by_count(const Dendrogram& dg, int nc);
// Labels after applying merges in order while dissimilarity <= threshold.
ClusterAssignment cut_by_threshold(const Dendrogram& dg, double threshold);

struct HClusterResult {
    ClusterAssignment assignment;
    Dendrogram dendrogram;
};

HClusterResult hcluster(const DistanceMatrix& d, Linkage linkage, int nc);

// Binary "DIST": header {rows = cols = N, aux0 = metric code (0 = euclidean)}
// followed by the strict upper triangle, row by row.
void save_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& d);
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);

// CSV `step,left,right,dissimilarity,size`.
void write_dendrogram_csv(const std::filesystem::path& path, const Dendrogram& dg);

}  // namespace snapcluster
