#pragma once
// Lloyd k-means over the columns of an in-memory matrix.
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snapcluster/assignment.hpp"

namespace snapcluster {

enum class KMeansInit {
    random,    // nc distinct snapshots chosen uniformly
    kmeanspp,  // D^2-weighted seeding (opt-in)
};

KMeansInit parse_kmeans_init(const std::string& name);

struct KMeansConfig {
    int nc = 3;
    int niter = 100;
    double thresh = 0.0;  // stop once no centroid moves more than this
    std::uint64_t seed = 0;
    KMeansInit init = KMeansInit::random;
    int jobs = 1;
};

void validate_kmeans_config(const KMeansConfig& cfg, std::size_t n_points);

// Each iteration assigns every snapshot to its nearest centroid (ties go to
// the lowest index), moves centroids to the means of their members and stops
// when the largest centroid move is <= thresh. A cluster that empties is
// reseeded with the snapshot farthest from its own centroid. If niter runs
// out first, labels are refreshed against the final centroids.
ClusterAssignment kmeans_fit(const Eigen::MatrixXd& data, const KMeansConfig& cfg);

// Repetition r runs kmeans_fit with seed derive_seed(cfg.seed, r).
std::vector<ClusterAssignment> kmeans_ensemble(const Eigen::MatrixXd& data, const KMeansConfig& cfg, int repetitions);

}  // namespace snapcluster
