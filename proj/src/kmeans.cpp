#include "snapcluster/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "snapcluster/error.hpp"
#include "snapcluster/parallel.hpp"
#include "snapcluster/rng.hpp"

namespace snapcluster {

namespace {

using Index = Eigen::Index;

std::vector<Index> random_init(Index n, int nc, SplitMix64& rng) {
    // Partial Fisher-Yates over column indices.
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < nc; ++k) {
        auto j = k + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - k)));
        std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
    }
    perm.resize(static_cast<std::size_t>(nc));
    return perm;
}

std::vector<Index> kmeanspp_init(const Eigen::MatrixXd& data, int nc, SplitMix64& rng) {
    const Index n = data.cols();
    std::vector<Index> chosen{static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))};
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    taken[static_cast<std::size_t>(chosen[0])] = true;
    while (static_cast<int>(chosen.size()) < nc) {
        const auto last = data.col(chosen.back());
        double total = 0.0;
        for (Index i = 0; i < n; ++i) {
            auto& d = d2[static_cast<std::size_t>(i)];
            d = std::min(d, (data.col(i) - last).squaredNorm());
            if (!taken[static_cast<std::size_t>(i)]) total += d;
        }
        Index pick = -1;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (Index i = 0; i < n; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                target -= d2[static_cast<std::size_t>(i)];
                pick = i;
                if (target < 0.0) break;
            }
        }
        if (pick < 0 || total <= 0.0) {
            // All remaining points coincide with a centre: pick uniformly.
            std::vector<Index> free;
            for (Index i = 0; i < n; ++i) {
                if (!taken[static_cast<std::size_t>(i)]) free.push_back(i);
            }
            pick = free[rng.below(free.size())];
        }
        taken[static_cast<std::size_t>(pick)] = true;
        chosen.push_back(pick);
    }
    return chosen;
}

// Nearest centroid per column; ties resolve to the lowest index.
void assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids, std::vector<int>& labels,
            std::vector<double>& dist2, int jobs) {
    const Index n = data.cols();
    const std::size_t chunk = 256;
    const std::size_t chunks = (static_cast<std::size_t>(n) + chunk - 1) / chunk;
    parallel_for(chunks, jobs, [&](std::size_t c) {
        const Index lo = static_cast<Index>(c * chunk);
        const Index hi = std::min<Index>(n, lo + static_cast<Index>(chunk));
        for (Index i = lo; i < hi; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Index k = 0; k < centroids.cols(); ++k) {
                double d = (data.col(i) - centroids.col(k)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(k);
                }
            }
            labels[static_cast<std::size_t>(i)] = best;
            dist2[static_cast<std::size_t>(i)] = best_d;
        }
    });
}

double objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids, const std::vector<int>& labels) {
    double w = 0.0;
    for (Index i = 0; i < data.cols(); ++i) w += (data.col(i) - centroids.col(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return w;
}

}  // namespace

KMeansInit parse_kmeans_init(const std::string& name) {
    if (name == "random") return KMeansInit::random;
    if (name == "kmeans++" || name == "kmeanspp") return KMeansInit::kmeanspp;
    throw ValidationError("unknown k-means init '" + name + "' (expected random or kmeans++)");
}

void validate_kmeans_config(const KMeansConfig& cfg, std::size_t n_points) {
    if (cfg.nc < 1) throw ValidationError("nc must be >= 1");
    if (static_cast<std::size_t>(cfg.nc) > n_points) {
        throw ValidationError("nc = " + std::to_string(cfg.nc) + " exceeds the number of snapshots N = " + std::to_string(n_points));
    }
    if (cfg.niter < 1) throw ValidationError("niter must be >= 1");
    if (!(cfg.thresh >= 0.0)) throw ValidationError("thresh must be >= 0");
}

ClusterAssignment kmeans_fit(const Eigen::MatrixXd& data, const KMeansConfig& cfg) {
    validate_kmeans_config(cfg, static_cast<std::size_t>(data.cols()));
    if (!data.allFinite()) throw DataError("k-means input contains non-finite values");
    const Index n = data.cols();
    const int nc = cfg.nc;
    const int jobs = resolve_jobs(cfg.jobs);

    SplitMix64 rng(cfg.seed);
    auto seeds = cfg.init == KMeansInit::kmeanspp ? kmeanspp_init(data, nc, rng) : random_init(n, nc, rng);
    Eigen::MatrixXd centroids(data.rows(), nc);
    for (int k = 0; k < nc; ++k) centroids.col(k) = data.col(seeds[static_cast<std::size_t>(k)]);

    ClusterAssignment out;
    out.nc = nc;
    out.labels.assign(static_cast<std::size_t>(n), 0);
    std::vector<double> dist2(static_cast<std::size_t>(n), 0.0);

    for (int iter = 1; iter <= cfg.niter; ++iter) {
        assign(data, centroids, out.labels, dist2, jobs);

        Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(data.rows(), nc);
        std::vector<Index> counts(static_cast<std::size_t>(nc), 0);
        for (Index i = 0; i < n; ++i) {
            int l = out.labels[static_cast<std::size_t>(i)];
            updated.col(l) += data.col(i);
            ++counts[static_cast<std::size_t>(l)];
        }
        std::vector<int> empty;
        for (int k = 0; k < nc; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0) {
                updated.col(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
            } else {
                empty.push_back(k);
            }
        }
        if (!empty.empty()) {
            // Reseed each empty cluster with the snapshot farthest from its
            // (updated) centroid; each snapshot is used at most once.
            std::vector<double> far(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) {
                far[static_cast<std::size_t>(i)] = (data.col(i) - updated.col(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
            }
            for (int k : empty) {
                Index pick = 0;
                for (Index i = 1; i < n; ++i) {
                    if (far[static_cast<std::size_t>(i)] > far[static_cast<std::size_t>(pick)]) pick = i;
                }
                updated.col(k) = data.col(pick);
                far[static_cast<std::size_t>(pick)] = -1.0;
                out.empty_clusters.push_back(k);
            }
        }
        double moved = 0.0;
        for (int k = 0; k < nc; ++k) moved = std::max(moved, (updated.col(k) - centroids.col(k)).norm());
        centroids = std::move(updated);
        out.wcss_trace.push_back(objective(data, centroids, out.labels));
        out.iterations_run = iter;
        if (moved <= cfg.thresh) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged) assign(data, centroids, out.labels, dist2, jobs);
    out.centroids = std::move(centroids);
    out.wcss = objective(data, out.centroids, out.labels);
    return out;
}

std::vector<ClusterAssignment> kmeans_ensemble(const Eigen::MatrixXd& data, const KMeansConfig& cfg, int repetitions) {
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    validate_kmeans_config(cfg, static_cast<std::size_t>(data.cols()));
    std::vector<ClusterAssignment> runs(static_cast<std::size_t>(repetitions));
    parallel_for(runs.size(), resolve_jobs(cfg.jobs), [&](std::size_t r) {
        KMeansConfig c = cfg;
        c.seed = derive_seed(cfg.seed, r);
        c.jobs = 1;
        runs[r] = kmeans_fit(data, c);
    });
    return runs;
}

}  // namespace snapcluster
