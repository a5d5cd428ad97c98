#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "snapcluster/consensus.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/grid.hpp"
#include "snapcluster/hierarchical.hpp"
#include "snapcluster/kmeans.hpp"
#include "snapcluster/random_projection.hpp"
#include "snapcluster/svd_weights.hpp"
#include "snapcluster/version.hpp"

namespace py = pybind11;
using namespace snapcluster;

namespace {

py::dict assignment_dict(const ClusterAssignment& a) {
    py::dict d;
    d["labels"] = a.labels;
    d["centroids"] = a.centroids;
    d["wcss"] = a.wcss;
    d["wcss_trace"] = a.wcss_trace;
    d["iterations"] = a.iterations_run;
    d["converged"] = a.converged;
    d["empty_clusters"] = a.empty_clusters;
    return d;
}

ConsensusMatrix as_consensus(const Eigen::MatrixXd& values) {
    ConsensusMatrix c;
    c.values = values;
    return c;
}

std::vector<ClusterAssignment> as_runs(const std::vector<std::vector<int>>& runs) {
    std::vector<ClusterAssignment> out;
    for (const auto& r : runs) out.push_back(assignment_from_labels(r));
    return out;
}

}  // namespace

PYBIND11_MODULE(_snapcluster, m) {
    m.doc() = "Snapshot clustering: sparse random projection, consensus k-means, SVD weights, hierarchical clustering";
    m.attr("__version__") = kVersion;
    py::register_exception<Error>(m, "SnapclusterError", PyExc_ValueError);

    m.def("jl_dimension", [](double eps, std::uint64_t n) { return jl_dimension(eps, n).d_min; }, py::arg("eps"),
          py::arg("n"), "Smallest d with d >= 4 (eps^2/2 - eps^3/3)^-1 ln n.");

    m.def("default_grid", [] {
        CommonGrid g = default_common_grid();
        py::dict d;
        d["n_x"] = g.n_x;
        d["n_y"] = g.n_y;
        d["size"] = g.size();
        std::vector<std::uint64_t> rows;
        for (const auto& b : g.blocks) rows.push_back(b.row_count);
        d["block_rows"] = rows;
        return d;
    });

    m.def(
        "kmeans",
        [](const Eigen::MatrixXd& data, int nc, int reps, std::uint64_t seed, int niter, double thresh,
           const std::string& init, int jobs) {
            KMeansConfig cfg;
            cfg.nc = nc;
            cfg.seed = seed;
            cfg.niter = niter;
            cfg.thresh = thresh;
            cfg.init = parse_kmeans_init(init);
            cfg.jobs = jobs;
            std::vector<ClusterAssignment> runs;
            {
                py::gil_scoped_release release;
                runs = kmeans_ensemble(data, cfg, reps);
            }
            py::list out;
            for (const auto& r : runs) out.append(assignment_dict(r));
            return out;
        },
        py::arg("data"), py::arg("nc"), py::arg("reps") = 1, py::arg("seed") = 0, py::arg("niter") = 100,
        py::arg("thresh") = 0.0, py::arg("init") = "random", py::arg("jobs") = 1,
        "k-means over the columns of data; repetition r uses a seed derived from (seed, r).");

    m.def("consensus", [](const std::vector<std::vector<int>>& runs) { return build_consensus(as_runs(runs)).values; },
          py::arg("runs"));
    m.def(
        "consensus_histogram",
        [](const Eigen::MatrixXd& c) {
            auto h = histogram(as_consensus(c));
            return std::vector<double>(h.percent.begin(), h.percent.end());
        },
        py::arg("consensus"));
    m.def(
        "is_stable",
        [](const Eigen::MatrixXd& c, double max_intermediate) { return is_stable(histogram(as_consensus(c)), max_intermediate); },
        py::arg("consensus"), py::arg("max_intermediate") = 1.0);
    m.def(
        "extract_clusters",
        [](const Eigen::MatrixXd& c, double threshold) { return extract_clusters(as_consensus(c), threshold).labels; },
        py::arg("consensus"), py::arg("threshold") = 1.0);
    m.def(
        "pair_counting_agreement",
        [](const std::vector<int>& a, const std::vector<int>& b) { return pair_counting_agreement(a, b); },
        py::arg("a"), py::arg("b"));

    m.def("pairwise_distances", [](const Eigen::MatrixXd& columns) { return pairwise_distances(columns).values; },
          py::arg("columns"));
    m.def(
        "hcluster",
        [](const Eigen::MatrixXd& dist, const std::string& linkage, int nc) {
            DistanceMatrix d;
            d.values = dist;
            validate_distance_matrix(d);
            auto r = hcluster(d, parse_linkage(linkage), nc);
            Eigen::MatrixXd merges(static_cast<Eigen::Index>(r.dendrogram.merges.size()), 4);
            for (std::size_t s = 0; s < r.dendrogram.merges.size(); ++s) {
                const auto& mg = r.dendrogram.merges[s];
                merges.row(static_cast<Eigen::Index>(s)) << mg.left, mg.right, mg.dissimilarity, static_cast<double>(mg.size);
            }
            return py::make_tuple(r.assignment.labels, merges);
        },
        py::arg("dist"), py::arg("linkage") = "ward", py::arg("nc") = 3,
        "Returns (labels, merges) with merge rows (left, right, dissimilarity, size).");

    m.def(
        "svd_weights",
        [](const Eigen::MatrixXd& columns) {
            auto w = weights_from_gram(gram_matrix(columns));
            return py::make_tuple(w.values, w.singular_values);
        },
        py::arg("columns"), "Returns (W, sigma) with W = Sigma V^T from the Gram matrix of the columns.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int rc;
            {
                py::gil_scoped_release release;
                rc = cli::run_cli(args, out, err);
            }
            return py::make_tuple(rc, out.str(), err.str());
        },
        py::arg("args"), "Runs one snapcluster subcommand; returns (exit_code, stdout, stderr).");
}
