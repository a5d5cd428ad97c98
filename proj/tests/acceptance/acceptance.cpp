// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion also has a wall-clock budget.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"
#include "snapcluster/consensus.hpp"
#include "snapcluster/grid.hpp"
#include "snapcluster/hierarchical.hpp"
#include "snapcluster/kmeans.hpp"
#include "snapcluster/preprocess.hpp"
#include "snapcluster/random_projection.hpp"
#include "snapcluster/svd_weights.hpp"
#include "test_util.hpp"

using namespace snapcluster;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Verdict()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int cli_rc(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream o, e;
    const int rc = cli::run_cli(args, o, e);
    if (out) *out = o.str();
    return rc;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict jl_dimensions() {
    Verdict v;
    const std::pair<const char*, long> cases[] = {{"0.1", 6325}, {"0.05", 24431}, {"0.01", 594383}};
    std::string got;
    for (auto [eps, expected] : cases) {
        std::string out;
        v.require(cli_rc({"jl-dim", "--eps", eps, "--n", "1604"}, &out) == 0, "jl-dim failed");
        const long d = std::stol(out);
        got += std::string(got.empty() ? "" : ", ") + eps + " -> " + std::to_string(d);
        v.require(std::labs(d - expected) <= 1, "eps " + std::string(eps) + " gave " + std::to_string(d));
    }
    if (v.ok) v.detail = got;
    return v;
}

Verdict grid_arithmetic() {
    Verdict v;
    CommonGrid g = default_common_grid();
    v.require(g.size() == 2180799, "D = " + std::to_string(g.size()));
    v.require(g.blocks.size() == 22, std::to_string(g.blocks.size()) + " blocks");
    std::size_t full = 0;
    for (const auto& b : g.blocks) full += b.row_count == 99240;
    v.require(full == 21, std::to_string(full) + " blocks of 99,240 points");
    if (v.ok) v.detail = "D = 2180799, 22 blocks, 21 x 99240";
    return v;
}

Verdict empirical_distortion() {
    Verdict v;
    testutil::TempDir tmp;
    std::mt19937_64 rng(2024);
    const Eigen::Index D = 50000, N = 200;
    Eigen::MatrixXd x = testutil::random_matrix(rng, D, N);
    auto m = testutil::make_store(tmp / "store", x, 8);
    auto spec = make_sparse_spec(2000, static_cast<std::uint64_t>(D), 0.0, 99);
    auto p = project_stream(m, spec, 1);
    // The first 29 columns play the role of the baseline simulation.
    std::vector<std::uint64_t> refs(29);
    std::iota(refs.begin(), refs.end(), 0u);
    auto rows = distortion_report(m, p, refs, 1);
    std::size_t in10 = 0, in20 = 0;
    double worst = 0;
    for (const auto& r : rows) {
        in10 += r.ratio >= 0.9 && r.ratio <= 1.1;
        in20 += r.ratio >= 0.8 && r.ratio <= 1.2;
        worst = std::max(worst, std::abs(r.ratio - 1.0));
    }
    const double frac10 = static_cast<double>(in10) / static_cast<double>(rows.size());
    v.require(frac10 >= 0.99, "only " + fmt("%.4f", frac10) + " within [0.9, 1.1]");
    v.require(in20 == rows.size(), "pairs outside [0.8, 1.2]");
    if (v.ok) v.detail = std::to_string(rows.size()) + " pairs, " + fmt("%.4f", frac10) + " in [0.9,1.1], max |1-ratio| " + fmt("%.4f", worst);
    return v;
}

Verdict streaming_projection() {
    Verdict v;
    testutil::TempDir tmp;
    std::mt19937_64 rng(7);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto D = static_cast<Eigen::Index>(5 + rng() % 200), N = static_cast<Eigen::Index>(1 + rng() % 12);
        Eigen::MatrixXd x = testutil::random_matrix(rng, D, N);
        auto m = testutil::make_store(tmp / ("s" + std::to_string(trial)), x, 1 + rng() % 4);
        const double s = trial % 2 ? 0.0 : 1.0 + static_cast<double>(rng() % 3);
        auto spec = make_sparse_spec(1 + rng() % 30, static_cast<std::uint64_t>(D), s, rng());
        auto p = project_stream(m, spec, 1 + static_cast<int>(trial % 3));
        worst = std::max(worst, testutil::rel_err(p.values, oracle::dense_projection(spec) * x));
    }
    v.require(worst <= 1e-10, "relative error " + fmt("%.3g", worst));
    if (v.ok) v.detail = "20 matrices, max rel err " + fmt("%.2g", worst);
    return v;
}

Verdict kmeans_properties() {
    Verdict v;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::MatrixXd x = testutil::random_matrix(rng, 1 + static_cast<Eigen::Index>(rng() % 6), 10 + static_cast<Eigen::Index>(rng() % 90));
        KMeansConfig cfg;
        cfg.nc = 1 + static_cast<int>(rng() % 8);
        cfg.seed = rng();
        auto a = kmeans_fit(x, cfg);
        for (std::size_t k = 1; k < a.wcss_trace.size(); ++k) {
            v.require(a.wcss_trace[k] <= a.wcss_trace[k - 1], "WCSS increased in instance " + std::to_string(trial));
        }
    }
    // Three well-separated blobs.
    Eigen::MatrixXd blobs(4, 90);
    std::vector<int> truth;
    std::normal_distribution<double> nd(0.0, 0.5);
    for (int i = 0; i < 90; ++i) {
        const int b = i / 30;
        truth.push_back(b);
        for (int r = 0; r < 4; ++r) blobs(r, i) = (r == b ? 15.0 : 0.0) + nd(rng);
    }
    KMeansConfig cfg;
    cfg.nc = 3;
    cfg.init = KMeansInit::kmeanspp;
    double worst = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        cfg.seed = seed;
        for (const auto& r : kmeans_ensemble(blobs, cfg, 10)) worst = std::min(worst, pair_counting_agreement(r.labels, truth));
    }
    v.require(worst == 1.0, "3-blob agreement " + fmt("%.4f", worst));
    // Determinism through the CLI, across runs and job counts.
    testutil::TempDir tmp;
    ProjectedMatrix p;
    p.values = testutil::random_matrix(rng, 20, 150);
    p.spec = make_sparse_spec(20, 1000, 0.0, 5);
    save_projected(tmp / "p.proj", p);
    std::vector<std::string> outs;
    for (const char* jobs : {"1", "1", "4"}) {
        const std::string out = (tmp / (std::string("l") + std::to_string(outs.size()) + ".csv")).string();
        v.require(cli_rc({"kmeans", "--in", (tmp / "p.proj").string(), "--out", out, "--nc", "5", "--reps", "10",
                          "--seed", "3", "--jobs", jobs}) == 0,
                  "kmeans CLI failed");
        outs.push_back(slurp(out) + slurp(out + ".runs.csv"));
    }
    v.require(outs[0] == outs[1] && outs[0] == outs[2], "kmeans output differs across runs or job counts");
    if (v.ok) v.detail = "100 monotone traces, blob agreement 1.0 x 10 seeds, byte-identical across runs and jobs";
    return v;
}

Verdict consensus_extraction() {
    Verdict v;
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<Eigen::Index>(1 + rng() % 64);
        ConsensusMatrix c;
        c.values = Eigen::MatrixXd::Identity(n, n);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double density = u(rng) * 3.0 / static_cast<double>(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) c.values(i, j) = c.values(j, i) = u(rng) < density ? 1.0 : 0.0;
        }
        v.require(extract_clusters(c).labels == oracle::union_find_components(c.values, 1.0),
                  "extraction differs from union-find on matrix " + std::to_string(trial));
    }
    // Stable profile: three consistent clusters plus one boundary snapshot
    // that alternates between two neighbours.
    auto ensemble = [](int n, const std::function<int(int, int)>& label) {
        std::vector<ClusterAssignment> runs;
        for (int r = 0; r < 10; ++r) {
            std::vector<int> l;
            for (int i = 0; i < n; ++i) l.push_back(label(r, i));
            runs.push_back(assignment_from_labels(l));
        }
        return build_consensus(runs);
    };
    auto stable = ensemble(60, [](int r, int i) {
        int b = i < 25 ? 0 : (i < 45 ? 1 : 2);
        if (i == 24 && r % 2) b = 1;
        return b;
    });
    auto hs = histogram(stable);
    v.require(is_stable(hs), "Table-2 shaped ensemble not classified stable");
    v.require(hs.percent[0] > 50 && hs.percent[10] > 30 && hs.percent[5] > 0, "stable profile shape off");
    v.require(extract_clusters(stable).nc >= 3, "stable profile extracted fewer than nc clusters");
    // Unstable profile: a third of each cluster wanders in 3 of 10 runs,
    // giving entries of 0.3 and 0.7.
    auto shaky = ensemble(60, [](int r, int i) {
        int b = i / 20;
        if (r < 3 && i % 3 == 0) b = (b + 1) % 3;
        return b;
    });
    auto hu = histogram(shaky);
    const int extracted = extract_clusters(shaky).nc;
    v.require(!is_stable(hu), "0.3/0.7 profile classified stable");
    v.require(hu.percent[3] > 1 && hu.percent[7] > 1, "0.3/0.7 profile lacks intermediate mass");
    v.require(extracted > 3, "0.3/0.7 profile extracted " + std::to_string(extracted) + " clusters");
    if (v.ok) {
        v.detail = "200/200 union-find matches; stable profile " + fmt("%.1f", hs.percent[0]) + "% at 0, " +
                   fmt("%.1f", hs.percent[10]) + "% at 1, " + fmt("%.2f", hs.percent[5]) + "% at 0.5; unstable profile gives " +
                   std::to_string(extracted) + " clusters for nc=3";
    }
    return v;
}

bool same_merges(const Dendrogram& dg, const std::vector<oracle::Merge>& expect) {
    if (dg.merges.size() != expect.size()) return false;
    for (std::size_t s = 0; s < expect.size(); ++s) {
        const auto& a = dg.merges[s];
        const auto& b = expect[s];
        if (a.left != b.left || a.right != b.right || a.size != b.size) return false;
        if (testutil::rel_err(a.dissimilarity, b.cost) > 1e-9) return false;
    }
    return true;
}

Verdict hierarchical_oracle() {
    Verdict v;
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = static_cast<Eigen::Index>(2 + rng() % 31);
        Eigen::MatrixXd pts = testutil::random_matrix(rng, 1 + static_cast<Eigen::Index>(rng() % 5), n);
        auto d = pairwise_distances(pts);
        v.require(same_merges(build_dendrogram(d, Linkage::ward), oracle::naive_ward(pts)),
                  "Ward differs from the greedy ESS oracle on instance " + std::to_string(trial));
        v.require(same_merges(build_dendrogram(d, Linkage::single), oracle::naive_linkage(d.values, oracle::Link::single)),
                  "single linkage differs on instance " + std::to_string(trial));
        v.require(same_merges(build_dendrogram(d, Linkage::complete), oracle::naive_linkage(d.values, oracle::Link::complete)),
                  "complete linkage differs on instance " + std::to_string(trial));
        v.require(same_merges(build_dendrogram(d, Linkage::average), oracle::naive_linkage(d.values, oracle::Link::average)),
                  "average linkage differs on instance " + std::to_string(trial));
    }
    // A settling trajectory, like consecutive time steps of one run: step
    // sizes shrink as 1/t, so late snapshots are near duplicates of their
    // neighbours, with small noise over 50 dimensions.
    Eigen::MatrixXd chain(50, 120);
    std::normal_distribution<double> nd(0.0, 0.002);
    for (Eigen::Index i = 0; i < 120; ++i) {
        for (Eigen::Index r = 0; r < 50; ++r) chain(r, i) = nd(rng);
        chain(0, i) += std::log1p(static_cast<double>(i));
    }
    auto chain_d = pairwise_distances(chain);
    auto sizes = hcluster(chain_d, Linkage::single, 3).assignment.cluster_sizes();
    const std::size_t largest = *std::max_element(sizes.begin(), sizes.end());
    auto ward_sizes = hcluster(chain_d, Linkage::ward, 3).assignment.cluster_sizes();
    const std::size_t ward_largest = *std::max_element(ward_sizes.begin(), ward_sizes.end());
    const std::size_t ward_smallest = *std::min_element(ward_sizes.begin(), ward_sizes.end());
    v.require(largest >= 108, "single linkage largest cluster " + std::to_string(largest) + " of 120");
    v.require(ward_largest < largest && ward_smallest >= 5, "Ward does not split the trajectory into regimes");
    if (v.ok) v.detail = "50 instances x 4 linkages match; drifting chain largest cluster single " + std::to_string(largest) +
                       "/120, Ward " + std::to_string(ward_largest) + "/120";
    return v;
}

Verdict svd_isometry() {
    Verdict v;
    testutil::TempDir tmp;
    std::mt19937_64 rng(19);
    double worst_d = 0, worst_r = 0;
    for (int trial = 0; trial < 6; ++trial) {
        const auto D = static_cast<Eigen::Index>(500 + rng() % 4501), N = static_cast<Eigen::Index>(5 + rng() % 96);
        Eigen::MatrixXd x = testutil::random_matrix(rng, D, N);
        auto m = testutil::make_store(tmp / ("s" + std::to_string(trial)), x, 1 + rng() % 5);
        auto w = weights_from_gram(gram_matrix(m, 2));
        worst_d = std::max(worst_d, testutil::rel_err(pairwise_distances(w.values).values, pairwise_distances(m, 2).values));
        const std::size_t k = 1 + rng() % static_cast<std::size_t>(N);
        auto rep = reconstruct_check(m, w, k, 2);
        for (Eigen::Index i = 0; i < N; ++i) {
            double expect = 0;
            for (auto j = static_cast<Eigen::Index>(k); j < N; ++j) expect += w.values(j, i) * w.values(j, i);
            const double got = rep.residuals[static_cast<std::size_t>(i)] * rep.residuals[static_cast<std::size_t>(i)];
            worst_r = std::max(worst_r, std::abs(got - expect) / std::max(expect, 1e-300));
        }
    }
    v.require(worst_d <= 1e-8, "distance rel err " + fmt("%.3g", worst_d));
    v.require(worst_r <= 1e-8, "residual rel err " + fmt("%.3g", worst_r));
    if (v.ok) v.detail = "distance rel err " + fmt("%.2g", worst_d) + ", residual rel err " + fmt("%.2g", worst_r);
    return v;
}

Verdict end_to_end() {
    Verdict v;
    testutil::TempDir tmp;
    testutil::write_e2e_inputs(tmp.path());
    auto run = testutil::run_pipeline(tmp.path(), "1");
    auto truth = testutil::truth_labels(run);
    auto rp = read_labels_csv(run.consensus_labels).labels;
    auto svd = read_labels_csv(run.svd_labels).labels;
    const double a_rp = pair_counting_agreement(rp, truth);
    const double a_svd = pair_counting_agreement(svd, truth);
    const double cross = pair_counting_agreement(rp, svd);
    v.require(a_rp >= 0.95, "projection route agreement " + fmt("%.4f", a_rp));
    v.require(a_svd >= 0.95, "SVD route agreement " + fmt("%.4f", a_svd));
    v.require(cross >= 0.95, "route cross-agreement " + fmt("%.4f", cross));
    auto m = BlockMatrix::open(run.store);
    v.detail = "D=" + std::to_string(m.n_rows()) + " N=" + std::to_string(m.n_cols()) + ", projection route " +
               fmt("%.4f", a_rp) + ", SVD route " + fmt("%.4f", a_svd) + ", cross " + fmt("%.4f", cross);
    return v;
}

Verdict preprocess_correctness() {
    Verdict v;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-60.0, 20.0);
    for (int trial = 0; trial < 1000; ++trial) {
        PointTable t;
        t.n_vars = 1;
        const std::size_t n = rng() % 80;
        for (std::size_t i = 0; i < n; ++i) {
            const double val = u(rng);
            t.push_back(u(rng), u(rng), &val);
        }
        const double xmax = u(rng);
        double lo = u(rng) / 2, hi = u(rng) / 2;
        if (lo > hi) std::swap(lo, hi);
        if (lo == hi) hi += 1.0;
        auto out = align_and_crop(t, xmax, {lo, hi});
        std::vector<double> ex, ey, ev;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = t.x[i] - xmax;
            if (s >= lo && s <= hi) {
                ex.push_back(s);
                ey.push_back(t.y[i]);
                ev.push_back(t.values[i]);
            }
        }
        v.require(out.x == ex && out.y == ey && out.values == ev, "align/crop differs on set " + std::to_string(trial));
    }
    for (int trial = 0; trial < 100; ++trial) {
        CommonGrid g = build_common_grid(0.0, 2.0, 0.0, 1.0, 0.1, 1 + rng() % 11);
        std::uniform_real_distribution<double> sx(-0.3, 2.3), sy(-0.3, 1.3);
        const bool snapped = trial % 2 == 1;
        std::vector<double> xs, ys, vals;
        for (int i = 0; i < 200; ++i) {
            double x = sx(rng), y = sy(rng);
            if (snapped) {
                x = std::round(x * 20) / 20;
                y = std::round(y * 20) / 20;
            }
            xs.push_back(x);
            ys.push_back(y);
            vals.push_back(static_cast<double>(i));
        }
        for (const auto& b : g.blocks) {
            auto out = remap_1nn(xs, ys, vals, g, b, 0.5);
            for (std::uint64_t r = 0; r < b.row_count; ++r) {
                const std::uint64_t row = b.row_offset + r;
                const auto best = oracle::brute_nearest(xs, ys, g.x_at(row % g.n_x), g.y_at(row / g.n_x));
                v.require(out[r] == vals[best], "1-NN differs from exhaustive scan on instance " + std::to_string(trial));
            }
        }
    }
    CommonGrid g = build_common_grid(-3.0, 0.0, 0.0, 1.5, 0.0125, 17);
    std::vector<double> xs, ys, vals;
    std::normal_distribution<double> nd;
    for (std::uint64_t iy = 0; iy < g.n_y; ++iy) {
        for (std::uint64_t ix = 0; ix < g.n_x; ++ix) {
            xs.push_back(g.x_at(ix));
            ys.push_back(g.y_at(iy));
            vals.push_back(nd(rng));
        }
    }
    for (const auto& b : g.blocks) {
        auto out = remap_1nn(xs, ys, vals, g, b, 0.0);
        for (std::uint64_t r = 0; r < b.row_count; ++r) {
            v.require(out[r] == vals[b.row_offset + r], "remap of a gridded field is not the identity");
        }
    }
    if (v.ok) v.detail = "1000 crop sets, 100 remap instances, idempotence on " + std::to_string(g.size()) + " points";
    return v;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "JL dimensions for N=1604", 1.0, jl_dimensions},
        {2, "common-grid arithmetic", 1.0, grid_arithmetic},
        {3, "empirical JL distortion D=50000 N=200 d=2000", 120.0, empirical_distortion},
        {4, "streaming projection equals dense R*X", 10.0, streaming_projection},
        {5, "k-means properties", 60.0, kmeans_properties},
        {6, "consensus extraction and stability profiles", 30.0, consensus_extraction},
        {7, "hierarchical clustering oracles", 60.0, hierarchical_oracle},
        {8, "SVD-weight isometry and residuals", 30.0, svd_isometry},
        {9, "end-to-end ground-truth recovery", 300.0, end_to_end},
        {10, "preprocess correctness", 60.0, preprocess_correctness},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v.ok = false;
            v.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (v.ok && secs > c.budget_seconds) {
            v.ok = false;
            v.detail += " (over the " + fmt("%.0f", c.budget_seconds) + " s budget)";
        }
        failures += !v.ok;
        std::cout << (v.ok ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << v.detail << " ("
                  << fmt("%.2f", secs) << " s)" << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
