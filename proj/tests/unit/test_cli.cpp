#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "pipeline.hpp"
#include "snapcluster/csv.hpp"
#include "snapcluster/random_projection.hpp"
#include "test_util.hpp"

using snapcluster::cli::run_cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int rc;
    std::string out;
    std::string err;
};

Outcome run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int rc = run_cli(args, out, err);
    return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A tiny PROJ file with n well-separated columns.
fs::path tiny_projection(const testutil::TempDir& tmp, int n) {
    snapcluster::ProjectedMatrix p;
    p.values = Eigen::MatrixXd::Zero(2, n);
    for (int i = 0; i < n; ++i) p.values(0, i) = (i % 2) * 10.0 + 0.01 * i;
    p.spec = snapcluster::make_sparse_spec(2, 4, 1.0, 0);
    p.spec.kind = snapcluster::ProjectionKind::identity;
    auto path = tmp / "tiny.proj";
    snapcluster::save_projected(path, p);
    return path;
}

}  // namespace

TEST_CASE("jl-dim prints the bound") {
    auto r = run({"jl-dim", "--eps", "0.1", "--n", "1604"});
    CHECK(r.rc == 0);
    CHECK(r.out == "6326\n");
    CHECK(run({"jl-dim", "--eps", "1.5", "--n", "1604"}).rc == 1);
}

TEST_CASE("usage errors") {
    auto unknown = run({"frobnicate"});
    CHECK(unknown.rc == 2);
    CHECK(unknown.err.rfind("error: usage: unknown subcommand 'frobnicate'", 0) == 0);
    CHECK(run({}).rc == 2);
    auto missing = run({"jl-dim", "--eps", "0.1"});
    CHECK(missing.rc == 1);
    CHECK(missing.err.rfind("error: validation:", 0) == 0);
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);
    auto version = run({"--version"});
    CHECK(version.rc == 0);
    CHECK(version.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("kmeans with more clusters than snapshots fails cleanly") {
    testutil::TempDir tmp;
    auto proj = tiny_projection(tmp, 4);
    auto r = run({"kmeans", "--in", proj.string(), "--out", (tmp / "l.csv").string(), "--nc", "5"});
    CHECK(r.rc == 1);
    CHECK(r.err.rfind("error: validation:", 0) == 0);
    CHECK(r.err.find("nc = 5") != std::string::npos);
    CHECK_FALSE(fs::exists(tmp / "l.csv"));
}

TEST_CASE("config files supply defaults and flags override them") {
    testutil::TempDir tmp;
    auto proj = tiny_projection(tmp, 6);
    std::ofstream(tmp / "run.cfg") << "nc=3\nseed=4\n";
    auto r = run({"kmeans", "--config", (tmp / "run.cfg").string(), "--in", proj.string(), "--out",
                  (tmp / "a.csv").string(), "--nc", "2"});
    REQUIRE(r.rc == 0);
    CHECK(snapcluster::read_labels_csv(tmp / "a.csv").nc == 2);
    auto prov = slurp(tmp / "a.csv.prov.json");
    CHECK(prov.find("\"seed\"") != std::string::npos);
    CHECK(prov.find("\"4\"") != std::string::npos);
    CHECK(prov.find("jobs_resolved") != std::string::npos);

    std::ofstream(tmp / "bad.cfg") << "nc=3\nflavour=sweet\n";
    auto bad = run({"kmeans", "--config", (tmp / "bad.cfg").string(), "--in", proj.string(), "--out",
                    (tmp / "b.csv").string()});
    CHECK(bad.rc == 1);
    CHECK(bad.err.find("flavour") != std::string::npos);
}

TEST_CASE("full pipeline reports every snapshot and reruns byte for byte") {
    testutil::TempDir tmp;
    testutil::write_e2e_inputs(tmp / "one");
    testutil::write_e2e_inputs(tmp / "two");
    auto a = testutil::run_pipeline(tmp / "one", "1");
    auto b = testutil::run_pipeline(tmp / "two", "2");
    auto index = snapcluster::SnapshotIndex::load(a.store / "index.csv");
    auto report = snapcluster::read_csv(a.report_dir / "report.csv");
    CHECK(report.rows.size() == index.size());
    CHECK(fs::exists(a.report_dir / "means"));
    CHECK(fs::exists(a.report_dir / "provenance.json"));
    for (const char* rel : {"extract.csv", "svd.csv", "ward.csv", "kmeans.csv", "kmeans.csv.runs.csv",
                            "consensus.cons2.hist.csv", "report/report.csv", "report/cluster_sizes.csv",
                            "raw/manifest.csv", "store/index.csv"}) {
        INFO(rel);
        CHECK(fs::file_size(tmp / "one" / rel) > 0);
        CHECK(slurp(tmp / "one" / rel) == slurp(tmp / "two" / rel));
    }
    CHECK(slurp(a.store / "block_000.snpb") == slurp(b.store / "block_000.snpb"));
    CHECK(slurp(tmp / "one" / "proj.bin") == slurp(tmp / "two" / "proj.bin"));
    CHECK(a.consensus_stdout.find("stable") != std::string::npos);
}
