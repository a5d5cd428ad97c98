#include "cli.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "provenance.hpp"
#include "snapcluster/assignment.hpp"
#include "snapcluster/binary_format.hpp"
#include "snapcluster/consensus.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/grid.hpp"
#include "snapcluster/hierarchical.hpp"
#include "snapcluster/ingest.hpp"
#include "snapcluster/kmeans.hpp"
#include "snapcluster/kv_file.hpp"
#include "snapcluster/parallel.hpp"
#include "snapcluster/preprocess.hpp"
#include "snapcluster/random_projection.hpp"
#include "snapcluster/report.hpp"
#include "snapcluster/svd_weights.hpp"
#include "snapcluster/synthgen.hpp"
#include "snapcluster/version.hpp"

namespace fs = std::filesystem;

namespace snapcluster::cli {

namespace {

using Runner = std::function<void(Provenance&)>;

struct Registry {
    std::ostream& out;
    std::vector<std::pair<CLI::App*, Runner>> commands;
};

struct Common {
    int jobs = 0;
    std::string config;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& description,
                      const std::shared_ptr<Common>& common) {
    auto* sub = app.add_subcommand(name, description);
    sub->add_option("--jobs", common->jobs, "Worker threads (default: SNAPCLUSTER_JOBS or 1)")->check(CLI::NonNegativeNumber);
    sub->add_option("--config", common->config, "Flat key=value file supplying option defaults");
    return sub;
}

SnapshotIndex load_index(const fs::path& path) {
    return SnapshotIndex::load(fs::is_directory(path) ? path / "index.csv" : path);
}

void write_labels(const fs::path& path, const ClusterAssignment& a, const std::string& index_path, Provenance& prov) {
    if (index_path.empty()) {
        write_labels_csv(path, a, nullptr);
        return;
    }
    prov.input(index_path);
    SnapshotIndex idx = load_index(index_path);
    write_labels_csv(path, a, &idx);
}

std::string read_magic(const fs::path& path) {
    File f(path, File::Mode::read);
    if (f.size() < 4) throw FormatError(path.string() + ": file too short");
    std::array<std::byte, 4> raw{};
    f.read_at(0, raw);
    std::string magic(4, '\0');
    std::memcpy(magic.data(), raw.data(), 4);
    return magic;
}

// Columns are snapshots in a space whose Euclidean distances approximate
// those between the original snapshots.
Eigen::MatrixXd load_features(const fs::path& path, std::size_t modes) {
    const std::string magic = read_magic(path);
    if (magic == "PROJ") {
        if (modes != 0) throw ValidationError("--modes applies to weight files only");
        ProjectedMatrix p = load_projected(path);
        return p.values * p.spec.distance_scale();
    }
    if (magic == "WGTS") {
        WeightMatrix w = load_weights(path);
        if (modes != 0) w = truncate_modes(w, modes);
        return w.values;
    }
    throw FormatError(path.string() + ": expected a projected matrix (PROJ) or weights (WGTS) file");
}

std::vector<std::string> simulations_under(const fs::path& root) {
    std::vector<std::string> keys;
    if (!fs::is_directory(root)) throw IoError("no directory " + root.string());
    for (const auto& ent : fs::directory_iterator(root)) {
        if (!ent.is_directory()) continue;
        bool has_steps = false;
        for (const auto& sub : fs::directory_iterator(ent.path())) {
            const auto name = sub.path().filename().string();
            const bool step_dir = sub.is_directory() && name.size() > 1 && name[0] == 't';
            const bool step_file = sub.path().extension() == ".cons";
            if (step_dir || step_file) {
                has_steps = true;
                break;
            }
        }
        if (has_steps) keys.push_back(ent.path().filename().string());
    }
    std::sort(keys.begin(), keys.end());
    if (keys.empty()) throw IoError("no simulations found under " + root.string());
    return keys;
}

void print_histogram(std::ostream& out, const ConsensusHistogram& h) {
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out << std::fixed << std::setprecision(1) << ConsensusHistogram::bin_value(b) << ' ' << std::setprecision(2)
            << h.percent[b] << "%\n";
    }
    out.unsetf(std::ios::floatfield);
    out << std::setprecision(6);
}

// ---------------------------------------------------------------------------

void add_synth(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string spec, out; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "synth", "Generate a synthetic simulation campaign", common);
    sub->add_option("--spec", o->spec, "Campaign spec (key=value)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Output directory")->required();
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        CampaignSpec spec = load_campaign_spec(o->spec);
        prov.input(o->spec);
        prov.seed("campaign", spec.seed);
        CampaignManifest m = generate_campaign(spec, o->out, common->jobs);
        prov.output(fs::path(o->out) / "manifest.csv");
        prov.output(fs::path(o->out) / "campaign.csv");
        prov.write_for(o->out);
        reg.out << m.sims.size() << " simulations, " << m.rows.size() << " snapshots\n";
    });
}

void add_ingest(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string raw, out; std::vector<std::string> sims; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "ingest", "Consolidate per-subdomain files into one file per time step", common);
    sub->add_option("--raw", o->raw, "Root holding <sim_key>/t<step>/sub<id>.(csv|bin)")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Output root")->required();
    sub->add_option("--sim", o->sims, "Simulation keys (default: all under --raw)");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        auto sims = o->sims.empty() ? simulations_under(o->raw) : o->sims;
        prov.input(o->raw);
        fs::create_directories(o->out);
        for (const auto& key : sims) {
            ingest_simulation(o->raw, key, o->out, common->jobs);
            reg.out << key << ": " << list_consolidated_timesteps(fs::path(o->out) / key).size() << " time steps\n";
        }
        prov.write_for(o->out);
    });
}

void add_preprocess(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string in, out; std::vector<std::string> sims; double lo = -32.0, hi = 0.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "preprocess", "Align x to the far domain edge and crop", common);
    sub->add_option("--in", o->in, "Root of consolidated simulations")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Output root")->required();
    sub->add_option("--sim", o->sims, "Simulation keys (default: all under --in)");
    sub->add_option("--crop-lo", o->lo, "Lower x bound after alignment");
    sub->add_option("--crop-hi", o->hi, "Upper x bound after alignment");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        if (!(o->lo < o->hi)) throw ValidationError("crop range requires crop-lo < crop-hi");
        auto sims = o->sims.empty() ? simulations_under(o->in) : o->sims;
        prov.input(o->in);
        fs::create_directories(o->out);
        for (const auto& key : sims) {
            preprocess_simulation(fs::path(o->in) / key, fs::path(o->out) / key, CropRange{o->lo, o->hi}, common->jobs);
            reg.out << key << ": aligned and cropped\n";
        }
        prov.write_for(o->out);
    });
}

void add_remap(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string grid, out; std::vector<std::string> sims; double margin = 0.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "remap", "Nearest-neighbour remap of aligned simulations onto the common grid", common);
    sub->add_option("--grid", o->grid, "Common grid config")->required()->check(CLI::ExistingFile);
    sub->add_option("--sim", o->sims, "Aligned simulation directories")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Output root; one directory per simulation")->required();
    sub->add_option("--margin", o->margin, "Source search margin beyond each block (0: four grid spacings)")
        ->check(CLI::NonNegativeNumber);
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        CommonGrid grid = load_grid_config(o->grid);
        prov.input(o->grid);
        fs::create_directories(o->out);
        for (const auto& dir : o->sims) {
            fs::path p(dir);
            const std::string key = p.lexically_normal().filename().empty() ? p.lexically_normal().parent_path().filename().string()
                                                                           : p.lexically_normal().filename().string();
            prov.input(p);
            RemapInfo info = remap_simulation(p, key, grid, fs::path(o->out) / key, o->margin, common->jobs);
            reg.out << key << ": " << info.n_steps << " steps x " << info.n_vars << " variables on " << grid.blocks.size()
                    << " blocks\n";
        }
        prov.write_for(o->out);
    });
}

void add_assemble(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string grid, out, metadata, dtype = "f64"; std::vector<std::string> remapped; std::uint32_t var = 0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "assemble", "Build the block-partitioned snapshot matrix for one variable", common);
    sub->add_option("--remapped", o->remapped, "Remapped simulation directories, or one root holding them")
        ->required()->check(CLI::ExistingDirectory);
    sub->add_option("--grid", o->grid, "Common grid config")->required()->check(CLI::ExistingFile);
    sub->add_option("--metadata", o->metadata, "CSV sim_key,he_length,tip_velocity,jet_radius,label")->check(CLI::ExistingFile);
    sub->add_option("--var", o->var, "Variable index");
    sub->add_option("--dtype", o->dtype, "Stored value type (f32|f64)");
    sub->add_option("--out", o->out, "Store directory")->required();
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        CommonGrid grid = load_grid_config(o->grid);
        prov.input(o->grid);
        std::vector<fs::path> dirs;
        if (o->remapped.size() == 1 && !fs::exists(fs::path(o->remapped[0]) / "remap.meta")) {
            for (const auto& ent : fs::directory_iterator(o->remapped[0])) {
                if (ent.is_directory() && fs::exists(ent.path() / "remap.meta")) dirs.push_back(ent.path());
            }
            std::sort(dirs.begin(), dirs.end());
            if (dirs.empty()) throw IoError("no remapped simulations under " + o->remapped[0]);
        } else {
            for (const auto& d : o->remapped) dirs.emplace_back(d);
        }
        for (const auto& d : dirs) prov.input(d);
        std::map<std::string, SimulationMeta> meta;
        if (!o->metadata.empty()) {
            meta = read_simulation_metadata(o->metadata);
            prov.input(o->metadata);
        }
        fs::create_directories(o->out);
        AssembledStore s = assemble_store(dirs, o->var, meta, grid, o->out, parse_dtype(o->dtype), common->jobs);
        prov.write_for(o->out);
        reg.out << "D=" << s.matrix.n_rows() << " N=" << s.matrix.n_cols() << " blocks=" << s.matrix.block_count() << '\n';
    });
}

void add_project(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string in, out, s = "sqrt", dtype = "f64"; std::uint64_t d = 0, seed = 0; double budget_gb = 8.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "project", "Sparse random projection of a snapshot store", common);
    sub->add_option("--in", o->in, "Snapshot store directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Projected matrix file")->required();
    sub->add_option("--d", o->d, "Projected dimension")->required()->check(CLI::PositiveNumber);
    sub->add_option("--s", o->s, "Sparsity: 'sqrt' for sqrt(D) or a number >= 1");
    sub->add_option("--seed", o->seed, "Seed of the projection matrix");
    sub->add_option("--dtype", o->dtype, "Stored value type (f32|f64)");
    sub->add_option("--budget-gb", o->budget_gb, "Accumulator memory budget in GiB")->check(CLI::PositiveNumber);
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        BlockMatrix m = BlockMatrix::open(o->in);
        prov.input(o->in);
        prov.seed("projection", o->seed);
        double s = 0.0;
        if (o->s != "sqrt") {
            s = parse_double(o->s, "--s");
            if (!(s >= 1.0)) throw ValidationError("--s must be 'sqrt' or a number >= 1");
        }
        SparseRPSpec spec = make_sparse_spec(o->d, m.n_rows(), s, o->seed);
        const auto budget = static_cast<std::uint64_t>(o->budget_gb * static_cast<double>(1ull << 30));
        ProjectedMatrix p = project_stream(m, spec, common->jobs, budget);
        save_projected(o->out, p, parse_dtype(o->dtype));
        prov.output(o->out);
        prov.write_for(o->out);
        reg.out << "d=" << spec.d << " N=" << p.n() << " s=" << format_double(spec.s) << '\n';
    });
}

void add_jl_dim(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { double eps = 0.1; std::uint64_t n = 0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "jl-dim", "Smallest projected dimension from the Johnson-Lindenstrauss bound", common);
    sub->add_option("--eps", o->eps, "Distortion epsilon in (0, 1)")->required();
    sub->add_option("--n", o->n, "Number of snapshots")->required();
    reg.commands.emplace_back(sub, [o, &reg](Provenance&) {
        reg.out << jl_dimension(o->eps, o->n).d_min << '\n';
    });
}

void add_distortion(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string in, proj, out, ref_sim; std::vector<std::uint64_t> ref_cols; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "distortion", "Ratio of projected to original distances from reference snapshots", common);
    sub->add_option("--in", o->in, "Snapshot store directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--proj", o->proj, "Projected matrix file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Distortion CSV")->required();
    sub->add_option("--ref-sim", o->ref_sim, "Reference simulation (default: the one with fewest snapshots)");
    sub->add_option("--ref-cols", o->ref_cols, "Explicit reference columns");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        BlockMatrix m = BlockMatrix::open(o->in);
        ProjectedMatrix p = load_projected(o->proj);
        prov.input(o->in);
        prov.input(o->proj);
        std::vector<std::uint64_t> refs = o->ref_cols;
        if (refs.empty()) {
            SnapshotIndex idx = load_index(o->in);
            std::string key = o->ref_sim;
            if (key.empty()) {
                std::size_t fewest = std::numeric_limits<std::size_t>::max();
                for (const auto& [k, meta] : idx.metadata()) {
                    const auto c = idx.columns_of(k).size();
                    if (c > 0 && c < fewest) {
                        fewest = c;
                        key = k;
                    }
                }
            }
            refs = idx.columns_of(key);
            if (refs.empty()) throw ValidationError("reference simulation '" + key + "' has no snapshots");
            prov.option("resolved_ref_sim", key);
        }
        auto rows = distortion_report(m, p, refs, common->jobs);
        write_distortion_csv(o->out, rows);
        std::size_t usable = 0, within10 = 0;
        for (const auto& r : rows) {
            if (r.flagged) continue;
            ++usable;
            if (r.ratio >= 0.9 && r.ratio <= 1.1) ++within10;
        }
        prov.output(o->out);
        prov.write_for(o->out);
        reg.out << rows.size() << " pairs, " << within10 << " of " << usable << " ratios within [0.9, 1.1]\n";
    });
}

void add_kmeans(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts {
        std::string in, out, runs, index, init = "random";
        int nc = 3, reps = 1, niter = 100;
        double thresh = 0.0;
        std::uint64_t seed = 0;
        std::size_t modes = 0;
    };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "kmeans", "Ensemble k-means over projected snapshots or SVD weights", common);
    sub->add_option("--in", o->in, "PROJ or WGTS file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Labels CSV of the lowest-WCSS repetition")->required();
    sub->add_option("--nc", o->nc, "Number of clusters");
    sub->add_option("--reps", o->reps, "Repetitions with derived seeds")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o->seed, "Base seed");
    sub->add_option("--niter", o->niter, "Maximum iterations");
    sub->add_option("--thresh", o->thresh, "Stop once no centroid moves farther than this");
    sub->add_option("--init", o->init, "Initialisation (random|kmeans++)");
    sub->add_option("--modes", o->modes, "Leading weight modes to use (0: all)");
    sub->add_option("--runs", o->runs, "CSV with every repetition (default: <out>.runs.csv when reps > 1)");
    sub->add_option("--index", o->index, "Snapshot index (file or store directory) for sim_key/time_step columns");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        Eigen::MatrixXd data = load_features(o->in, o->modes);
        prov.input(o->in);
        prov.seed("kmeans", o->seed);
        KMeansConfig cfg;
        cfg.nc = o->nc;
        cfg.niter = o->niter;
        cfg.thresh = o->thresh;
        cfg.seed = o->seed;
        cfg.init = parse_kmeans_init(o->init);
        cfg.jobs = common->jobs;
        validate_kmeans_config(cfg, static_cast<std::size_t>(data.cols()));
        auto runs = kmeans_ensemble(data, cfg, o->reps);
        std::size_t best = 0;
        for (std::size_t r = 0; r < runs.size(); ++r) {
            reg.out << "rep " << r << ": wcss=" << format_double(runs[r].wcss) << " iterations=" << runs[r].iterations_run
                    << (runs[r].converged ? " converged" : " not converged") << '\n';
            if (runs[r].wcss < runs[best].wcss) best = r;
        }
        write_labels(o->out, runs[best], o->index, prov);
        prov.output(o->out);
        prov.option("selected_rep", best);
        std::string runs_path = o->runs;
        if (runs_path.empty() && runs.size() > 1) runs_path = o->out + ".runs.csv";
        if (!runs_path.empty()) {
            write_runs_csv(runs_path, runs);
            prov.output(runs_path);
        }
        prov.write_for(o->out);
    });
}

void add_consensus(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string runs, out, csv, hist, tag; double max_intermediate = 1.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "consensus", "Consensus matrix and value histogram of an ensemble", common);
    sub->add_option("--runs", o->runs, "Runs CSV from kmeans")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Consensus matrix file (binary)")->required();
    sub->add_option("--csv", o->csv, "Also write the matrix as CSV");
    sub->add_option("--histogram", o->hist, "Histogram CSV (default: <out>.hist.csv)");
    sub->add_option("--tag", o->tag, "Run tag recorded with the matrix");
    sub->add_option("--max-intermediate", o->max_intermediate, "Stability limit on entries strictly between 0 and 1, percent")
        ->check(CLI::Range(0.0, 100.0));
    reg.commands.emplace_back(sub, [o, &reg](Provenance& prov) {
        auto runs = read_runs_csv(o->runs);
        prov.input(o->runs);
        ConsensusMatrix c = build_consensus(runs);
        c.run_tag = o->tag;
        save_consensus(o->out, c);
        prov.output(o->out);
        if (!o->csv.empty()) {
            write_consensus_csv(o->csv, c.values);
            prov.output(o->csv);
        }
        ConsensusHistogram h = histogram(c);
        const std::string hist_path = o->hist.empty() ? o->out + ".hist.csv" : o->hist;
        write_histogram_csv(hist_path, h);
        prov.output(hist_path);
        prov.write_for(o->out);
        print_histogram(reg.out, h);
        reg.out << (is_stable(h, o->max_intermediate) ? "stable" : "unstable") << '\n';
    });
}

void add_extract(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string consensus, out, index, reordered; double threshold = 1.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "extract", "Clusters as connected components of the consensus graph", common);
    sub->add_option("--consensus", o->consensus, "Consensus matrix file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Labels CSV")->required();
    sub->add_option("--threshold", o->threshold, "Edge when consensus >= threshold")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--index", o->index, "Snapshot index (file or store directory)");
    sub->add_option("--reordered", o->reordered, "Write the matrix reordered by cluster as CSV");
    reg.commands.emplace_back(sub, [o, &reg](Provenance& prov) {
        ConsensusMatrix c = load_consensus(o->consensus);
        prov.input(o->consensus);
        ClusterAssignment a = extract_clusters(c, o->threshold);
        write_labels(o->out, a, o->index, prov);
        prov.output(o->out);
        if (!o->reordered.empty()) {
            write_consensus_csv(o->reordered, reorder_by_cluster(c, a).values);
            prov.output(o->reordered);
        }
        prov.write_for(o->out);
        reg.out << a.nc << " clusters:";
        for (auto s : a.cluster_sizes()) reg.out << ' ' << s;
        reg.out << '\n';
    });
}

void add_merge_small(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string consensus, labels, out, report, index; std::size_t min_size = 0; double strong = 0.7; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "merge-small", "Merge small clusters into strongly connected neighbours", common);
    sub->add_option("--consensus", o->consensus, "Consensus matrix file")->required()->check(CLI::ExistingFile);
    sub->add_option("--labels", o->labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--min-size", o->min_size, "Clusters below this size are candidates")->required()->check(CLI::PositiveNumber);
    sub->add_option("--strong", o->strong, "Mean consensus needed to merge");
    sub->add_option("--out", o->out, "Labels CSV")->required();
    sub->add_option("--report", o->report, "Per-candidate decision CSV (default: <out>.merge.csv)");
    sub->add_option("--index", o->index, "Snapshot index (file or store directory)");
    reg.commands.emplace_back(sub, [o, &reg](Provenance& prov) {
        ConsensusMatrix c = load_consensus(o->consensus);
        ClusterAssignment a = read_labels_csv(o->labels);
        prov.input(o->consensus);
        prov.input(o->labels);
        MergeResult r = merge_small_clusters(c, a, o->min_size, o->strong);
        write_labels(o->out, r.assignment, o->index, prov);
        const std::string report = o->report.empty() ? o->out + ".merge.csv" : o->report;
        write_merge_report_csv(report, r.decisions);
        prov.output(o->out);
        prov.output(report);
        prov.write_for(o->out);
        for (const auto& d : r.decisions) {
            reg.out << "cluster " << d.label << " (size " << d.size << "): " << (d.merged ? "merged" : "kept") << ", "
                    << d.reason << '\n';
        }
        reg.out << r.assignment.nc << " clusters\n";
    });
}

void add_override(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string labels, moves, out, audit, index; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "override", "Apply manual label moves with an audit trail", common);
    sub->add_option("--labels", o->labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--moves", o->moves, "CSV column,new_label")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Labels CSV")->required();
    sub->add_option("--audit", o->audit, "Audit CSV (default: <out>.audit.csv)");
    sub->add_option("--index", o->index, "Snapshot index (file or store directory)");
    reg.commands.emplace_back(sub, [o, &reg](Provenance& prov) {
        ClusterAssignment a = read_labels_csv(o->labels);
        auto moves = read_moves_csv(o->moves);
        prov.input(o->labels);
        prov.input(o->moves);
        OverrideResult r = override_labels(a, moves);
        write_labels(o->out, r.assignment, o->index, prov);
        const std::string audit = o->audit.empty() ? o->out + ".audit.csv" : o->audit;
        write_audit_csv(audit, r.audit);
        prov.output(o->out);
        prov.output(audit);
        prov.write_for(o->out);
        reg.out << r.audit.size() << " labels changed\n";
    });
}

void add_distances(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string in, out; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "distances", "Pairwise Euclidean distances between snapshots", common);
    sub->add_option("--in", o->in, "Snapshot store directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Distance matrix file")->required();
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        BlockMatrix m = BlockMatrix::open(o->in);
        prov.input(o->in);
        DistanceMatrix d = pairwise_distances(m, common->jobs);
        save_distance_matrix(o->out, d);
        prov.output(o->out);
        prov.write_for(o->out);
        reg.out << "N=" << d.size() << '\n';
    });
}

void add_hcluster(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string dist, in, save_dist, linkage = "ward", out, dendrogram, index; int nc = 0; double threshold = -1.0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "hcluster", "Agglomerative clustering over a distance matrix", common);
    auto* dist = sub->add_option("--dist", o->dist, "Distance matrix file")->check(CLI::ExistingFile);
    auto* in = sub->add_option("--in", o->in, "Snapshot store (distances computed on the fly)")->check(CLI::ExistingDirectory);
    dist->excludes(in);
    sub->add_option("--save-dist", o->save_dist, "Keep the distances computed from --in");
    sub->add_option("--linkage", o->linkage, "single|complete|average|ward");
    auto* nc = sub->add_option("--nc", o->nc, "Number of clusters");
    auto* th = sub->add_option("--threshold", o->threshold, "Cut where merge dissimilarity exceeds this");
    nc->excludes(th);
    sub->add_option("--out", o->out, "Labels CSV")->required();
    sub->add_option("--dendrogram", o->dendrogram, "Dendrogram CSV (default: <out>.dendrogram.csv)");
    sub->add_option("--index", o->index, "Snapshot index (file or store directory)");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        DistanceMatrix d;
        if (!o->dist.empty()) {
            d = load_distance_matrix(o->dist);
            prov.input(o->dist);
        } else if (!o->in.empty()) {
            d = pairwise_distances(BlockMatrix::open(o->in), common->jobs);
            prov.input(o->in);
            if (!o->save_dist.empty()) {
                save_distance_matrix(o->save_dist, d);
                prov.output(o->save_dist);
            }
        } else {
            throw ValidationError("one of --dist or --in is required");
        }
        const Linkage linkage = parse_linkage(o->linkage);
        Dendrogram dg = build_dendrogram(d, linkage);
        ClusterAssignment a;
        if (o->threshold >= 0.0) {
            a = cut_by_threshold(dg, o->threshold);
        } else {
            if (o->nc < 1) throw ValidationError("--nc (>= 1) or --threshold is required");
            a = cut_by_count(dg, o->nc);
        }
        write_labels(o->out, a, o->index, prov);
        const std::string dpath = o->dendrogram.empty() ? o->out + ".dendrogram.csv" : o->dendrogram;
        write_dendrogram_csv(dpath, dg);
        prov.output(o->out);
        prov.output(dpath);
        prov.write_for(o->out);
        reg.out << a.nc << " clusters:";
        for (auto s : a.cluster_sizes()) reg.out << ' ' << s;
        reg.out << '\n';
    });
}

void add_svd_weights(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string in, out, residuals; std::size_t modes = 0, check_modes = 0; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "svd-weights", "Per-snapshot SVD weights from the Gram matrix", common);
    sub->add_option("--in", o->in, "Snapshot store directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Weights file")->required();
    sub->add_option("--modes", o->modes, "Keep only the leading modes (0: all N)");
    sub->add_option("--check-modes", o->check_modes, "Report rank-k reconstruction residuals for k = this");
    sub->add_option("--residuals", o->residuals, "Residual CSV (default: <out>.residuals.csv)");
    reg.commands.emplace_back(sub, [o, common, &reg](Provenance& prov) {
        BlockMatrix m = BlockMatrix::open(o->in);
        prov.input(o->in);
        WeightMatrix w = weights_from_gram(gram_matrix(m, common->jobs));
        if (o->check_modes > 0) {
            ReconstructionReport r = reconstruct_check(m, w, o->check_modes, common->jobs);
            const std::string path = o->residuals.empty() ? o->out + ".residuals.csv" : o->residuals;
            std::ofstream csv(path);
            if (!csv) throw IoError("cannot write " + path);
            csv << "column,residual\n";
            for (std::size_t i = 0; i < r.residuals.size(); ++i) csv << i << ',' << format_double(r.residuals[i]) << '\n';
            prov.output(path);
            for (auto k : r.skipped_modes) reg.out << "mode " << k << " skipped: zero singular value\n";
        }
        const std::size_t rank = w.rank;
        if (o->modes > 0) w = truncate_modes(w, o->modes);
        save_weights(o->out, w);
        prov.output(o->out);
        prov.write_for(o->out);
        reg.out << "N=" << w.n() << " rank=" << rank << " modes=" << w.modes() << '\n';
    });
}

void add_report(CLI::App& app, Registry& reg, const std::shared_ptr<Common>& common) {
    struct Opts { std::string labels, index, store, out; };
    auto o = std::make_shared<Opts>();
    auto* sub = add_command(app, "report", "Per-snapshot cluster report, cluster sizes and mean snapshots", common);
    sub->add_option("--labels", o->labels, "Labels CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--index", o->index, "Snapshot index (file or store directory)");
    sub->add_option("--store", o->store, "Snapshot store; enables mean snapshots")->check(CLI::ExistingDirectory);
    sub->add_option("--out", o->out, "Output directory")->required();
    reg.commands.emplace_back(sub, [o, &reg](Provenance& prov) {
        ClusterAssignment a = read_labels_csv(o->labels);
        prov.input(o->labels);
        const std::string index_path = o->index.empty() ? o->store : o->index;
        if (index_path.empty()) throw ValidationError("one of --index or --store is required");
        SnapshotIndex idx = load_index(index_path);
        prov.input(index_path);
        ReportFiles files;
        if (!o->store.empty()) {
            BlockMatrix m = BlockMatrix::open(o->store);
            prov.input(o->store);
            files = emit_report(a, idx, o->out, &m);
        } else {
            files = emit_report(a, idx, o->out, nullptr);
        }
        prov.output(files.rows_csv);
        prov.output(files.sizes_csv);
        if (!files.means_dir.empty()) prov.output(files.means_dir);
        prov.write_for(o->out);
        reg.out << a.size() << " snapshots in " << a.nc << " clusters\n";
    });
}

// ---------------------------------------------------------------------------
// --config handling: keys are long option names without dashes.

bool user_passed(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args) {
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::string> apply_config(CLI::App& app, const std::string& command, std::vector<std::string> args) {
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
    }
    if (config.empty()) return args;
    KeyValues kv = read_key_values(config);
    std::set<std::string> known;
    for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
        for (const auto* opt : sub->get_options()) {
            for (const auto& name : opt->get_lnames()) known.insert(name);
        }
    }
    known.erase("config");
    known.erase("help");
    for (const auto& [key, value] : kv) {
        if (!known.count(key)) throw ValidationError("config " + config + ": unknown key '" + key + "'");
    }
    auto* sub = app.get_subcommand(command);
    for (const auto& [key, value] : kv) {
        const std::string flag = "--" + key;
        auto* opt = sub->get_option_no_throw(flag);
        if (opt == nullptr || user_passed(args, flag)) continue;
        args.push_back(flag);
        if (opt->get_items_expected_max() > 1) {
            for (auto& item : split_list(value)) args.push_back(item);
        } else {
            args.push_back(value);
        }
    }
    return args;
}

std::string one_line(std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    return msg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cluster simulation snapshots via sparse random projection, consensus k-means, SVD weights and "
                 "hierarchical clustering",
                 "snapcluster"};
    app.set_version_flag("--version", std::string("snapcluster ") + kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    auto common = std::make_shared<Common>();
    Registry reg{out, {}};
    add_synth(app, reg, common);
    add_ingest(app, reg, common);
    add_preprocess(app, reg, common);
    add_remap(app, reg, common);
    add_assemble(app, reg, common);
    add_project(app, reg, common);
    add_jl_dim(app, reg, common);
    add_distortion(app, reg, common);
    add_kmeans(app, reg, common);
    add_consensus(app, reg, common);
    add_extract(app, reg, common);
    add_merge_small(app, reg, common);
    add_override(app, reg, common);
    add_distances(app, reg, common);
    add_hcluster(app, reg, common);
    add_svd_weights(app, reg, common);
    add_report(app, reg, common);

    std::string command;
    for (const auto& a : args_in) {
        if (!a.empty() && a[0] != '-') {
            command = a;
            break;
        }
    }
    const bool asks_meta = std::any_of(args_in.begin(), args_in.end(), [](const std::string& a) {
        return a == "--help" || a == "-h" || a == "--version";
    });
    if (!asks_meta && (command.empty() || app.get_subcommand_no_throw(command) == nullptr)) {
        if (!command.empty()) err << "error: usage: unknown subcommand '" << command << "'\n";
        err << app.help();
        return 2;
    }

    try {
        std::vector<std::string> args = command.empty() ? args_in : apply_config(app, command, args_in);
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e, out, err);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e, out, err);
        } catch (const CLI::ParseError& e) {
            err << "error: validation: " << one_line(e.what()) << '\n';
            return 1;
        }
        for (auto& [sub, run] : reg.commands) {
            if (!sub->parsed()) continue;
            Provenance prov(sub->get_name(), args);
            for (const auto* opt : sub->get_options()) {
                const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
                if (name == "help") continue;
                if (opt->count() > 0) {
                    const auto& res = opt->results();
                    if (res.size() == 1) prov.option(name, res.front());
                    else prov.option(name, res);
                } else if (!opt->get_default_str().empty()) {
                    prov.option(name, opt->get_default_str());
                }
            }
            prov.option("jobs_resolved", resolve_jobs(common->jobs));
            run(prov);
            return 0;
        }
        err << app.help();
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << one_line(e.what()) << '\n';
        return 1;
    } catch (const fs::filesystem_error& e) {
        err << "error: io: " << one_line(e.what()) << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << one_line(e.what()) << '\n';
        return 1;
    }
}

}  // namespace snapcluster::cli
