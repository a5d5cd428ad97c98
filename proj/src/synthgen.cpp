#include "snapcluster/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/ingest.hpp"
#include "snapcluster/parallel.hpp"
#include "snapcluster/rng.hpp"

namespace fs = std::filesystem;

namespace snapcluster {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError("campaign spec: " + msg);
}

void check_range(double lo, double hi, const std::string& name) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo > 0.0 && lo < hi,
            name + " range must satisfy 0 < min < max");
}

double uniform_in(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double jitter_offset(std::uint64_t seed, std::uint64_t ix, std::uint64_t iy, std::uint64_t axis, double amp) {
    return amp * (2.0 * to_unit(counter_hash(seed, ix * 2 + axis, iy)) - 1.0);
}

}  // namespace

void validate_campaign_spec(const CampaignSpec& s) {
    require(s.n_sims >= 1, "n_sims must be >= 1");
    check_range(s.he_min, s.he_max, "he_length");
    check_range(s.v_min, s.v_max, "tip_velocity");
    check_range(s.radius_min, s.radius_max, "jet_radius");
    require(std::isfinite(s.delta) && s.delta > 0.0, "delta must be positive");
    require(std::isfinite(s.y_extent) && s.y_extent >= s.delta, "y_extent must be at least delta");
    require(std::isfinite(s.x_pad) && s.x_pad >= 0.0, "x_pad must be non-negative");
    require(s.n_subdomains >= 1, "n_subdomains must be >= 1");
    require(s.regime_count >= 2, "regime_count must be >= 2");
    require(s.step_constant >= 0, "step_constant must be >= 0");
    require(s.n_vars >= 1, "n_vars must be >= 1");
    require(std::isfinite(s.noise) && s.noise >= 0.0, "noise must be non-negative");
    require(std::isfinite(s.jitter) && s.jitter >= 0.0 && s.jitter <= 1e-4, "jitter must lie in [0, 1e-4]");
    require(std::isfinite(s.front_amplitude), "front_amplitude must be finite");
    require(std::isfinite(s.feature_span) && s.feature_span > 0.0, "feature_span must be positive");
    require(std::isfinite(s.constant_value), "constant_value must be finite");
    require(s.format == "csv" || s.format == "bin", "format must be csv or bin");
    const std::int64_t columns = static_cast<std::int64_t>(std::floor((s.he_min + s.x_pad) / s.delta)) + 1;
    require(columns >= s.n_subdomains, "fewer lattice columns than subdomains");
}

CampaignSpec campaign_spec_from_kv(const KeyValues& kv) {
    CampaignSpec s;
    for (const auto& [key, value] : kv) {
        const std::string w = "campaign spec key '" + key + "'";
        if (key == "n_sims") s.n_sims = static_cast<int>(parse_int(value, w));
        else if (key == "he_min") s.he_min = parse_double(value, w);
        else if (key == "he_max") s.he_max = parse_double(value, w);
        else if (key == "v_min") s.v_min = parse_double(value, w);
        else if (key == "v_max") s.v_max = parse_double(value, w);
        else if (key == "radius_min") s.radius_min = parse_double(value, w);
        else if (key == "radius_max") s.radius_max = parse_double(value, w);
        else if (key == "delta") s.delta = parse_double(value, w);
        else if (key == "y_extent") s.y_extent = parse_double(value, w);
        else if (key == "x_pad") s.x_pad = parse_double(value, w);
        else if (key == "n_subdomains") s.n_subdomains = static_cast<int>(parse_int(value, w));
        else if (key == "regime_count") s.regime_count = static_cast<int>(parse_int(value, w));
        else if (key == "seed") s.seed = parse_u64(value, w);
        else if (key == "step_constant") s.step_constant = static_cast<int>(parse_int(value, w));
        else if (key == "n_vars") s.n_vars = static_cast<int>(parse_int(value, w));
        else if (key == "noise") s.noise = parse_double(value, w);
        else if (key == "jitter") s.jitter = parse_double(value, w);
        else if (key == "front_amplitude") s.front_amplitude = parse_double(value, w);
        else if (key == "feature_span") s.feature_span = parse_double(value, w);
        else if (key == "field") {
            if (value == "phases") s.field = SynthField::phases;
            else if (value == "constant") s.field = SynthField::constant;
            else throw ValidationError(w + ": expected phases or constant");
        } else if (key == "constant_value") s.constant_value = parse_double(value, w);
        else if (key == "format") s.format = value;
        else throw ValidationError("campaign spec: unknown key '" + key + "'");
    }
    validate_campaign_spec(s);
    return s;
}

CampaignSpec load_campaign_spec(const fs::path& path) { return campaign_spec_from_kv(read_key_values(path)); }

KeyValues campaign_spec_to_kv(const CampaignSpec& s) {
    KeyValues kv;
    kv["n_sims"] = std::to_string(s.n_sims);
    kv["he_min"] = format_double(s.he_min);
    kv["he_max"] = format_double(s.he_max);
    kv["v_min"] = format_double(s.v_min);
    kv["v_max"] = format_double(s.v_max);
    kv["radius_min"] = format_double(s.radius_min);
    kv["radius_max"] = format_double(s.radius_max);
    kv["delta"] = format_double(s.delta);
    kv["y_extent"] = format_double(s.y_extent);
    kv["x_pad"] = format_double(s.x_pad);
    kv["n_subdomains"] = std::to_string(s.n_subdomains);
    kv["regime_count"] = std::to_string(s.regime_count);
    kv["seed"] = std::to_string(s.seed);
    kv["step_constant"] = std::to_string(s.step_constant);
    kv["n_vars"] = std::to_string(s.n_vars);
    kv["noise"] = format_double(s.noise);
    kv["jitter"] = format_double(s.jitter);
    kv["front_amplitude"] = format_double(s.front_amplitude);
    kv["feature_span"] = format_double(s.feature_span);
    kv["field"] = s.field == SynthField::phases ? "phases" : "constant";
    kv["constant_value"] = format_double(s.constant_value);
    kv["format"] = s.format;
    return kv;
}

int step_count(const CampaignSpec& spec, double he_length, double tip_velocity) {
    return static_cast<int>(std::floor(he_length / tip_velocity)) + spec.step_constant;
}

int phase_of_step(int step, int n_steps, int regime_count) {
    const int p = static_cast<int>((static_cast<std::int64_t>(regime_count) * step) / n_steps);
    return std::min(regime_count - 1, p);
}

std::vector<SynthSimulation> plan_campaign(const CampaignSpec& spec) {
    validate_campaign_spec(spec);
    std::vector<SynthSimulation> sims;
    for (int i = 0; i < spec.n_sims; ++i) {
        SynthSimulation s;
        char key[32];
        std::snprintf(key, sizeof key, "sim%03d", i);
        s.sim_key = key;
        s.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(i));
        SplitMix64 rng(s.seed);
        s.meta.he_length = uniform_in(rng, spec.he_min, spec.he_max);
        s.meta.tip_velocity = uniform_in(rng, spec.v_min, spec.v_max);
        s.meta.jet_radius = uniform_in(rng, spec.radius_min, spec.radius_max);
        // outcome tag follows the HE length third the simulation falls in
        const double frac = (s.meta.he_length - spec.he_min) / (spec.he_max - spec.he_min);
        s.meta.label = frac < 1.0 / 3.0 ? OutcomeLabel::break_
                       : frac < 2.0 / 3.0 ? OutcomeLabel::almost_break
                                          : OutcomeLabel::no_break;
        s.domain_length = s.meta.he_length + spec.x_pad;
        s.n_steps = step_count(spec, s.meta.he_length, s.meta.tip_velocity);
        if (s.n_steps < 1) throw ValidationError("campaign spec: simulation " + s.sim_key + " has no time steps");
        sims.push_back(s);
    }
    return sims;
}

double synth_field(const CampaignSpec& spec, const SynthSimulation& sim, double x, double y, int step, int var) {
    const double scale = 1.0 + 0.25 * var;
    if (spec.field == SynthField::constant) return spec.constant_value * scale;
    const int r = spec.regime_count;
    const int phase = phase_of_step(step, sim.n_steps, r);
    const double xa = x - sim.domain_length;  // aligned so the far (plate) end sits at 0
    const double width = spec.feature_span / (2.0 * (r + 1));
    const double cx = -spec.feature_span * (phase + 1) / (r + 1);
    const double cy = 0.5 * spec.y_extent;
    const double bump = std::exp(-((xa - cx) * (xa - cx) + (y - cy) * (y - cy)) / (2.0 * width * width));
    // rightward front starting at the left end, fading with distance from the axis
    const double front_x = sim.meta.tip_velocity * step;
    const double rho = 10.0 * sim.meta.jet_radius;
    const double front = 0.5 * (1.0 - std::tanh((x - front_x) / (2.0 * spec.delta))) * std::exp(-y * y / (2.0 * rho * rho));
    return scale * (bump + spec.front_amplitude * front);
}

namespace {

void write_simulation(const CampaignSpec& spec, const SynthSimulation& sim, const fs::path& out_dir) {
    const std::uint64_t nx = static_cast<std::uint64_t>(std::floor(sim.domain_length / spec.delta + 1e-9)) + 1;
    const std::uint64_t ny = static_cast<std::uint64_t>(std::floor(spec.y_extent / spec.delta + 1e-9)) + 1;
    const double amp = spec.jitter * spec.delta;
    // lattice anchored at the far end so aligned coordinates land on multiples of delta
    auto px = [&](std::uint64_t ix, std::uint64_t iy) {
        double base = sim.domain_length - static_cast<double>(nx - 1 - ix) * spec.delta;
        return base + (ix + 1 == nx ? 0.0 : jitter_offset(sim.seed, ix, iy, 0, amp));
    };
    auto py = [&](std::uint64_t ix, std::uint64_t iy) {
        double base = static_cast<double>(iy) * spec.delta;
        return base + jitter_offset(sim.seed, ix, iy, 1, amp);
    };
    const std::uint64_t n_sub = static_cast<std::uint64_t>(spec.n_subdomains);
    const std::size_t n_vars = static_cast<std::size_t>(spec.n_vars);
    std::vector<double> vals(n_vars);
    // jitter can swap neighbouring points, so each subdomain is sorted into (y, x) order once
    std::vector<std::vector<std::pair<std::uint64_t, std::uint64_t>>> order(n_sub);
    for (std::uint64_t sd = 0; sd < n_sub; ++sd) {
        const std::uint64_t c0 = nx * sd / n_sub, c1 = nx * (sd + 1) / n_sub;
        auto& o = order[sd];
        for (std::uint64_t iy = 0; iy < ny; ++iy) {
            for (std::uint64_t ix = c0; ix < c1; ++ix) o.emplace_back(iy, ix);
        }
        std::stable_sort(o.begin(), o.end(), [&](const auto& a, const auto& b) {
            const double ya = py(a.second, a.first), yb = py(b.second, b.first);
            if (ya != yb) return ya < yb;
            return px(a.second, a.first) < px(b.second, b.first);
        });
    }
    for (int step = 0; step < sim.n_steps; ++step) {
        for (std::uint64_t sd = 0; sd < n_sub; ++sd) {
            SubdomainFile f;
            f.sim_key = sim.sim_key;
            f.time_step = step;
            f.subdomain_id = static_cast<std::uint32_t>(sd);
            f.points.n_vars = n_vars;
            for (const auto& [iy, ix] : order[sd]) {
                const double x = px(ix, iy), y = py(ix, iy);
                for (std::size_t v = 0; v < n_vars; ++v) {
                    double noise = 0.0;
                    if (spec.noise > 0.0) {
                        std::uint64_t h = counter_hash(sim.seed ^ 0x5bd1e995ull, iy * nx + ix,
                                                       static_cast<std::uint64_t>(step) * n_vars + v);
                        noise = spec.noise * (2.0 * to_unit(h) - 1.0);
                    }
                    vals[v] = synth_field(spec, sim, x, y, step, static_cast<int>(v)) + noise;
                }
                f.points.push_back(x, y, vals.data());
            }
            fs::path path = subdomain_path(out_dir, sim.sim_key, step, f.subdomain_id, spec.format);
            fs::create_directories(path.parent_path());
            if (spec.format == "csv") {
                write_subdomain_csv(path, f.points);
            } else {
                write_subdomain_bin(path, f);
            }
        }
    }
}

}  // namespace

CampaignManifest generate_campaign(const CampaignSpec& spec, const fs::path& out_dir, int jobs) {
    CampaignManifest m;
    m.sims = plan_campaign(spec);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    parallel_for(m.sims.size(), jobs, [&](std::size_t i) { write_simulation(spec, m.sims[i], out_dir); });
    for (const auto& s : m.sims) {
        for (int t = 0; t < s.n_steps; ++t) m.rows.push_back({s.sim_key, t, phase_of_step(t, s.n_steps, spec.regime_count)});
    }
    write_campaign_csv(out_dir / "campaign.csv", m.sims);
    write_manifest_csv(out_dir / "manifest.csv", m.rows);
    write_key_values(out_dir / "campaign.cfg", campaign_spec_to_kv(spec));
    return m;
}

void write_manifest_csv(const fs::path& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "sim_key,time_step,phase_label\n";
    for (const auto& r : rows) out << r.sim_key << ',' << r.time_step << ',' << r.phase_label << '\n';
    if (!out) throw IoError("write failed on " + path.string());
}

std::vector<ManifestRow> read_manifest_csv(const fs::path& path) {
    CsvTable t = read_csv(path);
    const std::size_t ck = t.column("sim_key"), ct = t.column("time_step"), cp = t.column("phase_label");
    std::vector<ManifestRow> rows;
    for (const auto& r : t.rows) {
        rows.push_back({r[ck], parse_int(r[ct], path.string()), static_cast<int>(parse_int(r[cp], path.string()))});
    }
    return rows;
}

void write_campaign_csv(const fs::path& path, const std::vector<SynthSimulation>& sims) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "sim_key,he_length,tip_velocity,jet_radius,label,n_steps\n";
    for (const auto& s : sims) {
        out << s.sim_key << ',' << format_double(s.meta.he_length) << ',' << format_double(s.meta.tip_velocity) << ','
            << format_double(s.meta.jet_radius) << ',' << outcome_name(s.meta.label) << ',' << s.n_steps << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace snapcluster
