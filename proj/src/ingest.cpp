#include "snapcluster/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"
#include "snapcluster/parallel.hpp"

namespace snapcluster {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSubdomainMagic = "SUBD";
constexpr std::string_view kConsolidatedMagic = "CONS";

void check_finite(const PointTable& t, const std::string& what) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t.x[i]) || !std::isfinite(t.y[i])) {
            throw DataError(what + ": non-finite coordinate at point " + std::to_string(i));
        }
    }
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        if (!std::isfinite(t.values[i])) {
            throw DataError(what + ": non-finite value at point " + std::to_string(i / std::max<std::size_t>(t.n_vars, 1)));
        }
    }
}

bool natural_less(double ya, double xa, double yb, double xb) {
    return ya < yb || (ya == yb && xa < xb);
}

// Row-major [x, y, v0..] payload <-> PointTable.
std::vector<double> to_records(const PointTable& t) {
    const std::size_t w = 2 + t.n_vars;
    std::vector<double> rec(t.size() * w);
    for (std::size_t i = 0; i < t.size(); ++i) {
        rec[i * w] = t.x[i];
        rec[i * w + 1] = t.y[i];
        std::copy_n(t.values.begin() + static_cast<std::ptrdiff_t>(i * t.n_vars), t.n_vars, rec.begin() + static_cast<std::ptrdiff_t>(i * w + 2));
    }
    return rec;
}

PointTable from_records(const std::vector<double>& rec, std::size_t n_points, std::size_t n_vars) {
    PointTable t;
    t.n_vars = n_vars;
    const std::size_t w = 2 + n_vars;
    t.x.resize(n_points);
    t.y.resize(n_points);
    t.values.resize(n_points * n_vars);
    for (std::size_t i = 0; i < n_points; ++i) {
        t.x[i] = rec[i * w];
        t.y[i] = rec[i * w + 1];
        std::copy_n(rec.begin() + static_cast<std::ptrdiff_t>(i * w + 2), n_vars, t.values.begin() + static_cast<std::ptrdiff_t>(i * n_vars));
    }
    return t;
}

std::pair<double, double> y_extent(const PointTable& t) {
    if (t.size() == 0) return {0.0, 0.0};
    auto [lo, hi] = std::minmax_element(t.y.begin(), t.y.end());
    return {*lo, *hi};
}

std::string step_name(std::int64_t step) { return "t" + std::to_string(step); }

}  // namespace

void PointTable::push_back(double px, double py, const double* vals) {
    x.push_back(px);
    y.push_back(py);
    values.insert(values.end(), vals, vals + n_vars);
}

void PointTable::append(const PointTable& other, std::size_t first, std::size_t count) {
    if (other.n_vars != n_vars) throw DataError("n_vars mismatch when appending points");
    x.insert(x.end(), other.x.begin() + static_cast<std::ptrdiff_t>(first), other.x.begin() + static_cast<std::ptrdiff_t>(first + count));
    y.insert(y.end(), other.y.begin() + static_cast<std::ptrdiff_t>(first), other.y.begin() + static_cast<std::ptrdiff_t>(first + count));
    values.insert(values.end(), other.values.begin() + static_cast<std::ptrdiff_t>(first * n_vars),
                  other.values.begin() + static_cast<std::ptrdiff_t>((first + count) * n_vars));
}

std::uint64_t TimestepSummary::total_points() const {
    std::uint64_t n = 0;
    for (const auto& s : subdomains) n += s.n_points;
    return n;
}

double TimestepSummary::x_max() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& s : subdomains) {
        if (s.n_points > 0) m = std::max(m, s.x_max);
    }
    if (!std::isfinite(m)) throw DataError("timestep has no points");
    return m;
}

TimestepSummary summarize(const PointTable& points, const std::vector<std::uint64_t>& run_lengths) {
    TimestepSummary s;
    std::uint64_t row = 0;
    for (std::size_t id = 0; id < run_lengths.size(); ++id) {
        SubdomainExtent e;
        e.subdomain_id = static_cast<std::uint32_t>(id);
        e.start_row = row;
        e.n_points = run_lengths[id];
        if (e.n_points > 0) {
            e.x_min = e.y_min = std::numeric_limits<double>::infinity();
            e.x_max = e.y_max = -std::numeric_limits<double>::infinity();
            for (std::uint64_t r = row; r < row + e.n_points; ++r) {
                e.x_min = std::min(e.x_min, points.x[r]);
                e.x_max = std::max(e.x_max, points.x[r]);
                e.y_min = std::min(e.y_min, points.y[r]);
                e.y_max = std::max(e.y_max, points.y[r]);
            }
        }
        row += e.n_points;
        s.subdomains.push_back(e);
    }
    if (row != points.size()) throw DataError("subdomain run lengths do not cover the point table");
    return s;
}

ConsolidatedTimestep consolidate_timestep(std::vector<SubdomainFile> files) {
    if (files.empty()) throw ValidationError("no subdomain files to consolidate");
    std::sort(files.begin(), files.end(),
              [](const SubdomainFile& a, const SubdomainFile& b) { return a.subdomain_id < b.subdomain_id; });
    const auto& first = files.front();
    std::set<std::uint32_t> present;
    for (const auto& f : files) {
        if (f.sim_key != first.sim_key || f.time_step != first.time_step) {
            throw ValidationError("subdomain files mix simulations or time steps");
        }
        if (f.points.n_vars != first.points.n_vars) {
            throw DataError("subdomain " + std::to_string(f.subdomain_id) + " has " + std::to_string(f.points.n_vars) +
                            " variables, expected " + std::to_string(first.points.n_vars));
        }
        if (!present.insert(f.subdomain_id).second) {
            throw ValidationError("duplicate subdomain id " + std::to_string(f.subdomain_id));
        }
    }
    std::uint32_t n_sub = files.back().subdomain_id + 1;
    for (std::uint32_t id = 0; id < n_sub; ++id) {
        if (!present.count(id)) throw ValidationError("missing subdomain id " + std::to_string(id));
    }

    ConsolidatedTimestep out;
    out.sim_key = first.sim_key;
    out.time_step = first.time_step;
    out.points.n_vars = first.points.n_vars;
    std::vector<std::uint64_t> runs;
    for (const auto& f : files) {
        const auto& p = f.points;
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (natural_less(p.y[i], p.x[i], p.y[i - 1], p.x[i - 1])) {
                throw DataError("subdomain " + std::to_string(f.subdomain_id) + " is not in (y, x) order at point " +
                                std::to_string(i));
            }
        }
        out.points.append(p, 0, p.size());
        runs.push_back(p.size());
    }
    out.summary = summarize(out.points, runs);
    return out;
}

std::vector<std::uint32_t> query_subdomains_in_range(const TimestepSummary& summary, double x_lo, double x_hi,
                                                     double y_lo, double y_hi) {
    if (!(x_lo <= x_hi) || !(y_lo <= y_hi)) throw ValidationError("query ranges must be non-empty");
    std::vector<std::uint32_t> ids;
    for (const auto& s : summary.subdomains) {
        if (s.n_points == 0) continue;
        if (s.x_min <= x_hi && s.x_max >= x_lo && s.y_min <= y_hi && s.y_max >= y_lo) ids.push_back(s.subdomain_id);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// files

fs::path subdomain_path(const fs::path& root, const std::string& sim_key, std::int64_t time_step,
                        std::uint32_t subdomain_id, const std::string& ext) {
    return root / sim_key / step_name(time_step) / ("sub" + std::to_string(subdomain_id) + "." + ext);
}

void write_subdomain_csv(const fs::path& path, const PointTable& points) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x,y";
    for (std::size_t v = 0; v < points.n_vars; ++v) out << ",var" << v;
    out << '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << format_double(points.x[i]) << ',' << format_double(points.y[i]);
        for (std::size_t v = 0; v < points.n_vars; ++v) out << ',' << format_double(points.value(i, v));
        out << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

void write_subdomain_bin(const fs::path& path, const SubdomainFile& file) {
    FileHeader h;
    h.magic = {'S', 'U', 'B', 'D'};
    h.id = file.subdomain_id;
    h.rows = file.points.size();
    h.cols = 2 + file.points.n_vars;
    h.offset = static_cast<std::uint64_t>(file.time_step);
    std::tie(h.lo, h.hi) = y_extent(file.points);
    h.aux0 = static_cast<std::uint32_t>(file.points.n_vars);
    write_array_file(path, h, to_records(file.points));
}

SubdomainFile read_subdomain_file(const fs::path& path, const std::string& sim_key, std::int64_t time_step,
                                  std::uint32_t subdomain_id) {
    SubdomainFile f;
    f.sim_key = sim_key;
    f.time_step = time_step;
    f.subdomain_id = subdomain_id;
    if (path.extension() == ".bin") {
        File in(path, File::Mode::read);
        FileHeader h = read_header(in, kSubdomainMagic);
        if (h.cols < 2 || h.cols != 2 + h.aux0) throw FormatError(path.string() + ": inconsistent column count");
        if (h.id != subdomain_id) {
            throw FormatError(path.string() + ": header subdomain id " + std::to_string(h.id) + " != " + std::to_string(subdomain_id));
        }
        f.points = from_records(read_array_payload(in, h), h.rows, h.aux0);
    } else if (path.extension() == ".csv") {
        CsvTable t = read_csv(path);
        if (t.header.size() < 2 || t.header[0] != "x" || t.header[1] != "y") {
            throw FormatError(path.string() + ": header must start with x,y");
        }
        f.points.n_vars = t.header.size() - 2;
        for (std::size_t v = 0; v < f.points.n_vars; ++v) {
            if (t.header[2 + v] != "var" + std::to_string(v)) throw FormatError(path.string() + ": bad variable header");
        }
        std::vector<double> vals(f.points.n_vars);
        for (const auto& row : t.rows) {
            for (std::size_t v = 0; v < f.points.n_vars; ++v) vals[v] = parse_double(row[2 + v], path.string());
            f.points.push_back(parse_double(row[0], path.string()), parse_double(row[1], path.string()), vals.data());
        }
    } else {
        throw ValidationError(path.string() + ": unknown subdomain file extension");
    }
    check_finite(f.points, path.string());
    return f;
}

void write_consolidated(const fs::path& dir, const ConsolidatedTimestep& ts) {
    fs::create_directories(dir);
    FileHeader h;
    h.magic = {'C', 'O', 'N', 'S'};
    h.id = static_cast<std::uint32_t>(ts.summary.subdomains.size());
    h.rows = ts.points.size();
    h.cols = 2 + ts.points.n_vars;
    h.offset = static_cast<std::uint64_t>(ts.time_step);
    std::tie(h.lo, h.hi) = y_extent(ts.points);
    h.aux0 = static_cast<std::uint32_t>(ts.points.n_vars);
    write_array_file(dir / (step_name(ts.time_step) + ".cons"), h, to_records(ts.points));
    write_summary_csv(dir / (step_name(ts.time_step) + ".summary.csv"), ts.summary);
}

ConsolidatedTimestep read_consolidated(const fs::path& dir, const std::string& sim_key, std::int64_t time_step) {
    fs::path p = dir / (step_name(time_step) + ".cons");
    File in(p, File::Mode::read);
    FileHeader h = read_header(in, kConsolidatedMagic);
    if (h.cols != 2 + h.aux0) throw FormatError(p.string() + ": inconsistent column count");
    ConsolidatedTimestep ts;
    ts.sim_key = sim_key;
    ts.time_step = time_step;
    ts.points = from_records(read_array_payload(in, h), h.rows, h.aux0);
    ts.summary = read_summary_csv(dir / (step_name(time_step) + ".summary.csv"));
    if (ts.summary.total_points() != ts.points.size()) {
        throw FormatError(p.string() + ": summary does not match point count");
    }
    return ts;
}

void write_summary_csv(const fs::path& path, const TimestepSummary& summary) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "subdomain_id,x_min,x_max,y_min,y_max,start_row,n_points\n";
    for (const auto& s : summary.subdomains) {
        out << s.subdomain_id << ',' << format_double(s.x_min) << ',' << format_double(s.x_max) << ','
            << format_double(s.y_min) << ',' << format_double(s.y_max) << ',' << s.start_row << ',' << s.n_points << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

TimestepSummary read_summary_csv(const fs::path& path) {
    CsvTable t = read_csv(path);
    TimestepSummary s;
    const std::string w = path.string();
    for (const auto& row : t.rows) {
        SubdomainExtent e;
        e.subdomain_id = static_cast<std::uint32_t>(parse_u64(row[t.column("subdomain_id")], w));
        e.x_min = parse_double(row[t.column("x_min")], w);
        e.x_max = parse_double(row[t.column("x_max")], w);
        e.y_min = parse_double(row[t.column("y_min")], w);
        e.y_max = parse_double(row[t.column("y_max")], w);
        e.start_row = parse_u64(row[t.column("start_row")], w);
        e.n_points = parse_u64(row[t.column("n_points")], w);
        s.subdomains.push_back(e);
    }
    std::uint64_t expect = 0;
    for (const auto& e : s.subdomains) {
        if (e.start_row != expect) throw FormatError(w + ": start_row values are not prefix sums");
        expect += e.n_points;
    }
    return s;
}

std::vector<std::int64_t> list_raw_timesteps(const fs::path& root, const std::string& sim_key) {
    std::vector<std::int64_t> steps;
    fs::path dir = root / sim_key;
    if (!fs::is_directory(dir)) throw IoError("no simulation directory " + dir.string());
    for (const auto& ent : fs::directory_iterator(dir)) {
        auto name = ent.path().filename().string();
        if (ent.is_directory() && name.size() > 1 && name[0] == 't') steps.push_back(parse_int(name.substr(1), dir.string()));
    }
    std::sort(steps.begin(), steps.end());
    return steps;
}

std::vector<std::int64_t> list_consolidated_timesteps(const fs::path& dir) {
    std::vector<std::int64_t> steps;
    if (!fs::is_directory(dir)) throw IoError("no directory " + dir.string());
    for (const auto& ent : fs::directory_iterator(dir)) {
        auto p = ent.path();
        auto name = p.filename().string();
        if (p.extension() == ".cons" && name.size() > 6 && name[0] == 't') {
            steps.push_back(parse_int(p.stem().string().substr(1), dir.string()));
        }
    }
    std::sort(steps.begin(), steps.end());
    return steps;
}

void ingest_simulation(const fs::path& raw_root, const std::string& sim_key, const fs::path& out_root, int jobs) {
    auto steps = list_raw_timesteps(raw_root, sim_key);
    fs::create_directories(out_root / sim_key);
    parallel_for(steps.size(), jobs, [&](std::size_t k) {
        std::int64_t step = steps[k];
        fs::path step_dir = raw_root / sim_key / step_name(step);
        std::vector<SubdomainFile> files;
        for (const auto& ent : fs::directory_iterator(step_dir)) {
            auto p = ent.path();
            auto stem = p.stem().string();
            if (stem.rfind("sub", 0) != 0 || (p.extension() != ".csv" && p.extension() != ".bin")) continue;
            auto id = static_cast<std::uint32_t>(parse_u64(stem.substr(3), p.string()));
            files.push_back(read_subdomain_file(p, sim_key, step, id));
        }
        write_consolidated(out_root / sim_key, consolidate_timestep(std::move(files)));
    });
}

}  // namespace snapcluster
