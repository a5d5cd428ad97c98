#include "snapcluster/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"
#include "snapcluster/parallel.hpp"

namespace snapcluster {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRemapMagic = "RMAP";
constexpr std::string_view kConsolidatedMagic = "CONS";

struct Box {
    double x_lo, x_hi, y_lo, y_hi;
    bool contains(double x, double y) const { return x >= x_lo && x <= x_hi && y >= y_lo && y <= y_hi; }
};

Box block_box(const CommonGrid& grid, const BlockSpec& block) {
    if (block.row_count % grid.n_x != 0 || block.row_offset % grid.n_x != 0) {
        throw ValidationError("block " + std::to_string(block.block_id) + " does not align with grid rows");
    }
    std::uint64_t iy0 = block.row_offset / grid.n_x;
    std::uint64_t iy1 = iy0 + block.row_count / grid.n_x;
    return {grid.x_lo, grid.x_at(grid.n_x - 1), grid.y_at(iy0), grid.y_at(iy1 - 1)};
}

Box expand(const Box& b, double m) { return {b.x_lo - m, b.x_hi + m, b.y_lo - m, b.y_hi + m}; }

// Reads rows [start, start+count) of a consolidated file.
PointTable read_rows(const File& f, const FileHeader& h, std::uint64_t start, std::uint64_t count) {
    const std::size_t w = dtype_size(h.dtype);
    const std::uint64_t width = h.cols;
    std::vector<std::byte> raw(count * width * w);
    f.read_at(kHeaderSize + start * width * w, raw);
    std::vector<double> rec(count * width);
    decode_values(raw, h.dtype, rec);
    PointTable t;
    t.n_vars = h.aux0;
    for (std::uint64_t i = 0; i < count; ++i) t.push_back(rec[i * width], rec[i * width + 1], rec.data() + i * width + 2);
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// alignment

PointTable align_and_crop(const PointTable& points, double x_max_of_domain, CropRange crop) {
    if (!(crop.lo < crop.hi)) throw ValidationError("crop range must satisfy lo < hi");
    if (!std::isfinite(x_max_of_domain)) throw DataError("domain x_max is not finite");
    PointTable out;
    out.n_vars = points.n_vars;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (std::isnan(points.x[i]) || std::isnan(points.y[i])) {
            throw DataError("NaN coordinate at point " + std::to_string(i));
        }
        double xs = points.x[i] - x_max_of_domain;
        if (xs >= crop.lo && xs <= crop.hi) out.push_back(xs, points.y[i], points.values.data() + i * points.n_vars);
    }
    return out;
}

ConsolidatedTimestep align_and_crop(const ConsolidatedTimestep& ts, double x_max_of_domain, CropRange crop) {
    ConsolidatedTimestep out;
    out.sim_key = ts.sim_key;
    out.time_step = ts.time_step;
    out.points.n_vars = ts.points.n_vars;
    std::vector<std::uint64_t> runs;
    for (const auto& sub : ts.summary.subdomains) {
        PointTable part;
        part.n_vars = ts.points.n_vars;
        part.append(ts.points, sub.start_row, sub.n_points);
        PointTable kept = align_and_crop(part, x_max_of_domain, crop);
        runs.push_back(kept.size());
        out.points.append(kept, 0, kept.size());
    }
    out.summary = summarize(out.points, runs);
    return out;
}

void preprocess_simulation(const fs::path& consolidated_dir, const fs::path& out_dir, CropRange crop, int jobs) {
    auto steps = list_consolidated_timesteps(consolidated_dir);
    if (steps.empty()) throw IoError("no consolidated time steps in " + consolidated_dir.string());
    std::string sim_key = consolidated_dir.filename().string();
    // One shift per simulation: the right edge of the domain at the first step.
    double shift = read_summary_csv(consolidated_dir / ("t" + std::to_string(steps.front()) + ".summary.csv")).x_max();
    fs::create_directories(out_dir);
    parallel_for(steps.size(), jobs, [&](std::size_t k) {
        auto ts = read_consolidated(consolidated_dir, sim_key, steps[k]);
        write_consolidated(out_dir, align_and_crop(ts, shift, crop));
    });
}

// ---------------------------------------------------------------------------
// nearest-neighbour index

NearestIndex::NearestIndex(std::span<const double> x, std::span<const double> y) : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
    if (x.size() != y.size()) throw ValidationError("coordinate arrays differ in length");
    if (x_.empty()) throw CoverageError("nearest-neighbour index has no source points");
    if (x_.size() >= std::numeric_limits<std::uint32_t>::max()) throw ValidationError("too many source points");
    auto [xmin, xmax] = std::minmax_element(x_.begin(), x_.end());
    auto [ymin, ymax] = std::minmax_element(y_.begin(), y_.end());
    x0_ = *xmin;
    y0_ = *ymin;
    double wx = *xmax - *xmin;
    double wy = *ymax - *ymin;
    const double n = static_cast<double>(x_.size());
    if (wx > 0 && wy > 0) {
        cell_ = std::sqrt(wx * wy / n);
    } else {
        cell_ = std::max(wx, wy) / n;
    }
    if (!(cell_ > 0)) cell_ = 1.0;
    nx_ = static_cast<std::int64_t>(std::floor(wx / cell_)) + 1;
    ny_ = static_cast<std::int64_t>(std::floor(wy / cell_)) + 1;

    auto cell_of = [&](std::size_t i) {
        auto cx = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((x_[i] - x0_) / cell_)), 0, nx_ - 1);
        auto cy = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((y_[i] - y0_) / cell_)), 0, ny_ - 1);
        return static_cast<std::size_t>(cy * nx_ + cx);
    };
    cell_start_.assign(static_cast<std::size_t>(nx_ * ny_) + 1, 0);
    for (std::size_t i = 0; i < x_.size(); ++i) ++cell_start_[cell_of(i) + 1];
    for (std::size_t c = 1; c < cell_start_.size(); ++c) cell_start_[c] += cell_start_[c - 1];
    cell_items_.resize(x_.size());
    std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
    for (std::size_t i = 0; i < x_.size(); ++i) cell_items_[fill[cell_of(i)]++] = static_cast<std::uint32_t>(i);
}

bool NearestIndex::better(std::size_t cand, double d2c, std::size_t best, double d2b) const {
    if (d2c != d2b) return d2c < d2b;
    if (y_[cand] != y_[best]) return y_[cand] < y_[best];
    if (x_[cand] != x_[best]) return x_[cand] < x_[best];
    return cand < best;
}

std::size_t NearestIndex::nearest(double qx, double qy) const {
    const auto cx = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((qx - x0_) / cell_)), 0, nx_ - 1);
    const auto cy = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((qy - y0_) / cell_)), 0, ny_ - 1);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d2 = std::numeric_limits<double>::infinity();

    auto scan = [&](std::int64_t ix, std::int64_t iy) {
        if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) return;
        auto c = static_cast<std::size_t>(iy * nx_ + ix);
        for (auto k = cell_start_[c]; k < cell_start_[c + 1]; ++k) {
            std::size_t i = cell_items_[k];
            double dx = x_[i] - qx;
            double dy = y_[i] - qy;
            double d2 = dx * dx + dy * dy;
            if (best == std::numeric_limits<std::size_t>::max() || better(i, d2, best, best_d2)) {
                best = i;
                best_d2 = d2;
            }
        }
    };

    const std::int64_t max_ring = std::max(nx_, ny_);
    for (std::int64_t r = 0; r <= max_ring; ++r) {
        if (r == 0) {
            scan(cx, cy);
        } else {
            for (std::int64_t ix = cx - r; ix <= cx + r; ++ix) {
                scan(ix, cy - r);
                scan(ix, cy + r);
            }
            for (std::int64_t iy = cy - r + 1; iy <= cy + r - 1; ++iy) {
                scan(cx - r, iy);
                scan(cx + r, iy);
            }
        }
        // Cells beyond ring r are at least (r - 1) cells away even allowing
        // for rounding in the cell assignment.
        if (best != std::numeric_limits<std::size_t>::max() && r >= 1 &&
            std::sqrt(best_d2) < static_cast<double>(r - 1) * cell_) {
            break;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// remapping

std::vector<std::size_t> nearest_sources(std::span<const double> src_x, std::span<const double> src_y,
                                         const CommonGrid& grid, const BlockSpec& block, double margin) {
    if (src_x.size() != src_y.size()) throw ValidationError("coordinate arrays differ in length");
    Box box = block_box(grid, block);
    Box wide = expand(box, margin);
    double sx_lo = std::numeric_limits<double>::infinity(), sx_hi = -sx_lo, sy_lo = sx_lo, sy_hi = -sx_lo;
    std::size_t inside = 0;
    for (std::size_t i = 0; i < src_x.size(); ++i) {
        if (std::isnan(src_x[i]) || std::isnan(src_y[i])) throw DataError("NaN source coordinate");
        sx_lo = std::min(sx_lo, src_x[i]);
        sx_hi = std::max(sx_hi, src_x[i]);
        sy_lo = std::min(sy_lo, src_y[i]);
        sy_hi = std::max(sy_hi, src_y[i]);
        if (wide.contains(src_x[i], src_y[i])) ++inside;
    }
    const std::string where = "block " + std::to_string(block.block_id);
    if (inside == 0) throw CoverageError(where + ": no source point within the margin-expanded block");
    if (sx_lo - margin > box.x_lo || sx_hi + margin < box.x_hi || sy_lo - margin > box.y_lo || sy_hi + margin < box.y_hi) {
        throw CoverageError(where + ": source extent does not cover the block (would extrapolate)");
    }
    NearestIndex index(src_x, src_y);
    std::vector<std::size_t> out(block.row_count);
    const std::uint64_t iy0 = block.row_offset / grid.n_x;
    for (std::uint64_t r = 0; r < block.row_count; ++r) {
        out[r] = index.nearest(grid.x_at(r % grid.n_x), grid.y_at(iy0 + r / grid.n_x));
    }
    return out;
}

std::vector<double> remap_1nn(std::span<const double> src_x, std::span<const double> src_y,
                              std::span<const double> src_values, const CommonGrid& grid, const BlockSpec& block,
                              double margin) {
    if (src_values.size() != src_x.size()) throw ValidationError("one value per source point is required");
    auto nn = nearest_sources(src_x, src_y, grid, block, margin);
    std::vector<double> out(nn.size());
    for (std::size_t i = 0; i < nn.size(); ++i) out[i] = src_values[nn[i]];
    return out;
}

fs::path remapped_block_path(const fs::path& dir, std::uint32_t block_id) {
    char name[32];
    std::snprintf(name, sizeof(name), "block_%03u.rmap", block_id);
    return dir / name;
}

void write_remapped_block(const fs::path& path, const RemappedBlock& block) {
    FileHeader h;
    h.magic = {'R', 'M', 'A', 'P'};
    h.id = block.spec.block_id;
    h.rows = block.spec.row_count;
    h.cols = block.width();
    h.offset = block.spec.row_offset;
    h.lo = block.spec.y_lo;
    h.hi = block.spec.y_hi;
    h.aux0 = block.n_steps;
    h.aux1 = block.n_vars;
    write_array_file(path, h, block.data);
}

RemappedBlock read_remapped_block(const fs::path& path) {
    File f(path, File::Mode::read);
    FileHeader h = read_header(f, kRemapMagic);
    RemappedBlock b;
    b.spec = {h.id, h.lo, h.hi, h.rows, h.offset};
    b.n_steps = h.aux0;
    b.n_vars = h.aux1;
    if (h.cols != b.width()) throw FormatError(path.string() + ": column count does not match n_steps/n_vars");
    b.data = read_array_payload(f, h);
    return b;
}

RemapInfo read_remap_info(const fs::path& dir) {
    KeyValues kv = read_key_values(dir / "remap.meta");
    RemapInfo info;
    auto it = kv.find("sim_key");
    if (it == kv.end()) throw FormatError(dir.string() + "/remap.meta: missing sim_key");
    info.sim_key = it->second;
    info.first_step = get_int(kv, "first_step");
    info.n_steps = static_cast<std::uint32_t>(get_int(kv, "n_steps"));
    info.n_vars = static_cast<std::uint32_t>(get_int(kv, "n_vars"));
    return info;
}

double effective_margin(const CommonGrid& grid, double margin) { return margin > 0.0 ? margin : 4.0 * grid.delta; }

RemapInfo remap_simulation(const fs::path& aligned_dir, const std::string& sim_key, const CommonGrid& grid,
                           const fs::path& out_dir, double margin, int jobs) {
    margin = effective_margin(grid, margin);
    auto steps = list_consolidated_timesteps(aligned_dir);
    if (steps.empty()) throw IoError("no time steps in " + aligned_dir.string());
    for (std::size_t k = 1; k < steps.size(); ++k) {
        if (steps[k] != steps[k - 1] + 1) throw DataError(sim_key + ": time steps are not contiguous");
    }
    auto step_file = [&](std::int64_t s) { return aligned_dir / ("t" + std::to_string(s) + ".cons"); };
    auto step_summary = [&](std::int64_t s) { return aligned_dir / ("t" + std::to_string(s) + ".summary.csv"); };

    std::vector<TimestepSummary> summaries;
    for (auto s : steps) summaries.push_back(read_summary_csv(step_summary(s)));
    RemapInfo info;
    info.sim_key = sim_key;
    info.first_step = steps.front();
    info.n_steps = static_cast<std::uint32_t>(steps.size());
    {
        File f(step_file(steps.front()), File::Mode::read);
        info.n_vars = read_header(f, kConsolidatedMagic).aux0;
    }
    fs::create_directories(out_dir);

    parallel_for(grid.blocks.size(), jobs, [&](std::size_t b) {
        const BlockSpec& block = grid.blocks[b];
        Box wide = expand(block_box(grid, block), margin);

        // Source points of one step restricted to the expanded block box,
        // read only from subdomains whose extent intersects it.
        auto extract = [&](std::size_t k) {
            File f(step_file(steps[k]), File::Mode::read);
            FileHeader h = read_header(f, kConsolidatedMagic);
            if (h.aux0 != info.n_vars) throw DataError(sim_key + ": variable count changes across time steps");
            PointTable pts;
            pts.n_vars = info.n_vars;
            for (auto id : query_subdomains_in_range(summaries[k], wide.x_lo, wide.x_hi, wide.y_lo, wide.y_hi)) {
                const auto& sub = summaries[k].subdomains[id];
                PointTable rows = read_rows(f, h, sub.start_row, sub.n_points);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (wide.contains(rows.x[i], rows.y[i])) pts.push_back(rows.x[i], rows.y[i], rows.values.data() + i * pts.n_vars);
                }
            }
            return pts;
        };

        PointTable first = extract(0);
        if (first.size() == 0) throw CoverageError(sim_key + " block " + std::to_string(b) + ": no source points near block");
        auto nn = nearest_sources(first.x, first.y, grid, block, margin);

        RemappedBlock out;
        out.spec = block;
        out.n_steps = info.n_steps;
        out.n_vars = info.n_vars;
        const std::uint64_t width = out.width();
        out.data.assign(block.row_count * width, 0.0);
        const std::uint64_t iy0 = block.row_offset / grid.n_x;
        for (std::uint64_t r = 0; r < block.row_count; ++r) {
            out.data[r * width] = grid.x_at(r % grid.n_x);
            out.data[r * width + 1] = grid.y_at(iy0 + r / grid.n_x);
        }
        for (std::size_t k = 0; k < steps.size(); ++k) {
            PointTable later;
            const PointTable* pts = &first;
            if (k > 0) {
                later = extract(k);
                if (later.x != first.x || later.y != first.y) {
                    throw DataError(sim_key + " step " + std::to_string(steps[k]) +
                                    ": source coordinates differ from the first time step");
                }
                pts = &later;
            }
            for (std::uint64_t r = 0; r < block.row_count; ++r) {
                for (std::uint32_t v = 0; v < info.n_vars; ++v) {
                    out.data[r * width + 2 + static_cast<std::uint64_t>(v) * info.n_steps + k] = pts->value(nn[r], v);
                }
            }
        }
        write_remapped_block(remapped_block_path(out_dir, block.block_id), out);
    });

    KeyValues meta;
    meta["sim_key"] = sim_key;
    meta["first_step"] = std::to_string(info.first_step);
    meta["n_steps"] = std::to_string(info.n_steps);
    meta["n_vars"] = std::to_string(info.n_vars);
    write_key_values(out_dir / "remap.meta", meta);
    save_grid_config(out_dir / "grid.cfg", grid);
    return info;
}

std::map<std::string, SimulationMeta> read_simulation_metadata(const fs::path& path) {
    CsvTable t = read_csv(path);
    std::map<std::string, SimulationMeta> out;
    const std::string w = path.string();
    for (const auto& row : t.rows) {
        SimulationMeta m;
        m.he_length = parse_double(row[t.column("he_length")], w);
        m.tip_velocity = parse_double(row[t.column("tip_velocity")], w);
        m.jet_radius = parse_double(row[t.column("jet_radius")], w);
        m.label = parse_outcome(row[t.column("label")]);
        out[row[t.column("sim_key")]] = m;
    }
    return out;
}

AssembledStore assemble_store(std::span<const fs::path> remap_dirs, std::uint32_t var,
                              const std::map<std::string, SimulationMeta>& metadata, const CommonGrid& grid,
                              const fs::path& store_dir, Dtype dtype, int jobs) {
    if (remap_dirs.empty()) throw ValidationError("no remapped simulations to assemble");
    std::vector<RemapInfo> infos;
    std::vector<std::uint64_t> first_col;
    SnapshotIndex index;
    for (const auto& dir : remap_dirs) {
        RemapInfo info = read_remap_info(dir);
        if (var >= info.n_vars) throw ValidationError(info.sim_key + ": variable " + std::to_string(var) + " out of range");
        auto it = metadata.find(info.sim_key);
        index.add_simulation(info.sim_key, it == metadata.end() ? SimulationMeta{} : it->second);
        first_col.push_back(index.size());
        for (std::uint32_t t = 0; t < info.n_steps; ++t) index.append(info.sim_key, info.first_step + t);
        infos.push_back(info);
    }
    index.validate();

    BlockMatrix store = BlockMatrix::create(store_dir, grid.blocks, index.size(), dtype);
    parallel_for(grid.blocks.size(), jobs, [&](std::size_t b) {
        const BlockSpec& spec = grid.blocks[b];
        for (std::size_t s = 0; s < remap_dirs.size(); ++s) {
            RemappedBlock rb = read_remapped_block(remapped_block_path(remap_dirs[s], spec.block_id));
            if (rb.spec.row_count != spec.row_count || rb.spec.row_offset != spec.row_offset) {
                throw FormatError(remap_dirs[s].string() + ": block " + std::to_string(b) + " does not match the grid");
            }
            const std::uint32_t n = infos[s].n_steps;
            std::vector<double> buf(spec.row_count * n);
            for (std::uint64_t r = 0; r < spec.row_count; ++r) {
                for (std::uint32_t t = 0; t < n; ++t) buf[r * n + t] = rb.value(r, var, t);
            }
            store.write_columns_block(spec.block_id, first_col[s], n, buf);
        }
    });
    store.attach_grid(grid);
    index.save(store_dir / "index.csv");
    return {std::move(store), std::move(index)};
}

}  // namespace snapcluster
