#include "snapcluster/grid.hpp"

#include <algorithm>
#include <cmath>

#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"

namespace snapcluster {

namespace {

// Number of lattice points from lo to hi inclusive. The small slack absorbs
// representation error in decimal inputs such as 31.0 / 0.0125.
std::uint64_t lattice_count(double lo, double hi, double delta) {
    return static_cast<std::uint64_t>(std::floor((hi - lo) / delta + 1e-9)) + 1;
}

}  // namespace

CommonGrid build_common_grid(double x_lo, double x_hi, double y_lo, double y_hi, double delta,
                             std::uint64_t target_block_rows) {
    if (!std::isfinite(x_lo) || !std::isfinite(x_hi) || !std::isfinite(y_lo) || !std::isfinite(y_hi)) {
        throw ValidationError("grid ranges must be finite");
    }
    if (!(x_lo < x_hi) || !(y_lo < y_hi)) throw ValidationError("grid ranges must be non-degenerate");
    if (!(delta > 0.0)) throw ValidationError("grid spacing must be positive");
    if (delta > (x_hi - x_lo) || delta > (y_hi - y_lo)) {
        throw ValidationError("grid spacing is larger than the range extent");
    }
    if (target_block_rows == 0) throw ValidationError("block_rows must be positive");

    CommonGrid g;
    g.x_lo = x_lo;
    g.x_hi = x_hi;
    g.y_lo = y_lo;
    g.y_hi = y_hi;
    g.delta = delta;
    g.n_x = lattice_count(x_lo, x_hi, delta);
    g.n_y = lattice_count(y_lo, y_hi, delta);
    g.block_rows = target_block_rows;

    std::uint64_t row = 0;
    std::uint32_t id = 0;
    while (row < g.n_y) {
        std::uint64_t rows = std::min(target_block_rows, g.n_y - row);
        BlockSpec s;
        s.block_id = id++;
        s.row_count = rows * g.n_x;
        s.row_offset = row * g.n_x;
        s.y_lo = g.y_at(row);
        s.y_hi = g.y_at(row + rows);
        g.blocks.push_back(s);
        row += rows;
    }
    return g;
}

CommonGrid default_common_grid() {
    return build_common_grid(-31.5, -0.5, 0.0063, 10.99, 0.0125, 40);
}

void save_grid_config(const std::filesystem::path& path, const CommonGrid& grid) {
    KeyValues kv;
    kv["x_lo"] = format_double(grid.x_lo);
    kv["x_hi"] = format_double(grid.x_hi);
    kv["y_lo"] = format_double(grid.y_lo);
    kv["y_hi"] = format_double(grid.y_hi);
    kv["delta"] = format_double(grid.delta);
    kv["block_rows"] = std::to_string(grid.block_rows);
    write_key_values(path, kv);
}

CommonGrid load_grid_config(const std::filesystem::path& path) {
    KeyValues kv = read_key_values(path);
    for (const auto& [k, v] : kv) {
        if (k != "x_lo" && k != "x_hi" && k != "y_lo" && k != "y_hi" && k != "delta" && k != "block_rows") {
            throw ValidationError(path.string() + ": unknown grid key '" + k + "'");
        }
    }
    auto rows = get_int(kv, "block_rows", 40);
    if (rows <= 0) throw ValidationError("block_rows must be positive");
    return build_common_grid(get_double(kv, "x_lo"), get_double(kv, "x_hi"), get_double(kv, "y_lo"),
                             get_double(kv, "y_hi"), get_double(kv, "delta"),
                             static_cast<std::uint64_t>(rows));
}

}  // namespace snapcluster
