#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "snapcluster/block_spec.hpp"

namespace snapcluster {

// Regular lattice shared by every simulation after remapping. Grid point
// (ix, iy) sits at (x_lo + ix*delta, y_lo + iy*delta) and has global row
// iy*n_x + ix, i.e. points enumerate by increasing y, then increasing x.
struct CommonGrid {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double y_lo = 0.0;
    double y_hi = 0.0;
    double delta = 0.0;
    std::uint64_t n_x = 0;
    std::uint64_t n_y = 0;
    std::uint64_t block_rows = 0;  // grid rows per block (last block takes the rest)
    std::vector<BlockSpec> blocks;

    std::uint64_t size() const { return n_x * n_y; }
    double x_at(std::uint64_t ix) const { return x_lo + static_cast<double>(ix) * delta; }
    double y_at(std::uint64_t iy) const { return y_lo + static_cast<double>(iy) * delta; }
};

CommonGrid build_common_grid(double x_lo, double x_hi, double y_lo, double y_hi, double delta,
                             std::uint64_t target_block_rows);

// Default common grid: x [-31.5, -0.5], y [0.0063, 10.99], spacing 0.0125,
// 40 grid rows per block.
CommonGrid default_common_grid();

// Flat key=value file: x_lo, x_hi, y_lo, y_hi, delta, block_rows.
void save_grid_config(const std::filesystem::path& path, const CommonGrid& grid);
CommonGrid load_grid_config(const std::filesystem::path& path);

}  // namespace snapcluster
