#pragma once
// Alignment, cropping and nearest-neighbour remapping of consolidated
// simulation output onto the common grid, and assembly of remapped blocks
// into a snapshot store.
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/grid.hpp"
#include "snapcluster/ingest.hpp"
#include "snapcluster/snapshot_store.hpp"

namespace snapcluster {

struct CropRange {
    double lo = -32.0;
    double hi = 0.0;
};

// Shifts x by -x_max_of_domain and keeps points whose shifted x lies in the
// closed crop range. Relative order and values are preserved.
PointTable align_and_crop(const PointTable& points, double x_max_of_domain, CropRange crop);

// Same for a whole time step; subdomain runs are kept and the summary is
// recomputed (fully cropped subdomains remain with n_points = 0).
ConsolidatedTimestep align_and_crop(const ConsolidatedTimestep& ts, double x_max_of_domain, CropRange crop);

// Aligns every time step of one simulation with a single shift taken from
// the domain extent at the first time step.
void preprocess_simulation(const std::filesystem::path& consolidated_dir, const std::filesystem::path& out_dir,
                           CropRange crop, int jobs = 1);

// Uniform-bin spatial index answering exact nearest-neighbour queries.
// Equidistant candidates resolve to the lexicographically smallest (y, x)
// coordinate, then the lowest index.
class NearestIndex {
public:
    NearestIndex(std::span<const double> x, std::span<const double> y);
    std::size_t nearest(double qx, double qy) const;
    std::size_t size() const { return x_.size(); }

private:
    bool better(std::size_t cand, double d2c, std::size_t best, double d2b) const;

    std::vector<double> x_;
    std::vector<double> y_;
    double x0_ = 0.0;
    double y0_ = 0.0;
    double cell_ = 1.0;
    std::int64_t nx_ = 1;
    std::int64_t ny_ = 1;
    std::vector<std::uint32_t> cell_start_;
    std::vector<std::uint32_t> cell_items_;
};

// Source index nearest to each grid point of one block. Throws CoverageError
// when no source lies in the block box expanded by `margin`, or when the
// expanded source bounding box does not cover the block.
std::vector<std::size_t> nearest_sources(std::span<const double> src_x, std::span<const double> src_y,
                                         const CommonGrid& grid, const BlockSpec& block, double margin);

// One value per grid point of the block, taken from the nearest source.
std::vector<double> remap_1nn(std::span<const double> src_x, std::span<const double> src_y,
                              std::span<const double> src_values, const CommonGrid& grid, const BlockSpec& block,
                              double margin);

// Remapped block of one simulation: row-major row_count x (2 + n_vars*n_steps)
// with columns x, y, then variable-major values (var v, step t at column
// 2 + v*n_steps + t).
struct RemappedBlock {
    BlockSpec spec;
    std::uint32_t n_steps = 0;
    std::uint32_t n_vars = 0;
    std::vector<double> data;

    std::uint64_t width() const { return 2 + static_cast<std::uint64_t>(n_vars) * n_steps; }
    double value(std::uint64_t row, std::uint32_t var, std::uint32_t step) const {
        return data[row * width() + 2 + static_cast<std::uint64_t>(var) * n_steps + step];
    }
};

struct RemapInfo {
    std::string sim_key;
    std::int64_t first_step = 0;
    std::uint32_t n_steps = 0;
    std::uint32_t n_vars = 0;
};

void write_remapped_block(const std::filesystem::path& path, const RemappedBlock& block);
RemappedBlock read_remapped_block(const std::filesystem::path& path);
std::filesystem::path remapped_block_path(const std::filesystem::path& dir, std::uint32_t block_id);
RemapInfo read_remap_info(const std::filesystem::path& dir);

// margin <= 0 selects the default of 4 grid spacings.
double effective_margin(const CommonGrid& grid, double margin);

// Remaps every time step of an aligned simulation onto the grid, one output
// file per block. Nearest neighbours are computed once per block and reused
// for every step, which requires identical source coordinates across steps.
RemapInfo remap_simulation(const std::filesystem::path& aligned_dir, const std::string& sim_key,
                           const CommonGrid& grid, const std::filesystem::path& out_dir, double margin = 0.0,
                           int jobs = 1);

// sim_key -> metadata, from CSV `sim_key,he_length,tip_velocity,jet_radius,label`.
std::map<std::string, SimulationMeta> read_simulation_metadata(const std::filesystem::path& path);

struct AssembledStore {
    BlockMatrix matrix;
    SnapshotIndex index;
};

// Builds the snapshot matrix of variable `var` from remapped simulations, in
// the order given. Writes <store_dir>/index.csv and attaches the grid.
AssembledStore assemble_store(std::span<const std::filesystem::path> remap_dirs, std::uint32_t var,
                              const std::map<std::string, SimulationMeta>& metadata, const CommonGrid& grid,
                              const std::filesystem::path& store_dir, Dtype dtype = Dtype::f64, int jobs = 1);

}  // namespace snapcluster
