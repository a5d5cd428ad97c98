#pragma once
// Block-partitioned snapshot matrix on disk plus the index that maps matrix
// columns back to (simulation, time step).
//
// A store is a directory holding block_000.snpb .. block_{bk-1}.snpb. Each
// block file is a 64-byte "SNPB" header followed by row_count x n_cols
// values, row-major, so a block streams one grid point (matrix row) at a
// time with sequential reads.
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/block_spec.hpp"
#include "snapcluster/grid.hpp"

namespace snapcluster {

enum class OutcomeLabel { break_, almost_break, no_break, unknown };

std::string outcome_name(OutcomeLabel label);
OutcomeLabel parse_outcome(const std::string& name);

struct SimulationMeta {
    double he_length = 0.0;
    double tip_velocity = 0.0;
    double jet_radius = 0.0;
    OutcomeLabel label = OutcomeLabel::unknown;
};

struct IndexEntry {
    std::string sim_key;
    std::int64_t time_step = 0;
    std::uint64_t column = 0;
};

class SnapshotIndex {
public:
    void add_simulation(const std::string& sim_key, const SimulationMeta& meta);
    // Appends the next column. Time steps of a simulation must be appended
    // contiguously and in increasing order.
    std::uint64_t append(const std::string& sim_key, std::int64_t time_step);

    std::size_t size() const { return entries_.size(); }
    const IndexEntry& entry(std::uint64_t column) const { return entries_.at(column); }
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const std::map<std::string, SimulationMeta>& metadata() const { return metadata_; }
    const SimulationMeta& meta(const std::string& sim_key) const;
    std::vector<std::uint64_t> columns_of(const std::string& sim_key) const;

    // Throws ValidationError when an invariant does not hold.
    void validate() const;

    void save(const std::filesystem::path& path) const;
    static SnapshotIndex load(const std::filesystem::path& path);

private:
    std::vector<IndexEntry> entries_;
    std::map<std::string, SimulationMeta> metadata_;
};

using RowVisitor = std::function<void(std::uint64_t row_index, std::span<const double> row)>;

class BlockMatrix {
public:
    // Creates the directory (if needed) and zero-filled block files.
    static BlockMatrix create(const std::filesystem::path& dir, std::vector<BlockSpec> specs,
                              std::uint64_t n_cols, Dtype dtype = Dtype::f64);
    static BlockMatrix open(const std::filesystem::path& dir);

    const std::vector<BlockSpec>& specs() const { return specs_; }
    std::size_t block_count() const { return specs_.size(); }
    std::uint64_t n_rows() const { return total_rows(specs_); }
    std::uint64_t n_cols() const { return n_cols_; }
    Dtype dtype() const { return dtype_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path block_path(std::uint32_t block_id) const;

    void write_column_block(std::uint32_t block_id, std::uint64_t column, std::span<const double> values);
    // Writes columns [first_column, first_column + width) of one block from a
    // row-major row_count x width buffer.
    void write_columns_block(std::uint32_t block_id, std::uint64_t first_column, std::uint64_t width,
                             std::span<const double> row_major);

    std::vector<double> read_column_block(std::uint32_t block_id, std::uint64_t column) const;
    std::vector<double> read_column(std::uint64_t column) const;

    // Visits every row of the full matrix in global order.
    void stream_rows(const RowVisitor& visitor) const;
    // Visits the rows of one block; row_index is the global row index.
    void stream_block_rows(std::uint32_t block_id, const RowVisitor& visitor) const;

    void attach_grid(const CommonGrid& grid);
    std::optional<CommonGrid> grid() const;

private:
    BlockMatrix() = default;
    File open_block(std::uint32_t block_id, File::Mode mode) const;

    std::filesystem::path dir_;
    std::vector<BlockSpec> specs_;
    std::uint64_t n_cols_ = 0;
    Dtype dtype_ = Dtype::f64;
};

}  // namespace snapcluster
