#include "snapcluster/snapshot_store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"

namespace snapcluster {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kBlockMagic = "SNPB";
constexpr std::uint64_t kStreamChunkBytes = 1 << 20;

}  // namespace

std::string outcome_name(OutcomeLabel label) {
    switch (label) {
        case OutcomeLabel::break_: return "break";
        case OutcomeLabel::almost_break: return "almost_break";
        case OutcomeLabel::no_break: return "no_break";
        case OutcomeLabel::unknown: return "unknown";
    }
    return "unknown";
}

OutcomeLabel parse_outcome(const std::string& name) {
    if (name == "break") return OutcomeLabel::break_;
    if (name == "almost_break") return OutcomeLabel::almost_break;
    if (name == "no_break") return OutcomeLabel::no_break;
    if (name == "unknown") return OutcomeLabel::unknown;
    throw ValidationError("unknown outcome label '" + name + "'");
}

// ---------------------------------------------------------------------------
// SnapshotIndex

void SnapshotIndex::add_simulation(const std::string& sim_key, const SimulationMeta& meta) {
    if (sim_key.empty() || sim_key.find_first_of(",\n") != std::string::npos) {
        throw ValidationError("invalid sim_key '" + sim_key + "'");
    }
    metadata_[sim_key] = meta;
}

std::uint64_t SnapshotIndex::append(const std::string& sim_key, std::int64_t time_step) {
    if (!metadata_.count(sim_key)) {
        throw ValidationError("sim_key '" + sim_key + "' has no metadata");
    }
    if (time_step < 0) throw ValidationError("negative time step");
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (it->sim_key == sim_key) {
            if (time_step != it->time_step + 1) {
                throw ValidationError("time steps of '" + sim_key + "' must be contiguous: got " +
                                      std::to_string(time_step) + " after " + std::to_string(it->time_step));
            }
            break;
        }
    }
    IndexEntry e{sim_key, time_step, entries_.size()};
    entries_.push_back(e);
    return e.column;
}

const SimulationMeta& SnapshotIndex::meta(const std::string& sim_key) const {
    auto it = metadata_.find(sim_key);
    if (it == metadata_.end()) throw ValidationError("unknown sim_key '" + sim_key + "'");
    return it->second;
}

std::vector<std::uint64_t> SnapshotIndex::columns_of(const std::string& sim_key) const {
    std::vector<std::uint64_t> cols;
    for (const auto& e : entries_) {
        if (e.sim_key == sim_key) cols.push_back(e.column);
    }
    return cols;
}

void SnapshotIndex::validate() const {
    std::map<std::string, std::int64_t> last_step;
    for (std::size_t c = 0; c < entries_.size(); ++c) {
        const auto& e = entries_[c];
        if (e.column != c) throw ValidationError("index column " + std::to_string(e.column) + " out of sequence");
        if (!metadata_.count(e.sim_key)) throw ValidationError("sim_key '" + e.sim_key + "' has no metadata");
        if (e.time_step < 0) throw ValidationError("negative time step in index");
        auto it = last_step.find(e.sim_key);
        if (it != last_step.end() && e.time_step != it->second + 1) {
            throw ValidationError("time steps of '" + e.sim_key + "' are not contiguous");
        }
        last_step[e.sim_key] = e.time_step;
    }
}

void SnapshotIndex::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "[snapshots]\ncolumn,sim_key,time_step\n";
    for (const auto& e : entries_) out << e.column << ',' << e.sim_key << ',' << e.time_step << '\n';
    out << "[metadata]\nsim_key,he_length,tip_velocity,jet_radius,label\n";
    for (const auto& [key, m] : metadata_) {
        out << key << ',' << format_double(m.he_length) << ',' << format_double(m.tip_velocity) << ','
            << format_double(m.jet_radius) << ',' << outcome_name(m.label) << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

SnapshotIndex SnapshotIndex::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    SnapshotIndex idx;
    std::vector<IndexEntry> rows;
    enum class Section { none, snapshots, metadata } section = Section::none;
    bool expect_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (line == "[snapshots]") {
            section = Section::snapshots;
            expect_header = true;
            continue;
        }
        if (line == "[metadata]") {
            section = Section::metadata;
            expect_header = true;
            continue;
        }
        if (expect_header) {
            expect_header = false;
            continue;
        }
        auto fields = split_csv_line(line);
        std::string where = path.string() + ":" + std::to_string(line_no);
        if (section == Section::snapshots) {
            if (fields.size() != 3) throw FormatError(where + ": expected column,sim_key,time_step");
            rows.push_back({fields[1], parse_int(fields[2], where), parse_u64(fields[0], where)});
        } else if (section == Section::metadata) {
            if (fields.size() != 5) throw FormatError(where + ": expected 5 metadata fields");
            SimulationMeta m;
            m.he_length = parse_double(fields[1], where);
            m.tip_velocity = parse_double(fields[2], where);
            m.jet_radius = parse_double(fields[3], where);
            m.label = parse_outcome(fields[4]);
            idx.metadata_[fields[0]] = m;
        } else {
            throw FormatError(where + ": record outside of a section");
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.column < b.column; });
    idx.entries_ = std::move(rows);
    idx.validate();
    return idx;
}

// ---------------------------------------------------------------------------
// BlockMatrix

fs::path BlockMatrix::block_path(std::uint32_t block_id) const {
    char name[32];
    std::snprintf(name, sizeof(name), "block_%03u.snpb", block_id);
    return dir_ / name;
}

BlockMatrix BlockMatrix::create(const fs::path& dir, std::vector<BlockSpec> specs, std::uint64_t n_cols,
                                Dtype dtype) {
    validate_block_specs(specs);
    if (n_cols == 0) throw ValidationError("a store needs at least one column");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    BlockMatrix m;
    m.dir_ = dir;
    m.specs_ = std::move(specs);
    m.n_cols_ = n_cols;
    m.dtype_ = dtype;
    for (const auto& s : m.specs_) {
        FileHeader h;
        h.magic = {'S', 'N', 'P', 'B'};
        h.dtype = dtype;
        h.id = s.block_id;
        h.rows = s.row_count;
        h.cols = n_cols;
        h.offset = s.row_offset;
        h.lo = s.y_lo;
        h.hi = s.y_hi;
        File f(m.block_path(s.block_id), File::Mode::create);
        f.write_at(0, encode_header(h));
        f.resize(kHeaderSize + h.payload_bytes());
    }
    return m;
}

BlockMatrix BlockMatrix::open(const fs::path& dir) {
    BlockMatrix m;
    m.dir_ = dir;
    for (std::uint32_t b = 0;; ++b) {
        fs::path p = m.block_path(b);
        if (!fs::exists(p)) break;
        File f(p, File::Mode::read);
        FileHeader h = read_header(f, kBlockMagic);
        if (h.id != b) throw FormatError(p.string() + ": header block_id " + std::to_string(h.id) + " != " + std::to_string(b));
        if (b == 0) {
            m.n_cols_ = h.cols;
            m.dtype_ = h.dtype;
        } else if (h.cols != m.n_cols_ || h.dtype != m.dtype_) {
            throw FormatError(p.string() + ": column count or dtype differs from block 0");
        }
        m.specs_.push_back({h.id, h.lo, h.hi, h.rows, h.offset});
    }
    if (m.specs_.empty()) throw IoError("no block files in " + dir.string());
    try {
        validate_block_specs(m.specs_);
    } catch (const ValidationError& e) {
        throw FormatError(dir.string() + ": " + e.what());
    }
    return m;
}

File BlockMatrix::open_block(std::uint32_t block_id, File::Mode mode) const {
    if (block_id >= specs_.size()) throw ValidationError("block_id " + std::to_string(block_id) + " out of range");
    File f(block_path(block_id), mode);
    const BlockSpec& s = specs_[block_id];
    std::uint64_t expect = kHeaderSize + s.row_count * n_cols_ * dtype_size(dtype_);
    if (f.size() != expect) {
        throw FormatError("block " + std::to_string(block_id) + ": file size " + std::to_string(f.size()) +
                          " does not match header (expected " + std::to_string(expect) + ")");
    }
    FileHeader h = read_header(f, kBlockMagic);
    if (h.id != block_id || h.rows != s.row_count || h.cols != n_cols_) {
        throw FormatError("block " + std::to_string(block_id) + ": header changed since open");
    }
    return f;
}

void BlockMatrix::write_column_block(std::uint32_t block_id, std::uint64_t column, std::span<const double> values) {
    write_columns_block(block_id, column, 1, values);
}

void BlockMatrix::write_columns_block(std::uint32_t block_id, std::uint64_t first_column, std::uint64_t width,
                                      std::span<const double> row_major) {
    if (block_id >= specs_.size()) throw ValidationError("block_id " + std::to_string(block_id) + " out of range");
    const BlockSpec& s = specs_[block_id];
    if (width == 0 || first_column + width > n_cols_) {
        throw ValidationError("columns [" + std::to_string(first_column) + ", " + std::to_string(first_column + width) +
                              ") out of range for " + std::to_string(n_cols_) + " columns");
    }
    if (row_major.size() != s.row_count * width) {
        throw ValidationError("block " + std::to_string(block_id) + " expects " + std::to_string(s.row_count * width) +
                              " values, got " + std::to_string(row_major.size()));
    }
    File f = open_block(block_id, File::Mode::read_write);
    const std::size_t w = dtype_size(dtype_);
    const std::uint64_t row_bytes = n_cols_ * w;
    if (width == n_cols_) {
        std::vector<std::byte> buf(row_major.size() * w);
        encode_values(row_major, dtype_, buf);
        f.write_at(kHeaderSize, buf);
        return;
    }
    std::vector<std::byte> buf(width * w);
    for (std::uint64_t r = 0; r < s.row_count; ++r) {
        encode_values(row_major.subspan(r * width, width), dtype_, buf);
        f.write_at(kHeaderSize + r * row_bytes + first_column * w, buf);
    }
}

std::vector<double> BlockMatrix::read_column_block(std::uint32_t block_id, std::uint64_t column) const {
    if (column >= n_cols_) throw ValidationError("column " + std::to_string(column) + " out of range");
    std::vector<double> out;
    out.reserve(specs_.at(block_id).row_count);
    stream_block_rows(block_id, [&](std::uint64_t, std::span<const double> row) { out.push_back(row[column]); });
    return out;
}

std::vector<double> BlockMatrix::read_column(std::uint64_t column) const {
    if (column >= n_cols_) throw ValidationError("column " + std::to_string(column) + " out of range");
    std::vector<double> out;
    out.reserve(n_rows());
    stream_rows([&](std::uint64_t, std::span<const double> row) { out.push_back(row[column]); });
    return out;
}

void BlockMatrix::stream_rows(const RowVisitor& visitor) const {
    for (const auto& s : specs_) stream_block_rows(s.block_id, visitor);
}

void BlockMatrix::stream_block_rows(std::uint32_t block_id, const RowVisitor& visitor) const {
    File f = open_block(block_id, File::Mode::read);
    const BlockSpec& s = specs_[block_id];
    const std::size_t w = dtype_size(dtype_);
    const std::uint64_t row_bytes = n_cols_ * w;
    const std::uint64_t rows_per_chunk = std::max<std::uint64_t>(1, kStreamChunkBytes / row_bytes);
    std::vector<std::byte> raw;
    std::vector<double> values;
    for (std::uint64_t r = 0; r < s.row_count; r += rows_per_chunk) {
        std::uint64_t n = std::min(rows_per_chunk, s.row_count - r);
        raw.resize(n * row_bytes);
        values.resize(n * n_cols_);
        f.read_at(kHeaderSize + r * row_bytes, raw);
        decode_values(raw, dtype_, values);
        for (std::uint64_t k = 0; k < n; ++k) {
            visitor(s.row_offset + r + k, std::span<const double>(values.data() + k * n_cols_, n_cols_));
        }
    }
}

void BlockMatrix::attach_grid(const CommonGrid& grid) {
    if (grid.size() != n_rows()) throw ValidationError("grid size does not match store row count");
    save_grid_config(dir_ / "grid.cfg", grid);
}

std::optional<CommonGrid> BlockMatrix::grid() const {
    fs::path p = dir_ / "grid.cfg";
    if (!fs::exists(p)) return std::nullopt;
    return load_grid_config(p);
}

}  // namespace snapcluster
