#pragma once
// Shared 64-byte header used by every binary array file in the toolkit
// (SNPB, SUBD, CONS, RMAP, PROJ, DIST, WGTS).
//
// Layout (little-endian, packed):
//   [0..4)   magic (4 ASCII chars)
//   [4..8)   u32 version
//   [8]      u8  dtype code (4 = f32, 8 = f64)
//   [9..13)  u32 id            (block id / subdomain id / ...)
//   [13..21) u64 rows
//   [21..29) u64 cols
//   [29..37) u64 offset        (row offset / time step / seed)
//   [37..45) f64 lo
//   [45..53) f64 hi
//   [53..57) u32 aux0
//   [57..61) u32 aux1
//   [61..64) zero padding
//
// The payload that follows is rows x cols values of the stated dtype.
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snapcluster {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

enum class Dtype : std::uint8_t { f32 = 4, f64 = 8 };

inline std::size_t dtype_size(Dtype t) { return static_cast<std::size_t>(t); }
std::string_view dtype_name(Dtype t);
Dtype parse_dtype(std::string_view name);

inline constexpr std::size_t kHeaderSize = 64;
inline constexpr std::uint32_t kFormatVersion = 1;

struct FileHeader {
    std::array<char, 4> magic{};
    std::uint32_t version = kFormatVersion;
    Dtype dtype = Dtype::f64;
    std::uint32_t id = 0;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::uint64_t offset = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::uint32_t aux0 = 0;
    std::uint32_t aux1 = 0;

    std::uint64_t payload_bytes() const { return rows * cols * dtype_size(dtype); }
};

std::array<std::byte, kHeaderSize> encode_header(const FileHeader& h);

// Throws FormatError when the magic does not match `expected_magic`, the
// version is unknown or the dtype code is invalid. `what` names the file in
// messages.
FileHeader decode_header(std::span<const std::byte, kHeaderSize> raw,
                         std::string_view expected_magic, const std::string& what);

// RAII file descriptor with positional I/O.
class File {
public:
    enum class Mode { read, read_write, create };

    File() = default;
    File(const std::filesystem::path& path, Mode mode);
    ~File();
    File(File&& other) noexcept;
    File& operator=(File&& other) noexcept;
    File(const File&) = delete;
    File& operator=(const File&) = delete;

    void read_at(std::uint64_t offset, std::span<std::byte> out) const;
    void write_at(std::uint64_t offset, std::span<const std::byte> data);
    std::uint64_t size() const;
    void resize(std::uint64_t bytes);
    const std::filesystem::path& path() const { return path_; }

private:
    int fd_ = -1;
    std::filesystem::path path_;
};

// Header + payload helpers for files that are read or written whole.
FileHeader read_header(const File& f, std::string_view expected_magic);
void write_array_file(const std::filesystem::path& path, const FileHeader& h,
                      std::span<const double> values);
// Reads the payload as doubles (converting from f32 if needed). Verifies the
// file size matches the header.
std::vector<double> read_array_payload(const File& f, const FileHeader& h);

// Conversion between a double buffer and dtype-encoded bytes.
void encode_values(std::span<const double> values, Dtype t, std::span<std::byte> out);
void decode_values(std::span<const std::byte> raw, Dtype t, std::span<double> out);

}  // namespace snapcluster
