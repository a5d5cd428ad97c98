#include "snapcluster/binary_format.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "snapcluster/error.hpp"

namespace snapcluster {

namespace {

template <typename T>
void put(std::array<std::byte, kHeaderSize>& buf, std::size_t at, T v) {
    std::memcpy(buf.data() + at, &v, sizeof(T));
}

template <typename T>
T get(std::span<const std::byte, kHeaderSize> buf, std::size_t at) {
    T v;
    std::memcpy(&v, buf.data() + at, sizeof(T));
    return v;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::string_view dtype_name(Dtype t) { return t == Dtype::f32 ? "f32" : "f64"; }

Dtype parse_dtype(std::string_view name) {
    if (name == "f32") return Dtype::f32;
    if (name == "f64") return Dtype::f64;
    throw ValidationError("unknown dtype '" + std::string(name) + "' (expected f32 or f64)");
}

std::array<std::byte, kHeaderSize> encode_header(const FileHeader& h) {
    std::array<std::byte, kHeaderSize> buf{};
    std::memcpy(buf.data(), h.magic.data(), 4);
    put(buf, 4, h.version);
    put(buf, 8, static_cast<std::uint8_t>(h.dtype));
    put(buf, 9, h.id);
    put(buf, 13, h.rows);
    put(buf, 21, h.cols);
    put(buf, 29, h.offset);
    put(buf, 37, h.lo);
    put(buf, 45, h.hi);
    put(buf, 53, h.aux0);
    put(buf, 57, h.aux1);
    return buf;
}

FileHeader decode_header(std::span<const std::byte, kHeaderSize> raw,
                         std::string_view expected_magic, const std::string& what) {
    FileHeader h;
    std::memcpy(h.magic.data(), raw.data(), 4);
    if (std::string_view(h.magic.data(), 4) != expected_magic) {
        throw FormatError(what + ": bad magic (expected " + std::string(expected_magic) + ")");
    }
    h.version = get<std::uint32_t>(raw, 4);
    if (h.version != kFormatVersion) {
        throw FormatError(what + ": unsupported format version " + std::to_string(h.version));
    }
    auto code = get<std::uint8_t>(raw, 8);
    if (code != 4 && code != 8) {
        throw FormatError(what + ": invalid dtype code " + std::to_string(code));
    }
    h.dtype = static_cast<Dtype>(code);
    h.id = get<std::uint32_t>(raw, 9);
    h.rows = get<std::uint64_t>(raw, 13);
    h.cols = get<std::uint64_t>(raw, 21);
    h.offset = get<std::uint64_t>(raw, 29);
    h.lo = get<double>(raw, 37);
    h.hi = get<double>(raw, 45);
    h.aux0 = get<std::uint32_t>(raw, 53);
    h.aux1 = get<std::uint32_t>(raw, 57);
    return h;
}

File::File(const std::filesystem::path& path, Mode mode) : path_(path) {
    int flags = O_RDONLY;
    if (mode == Mode::read_write) flags = O_RDWR;
    if (mode == Mode::create) flags = O_RDWR | O_CREAT | O_TRUNC;
    fd_ = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open " + path.string() + ": " + errno_text());
}

File::~File() {
    if (fd_ >= 0) ::close(fd_);
}

File::File(File&& other) noexcept : fd_(other.fd_), path_(std::move(other.path_)) {
    other.fd_ = -1;
}

File& File::operator=(File&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        path_ = std::move(other.path_);
        other.fd_ = -1;
    }
    return *this;
}

void File::read_at(std::uint64_t offset, std::span<std::byte> out) const {
    std::size_t done = 0;
    while (done < out.size()) {
        ssize_t n = ::pread(fd_, out.data() + done, out.size() - done,
                            static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("read failed on " + path_.string() + ": " + errno_text());
        }
        if (n == 0) throw FormatError(path_.string() + ": unexpected end of file");
        done += static_cast<std::size_t>(n);
    }
}

void File::write_at(std::uint64_t offset, std::span<const std::byte> data) {
    std::size_t done = 0;
    while (done < data.size()) {
        ssize_t n = ::pwrite(fd_, data.data() + done, data.size() - done,
                             static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write failed on " + path_.string() + ": " + errno_text());
        }
        done += static_cast<std::size_t>(n);
    }
}

std::uint64_t File::size() const {
    struct stat st{};
    if (::fstat(fd_, &st) != 0) throw IoError("stat failed on " + path_.string());
    return static_cast<std::uint64_t>(st.st_size);
}

void File::resize(std::uint64_t bytes) {
    if (::ftruncate(fd_, static_cast<off_t>(bytes)) != 0) {
        throw IoError("cannot size " + path_.string() + ": " + errno_text());
    }
}

FileHeader read_header(const File& f, std::string_view expected_magic) {
    if (f.size() < kHeaderSize) {
        throw FormatError(f.path().string() + ": file shorter than header");
    }
    std::array<std::byte, kHeaderSize> raw{};
    f.read_at(0, raw);
    return decode_header(raw, expected_magic, f.path().string());
}

void encode_values(std::span<const double> values, Dtype t, std::span<std::byte> out) {
    if (t == Dtype::f64) {
        std::memcpy(out.data(), values.data(), values.size() * sizeof(double));
        return;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        float v = static_cast<float>(values[i]);
        std::memcpy(out.data() + i * sizeof(float), &v, sizeof(float));
    }
}

void decode_values(std::span<const std::byte> raw, Dtype t, std::span<double> out) {
    if (t == Dtype::f64) {
        std::memcpy(out.data(), raw.data(), out.size() * sizeof(double));
        return;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        float v;
        std::memcpy(&v, raw.data() + i * sizeof(float), sizeof(float));
        out[i] = v;
    }
}

void write_array_file(const std::filesystem::path& path, const FileHeader& h,
                      std::span<const double> values) {
    if (values.size() != h.rows * h.cols) {
        throw ValidationError("payload size does not match header for " + path.string());
    }
    File f(path, File::Mode::create);
    f.write_at(0, encode_header(h));
    std::vector<std::byte> buf(h.payload_bytes());
    encode_values(values, h.dtype, buf);
    f.write_at(kHeaderSize, buf);
}

std::vector<double> read_array_payload(const File& f, const FileHeader& h) {
    std::uint64_t expect = kHeaderSize + h.payload_bytes();
    if (f.size() != expect) {
        throw FormatError(f.path().string() + ": size " + std::to_string(f.size()) +
                          " does not match header (expected " + std::to_string(expect) + ")");
    }
    std::vector<std::byte> raw(h.payload_bytes());
    f.read_at(kHeaderSize, raw);
    std::vector<double> out(h.rows * h.cols);
    decode_values(raw, h.dtype, out);
    return out;
}

}  // namespace snapcluster
