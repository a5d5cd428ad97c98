#include "snapcluster/kv_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "snapcluster/error.hpp"

namespace snapcluster {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& source) {
    KeyValues kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": expected key=value");
        }
        std::string key(trim(line.substr(0, eq)));
        std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": empty key");
        }
        if (kv.count(key)) {
            throw ValidationError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        kv.emplace(std::move(key), std::move(value));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_values(ss.str(), path.string());
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
    if (!out) throw IoError("write failed on " + path.string());
}

double parse_double(std::string_view text, const std::string& what) {
    text = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError(what + ": not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::int64_t parse_int(std::string_view text, const std::string& what) {
    text = trim(text);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError(what + ": not an integer: '" + std::string(text) + "'");
    }
    return v;
}

std::uint64_t parse_u64(std::string_view text, const std::string& what) {
    text = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ValidationError(what + ": not an unsigned integer: '" + std::string(text) + "'");
    }
    return v;
}

double get_double(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("missing key '" + key + "'");
    return parse_double(it->second, key);
}

double get_double(const KeyValues& kv, const std::string& key, double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_double(it->second, key);
}

std::int64_t get_int(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("missing key '" + key + "'");
    return parse_int(it->second, key);
}

std::int64_t get_int(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : parse_int(it->second, key);
}

std::string format_double(double v) {
    // Shortest representation that round-trips.
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace snapcluster
