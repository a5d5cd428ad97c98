#pragma once
// Flat key=value text files ('#' starts a comment, blank lines ignored).
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace snapcluster {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

double parse_double(std::string_view text, const std::string& what);
std::int64_t parse_int(std::string_view text, const std::string& what);
std::uint64_t parse_u64(std::string_view text, const std::string& what);

// Lookup helpers; throw ValidationError when a required key is missing or
// malformed.
double get_double(const KeyValues& kv, const std::string& key);
double get_double(const KeyValues& kv, const std::string& key, double fallback);
std::int64_t get_int(const KeyValues& kv, const std::string& key);
std::int64_t get_int(const KeyValues& kv, const std::string& key, std::int64_t fallback);

std::string format_double(double v);

}  // namespace snapcluster
