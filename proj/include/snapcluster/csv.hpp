#pragma once
// Minimal CSV handling: unquoted comma-separated fields, one header line.
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace snapcluster {

std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column; throws FormatError when absent.
    std::size_t column(const std::string& name) const;
};

// Reads a CSV file whose first line is a header. Every row must have as many
// fields as the header.
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace snapcluster
