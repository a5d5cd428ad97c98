#pragma once
// Consolidation of per-subdomain output into one file per time step.
//
// Raw layout:      <root>/<sim_key>/t<step>/sub<id>.csv | .bin
// Consolidated:    <out>/<sim_key>/t<step>.cons + t<step>.summary.csv
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace snapcluster {

// Scattered points with n_vars values each (row-major values).
struct PointTable {
    std::size_t n_vars = 0;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> values;

    std::size_t size() const { return x.size(); }
    double value(std::size_t point, std::size_t var) const { return values[point * n_vars + var]; }
    void push_back(double px, double py, const double* vals);
    void append(const PointTable& other, std::size_t first, std::size_t count);
};

struct SubdomainFile {
    std::string sim_key;
    std::int64_t time_step = 0;
    std::uint32_t subdomain_id = 0;
    PointTable points;
};

struct SubdomainExtent {
    std::uint32_t subdomain_id = 0;
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;
    std::uint64_t start_row = 0;
    std::uint64_t n_points = 0;
};

struct TimestepSummary {
    std::vector<SubdomainExtent> subdomains;

    std::uint64_t total_points() const;
    // Largest x over all non-empty subdomains.
    double x_max() const;
};

struct ConsolidatedTimestep {
    std::string sim_key;
    std::int64_t time_step = 0;
    PointTable points;
    TimestepSummary summary;
};

// Summary for a table already laid out as consecutive subdomain runs.
TimestepSummary summarize(const PointTable& points, const std::vector<std::uint64_t>& run_lengths);

// Concatenates subdomains in id order. Files may be passed in any order; ids
// must be exactly 0..n_sub-1 and all files must share sim_key, time_step and
// n_vars.
ConsolidatedTimestep consolidate_timestep(std::vector<SubdomainFile> files);

// Subdomains whose bounding box intersects [x_lo,x_hi] x [y_lo,y_hi]
// (closed intervals). Empty subdomains never match.
std::vector<std::uint32_t> query_subdomains_in_range(const TimestepSummary& summary, double x_lo, double x_hi,
                                                     double y_lo, double y_hi);

// --- file formats ----------------------------------------------------------

std::filesystem::path subdomain_path(const std::filesystem::path& root, const std::string& sim_key,
                                     std::int64_t time_step, std::uint32_t subdomain_id, const std::string& ext);

void write_subdomain_csv(const std::filesystem::path& path, const PointTable& points);
void write_subdomain_bin(const std::filesystem::path& path, const SubdomainFile& file);
// Format chosen by extension (.csv or .bin).
SubdomainFile read_subdomain_file(const std::filesystem::path& path, const std::string& sim_key,
                                  std::int64_t time_step, std::uint32_t subdomain_id);

void write_consolidated(const std::filesystem::path& dir, const ConsolidatedTimestep& ts);
ConsolidatedTimestep read_consolidated(const std::filesystem::path& dir, const std::string& sim_key,
                                       std::int64_t time_step);
void write_summary_csv(const std::filesystem::path& path, const TimestepSummary& summary);
TimestepSummary read_summary_csv(const std::filesystem::path& path);

// Sorted time steps present under <root>/<sim_key> (t<step> directories for
// raw data, t<step>.cons files for consolidated data).
std::vector<std::int64_t> list_raw_timesteps(const std::filesystem::path& root, const std::string& sim_key);
std::vector<std::int64_t> list_consolidated_timesteps(const std::filesystem::path& dir);

// Consolidates every time step of one simulation; time steps run in parallel.
void ingest_simulation(const std::filesystem::path& raw_root, const std::string& sim_key,
                       const std::filesystem::path& out_root, int jobs = 1);

}  // namespace snapcluster
