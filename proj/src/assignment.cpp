#include "snapcluster/assignment.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"

namespace snapcluster {

std::vector<std::size_t> ClusterAssignment::cluster_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(nc, 0)), 0);
    for (int l : labels) ++sizes.at(static_cast<std::size_t>(l));
    return sizes;
}

void validate_assignment(const ClusterAssignment& a) {
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        if (a.labels[i] < 0 || a.labels[i] >= a.nc) {
            throw ValidationError("label " + std::to_string(a.labels[i]) + " at column " + std::to_string(i) +
                                  " outside [0, " + std::to_string(a.nc) + ")");
        }
    }
}

ClusterAssignment assignment_from_labels(std::vector<int> labels) {
    ClusterAssignment a;
    a.nc = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    a.labels = std::move(labels);
    validate_assignment(a);
    return a;
}

ClusterAssignment relabel_by_first_appearance(const ClusterAssignment& a) {
    std::map<int, int> mapping;
    ClusterAssignment out;
    out.labels.reserve(a.labels.size());
    for (int l : a.labels) {
        auto [it, inserted] = mapping.emplace(l, static_cast<int>(mapping.size()));
        out.labels.push_back(it->second);
    }
    out.nc = static_cast<int>(mapping.size());
    return out;
}

double pair_counting_agreement(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ValidationError("clusterings differ in length");
    const std::size_t n = a.size();
    if (n < 2) return 1.0;
    std::map<std::pair<int, int>, std::uint64_t> joint;
    std::map<int, std::uint64_t> ca, cb;
    for (std::size_t i = 0; i < n; ++i) {
        ++joint[{a[i], b[i]}];
        ++ca[a[i]];
        ++cb[b[i]];
    }
    auto pairs = [](std::uint64_t k) { return static_cast<long double>(k) * (k - 1) / 2.0L; };
    long double both = 0, in_a = 0, in_b = 0;
    for (const auto& [k, v] : joint) both += pairs(v);
    for (const auto& [k, v] : ca) in_a += pairs(v);
    for (const auto& [k, v] : cb) in_b += pairs(v);
    const long double total = pairs(n);
    // agreements = together in both + apart in both
    const long double agree = both + (total - in_a - in_b + both);
    return static_cast<double>(agree / total);
}

double within_cluster_ss(const Eigen::MatrixXd& data, std::span<const int> labels) {
    if (static_cast<std::size_t>(data.cols()) != labels.size()) throw ValidationError("labels do not match data columns");
    if (labels.empty()) return 0.0;
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(data.rows(), k);
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.col(labels[i]) += data.col(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) sums.col(c) /= counts[static_cast<std::size_t>(c)];
    }
    double w = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) w += (data.col(static_cast<Eigen::Index>(i)) - sums.col(labels[i])).squaredNorm();
    return w;
}

void write_labels_csv(const std::filesystem::path& path, const ClusterAssignment& a, const SnapshotIndex* index) {
    if (index && index->size() != a.size()) {
        throw ValidationError("index has " + std::to_string(index->size()) + " snapshots, assignment has " +
                              std::to_string(a.size()));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "column,sim_key,time_step,label\n";
    for (std::size_t i = 0; i < a.size(); ++i) {
        out << i << ',';
        if (index) {
            out << index->entry(i).sim_key << ',' << index->entry(i).time_step;
        } else {
            out << ",-1";
        }
        out << ',' << a.labels[i] << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

ClusterAssignment read_labels_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const auto col = t.column("column");
    const auto lab = t.column("label");
    std::vector<int> labels(t.rows.size(), -1);
    for (const auto& row : t.rows) {
        auto c = parse_u64(row[col], path.string());
        if (c >= labels.size() || labels[c] != -1) throw FormatError(path.string() + ": columns must be 0..N-1 without repeats");
        labels[c] = static_cast<int>(parse_int(row[lab], path.string()));
        if (labels[c] < 0) throw FormatError(path.string() + ": negative label");
    }
    return assignment_from_labels(std::move(labels));
}

void write_runs_csv(const std::filesystem::path& path, std::span<const ClusterAssignment> runs) {
    if (runs.empty()) throw ValidationError("no runs to write");
    const std::size_t n = runs.front().size();
    for (const auto& r : runs) {
        if (r.size() != n) throw ValidationError("runs differ in length");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "column";
    for (std::size_t r = 0; r < runs.size(); ++r) out << ",run" << r;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (const auto& r : runs) out << ',' << r.labels[i];
        out << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

std::vector<ClusterAssignment> read_runs_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    if (t.header.size() < 2 || t.header[0] != "column") throw FormatError(path.string() + ": expected column,run0,...");
    const std::size_t reps = t.header.size() - 1;
    std::vector<std::vector<int>> labels(reps, std::vector<int>(t.rows.size(), -1));
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& row = t.rows[k];
        if (parse_u64(row[0], path.string()) != k) throw FormatError(path.string() + ": columns must be 0..N-1 in order");
        for (std::size_t r = 0; r < reps; ++r) {
            labels[r][k] = static_cast<int>(parse_int(row[r + 1], path.string()));
            if (labels[r][k] < 0) throw FormatError(path.string() + ": negative label");
        }
    }
    std::vector<ClusterAssignment> runs;
    for (auto& l : labels) runs.push_back(assignment_from_labels(std::move(l)));
    return runs;
}

}  // namespace snapcluster
