#include "snapcluster/consensus.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/csv.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"

namespace snapcluster {

namespace {

constexpr char kConsensusMagic[8] = {'C', 'O', 'N', 'S', '2', 0, 0, 0};
constexpr double kCompareSlack = 1e-9;

}  // namespace

ConsensusMatrix build_consensus(std::span<const ClusterAssignment> runs) {
    if (runs.empty()) throw ValidationError("consensus needs at least one clustering");
    const std::size_t n = runs.front().size();
    for (const auto& r : runs) {
        if (r.size() != n) throw ValidationError("clusterings differ in length");
    }
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                if (r.labels[i] == r.labels[j]) counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
            }
        }
    }
    ConsensusMatrix c;
    c.repetitions = static_cast<int>(runs.size());
    c.nc = runs.front().nc;
    c.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double reps = static_cast<double>(runs.size());
    for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
        for (Eigen::Index j = i; j < c.values.cols(); ++j) {
            double v = counts(i, j) / reps;
            c.values(i, j) = v;
            c.values(j, i) = v;
        }
    }
    return c;
}

double ConsensusHistogram::intermediate_percent() const {
    double p = 0.0;
    for (std::size_t b = 1; b < 10; ++b) {
        if (b != 5) p += percent[b];
    }
    return p;
}

ConsensusHistogram histogram(const ConsensusMatrix& c) {
    ConsensusHistogram h;
    const auto n = c.values.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            auto bin = static_cast<long>(std::lround(c.values(i, j) * 10.0));
            bin = std::clamp(bin, 0L, 10L);
            ++h.counts[static_cast<std::size_t>(bin)];
            ++h.total;
        }
    }
    if (h.total > 0) {
        for (std::size_t b = 0; b < 11; ++b) h.percent[b] = 100.0 * static_cast<double>(h.counts[b]) / static_cast<double>(h.total);
    }
    return h;
}

bool is_stable(const ConsensusHistogram& h, double max_intermediate_percent) {
    return h.intermediate_percent() <= max_intermediate_percent;
}

ClusterAssignment extract_clusters(const ConsensusMatrix& c, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("threshold must lie in (0, 1]");
    const std::size_t n = c.size();
    ClusterAssignment a;
    a.labels.assign(n, -1);
    int next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (a.labels[start] != -1) continue;
        a.labels[start] = next;
        stack.push_back(start);
        while (!stack.empty()) {
            std::size_t i = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < n; ++j) {
                if (a.labels[j] == -1 && j != i && c(i, j) >= threshold - kCompareSlack) {
                    a.labels[j] = next;
                    stack.push_back(j);
                }
            }
        }
        ++next;
    }
    a.nc = next;
    return a;
}

ReorderedMatrix reorder_by_cluster(const ConsensusMatrix& c, const ClusterAssignment& a) {
    if (a.size() != c.size()) throw ValidationError("assignment does not cover the consensus matrix");
    ReorderedMatrix r;
    r.permutation.resize(a.size());
    std::iota(r.permutation.begin(), r.permutation.end(), std::size_t{0});
    std::stable_sort(r.permutation.begin(), r.permutation.end(),
                     [&](std::size_t x, std::size_t y) { return a.labels[x] < a.labels[y]; });
    const auto n = static_cast<Eigen::Index>(a.size());
    r.values.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            r.values(i, j) = c(r.permutation[static_cast<std::size_t>(i)], r.permutation[static_cast<std::size_t>(j)]);
        }
    }
    return r;
}

MergeResult merge_small_clusters(const ConsensusMatrix& c, const ClusterAssignment& a, std::size_t min_size,
                                 double strong_threshold) {
    if (min_size < 1) throw ValidationError("min_size must be >= 1");
    if (!(strong_threshold > 0.0 && strong_threshold <= 1.0)) throw ValidationError("strong_threshold must lie in (0, 1]");
    if (a.size() != c.size()) throw ValidationError("assignment does not cover the consensus matrix");
    validate_assignment(a);

    std::vector<int> labels = a.labels;
    MergeResult result;
    auto members = [&](int label) {
        std::vector<std::size_t> m;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == label) m.push_back(i);
        }
        return m;
    };
    for (int label = 0; label < a.nc; ++label) {
        auto small = members(label);
        if (small.empty() || small.size() >= min_size) continue;
        MergeDecision d;
        d.label = label;
        d.size = small.size();
        std::map<int, std::pair<double, std::size_t>> links;  // target -> (sum, pairs)
        for (std::size_t i : small) {
            for (std::size_t j = 0; j < labels.size(); ++j) {
                if (labels[j] == label) continue;
                auto& l = links[labels[j]];
                l.first += c(i, j);
                ++l.second;
            }
        }
        for (const auto& [target, l] : links) {
            double mean = l.first / static_cast<double>(l.second);
            if (d.best_target < 0 || mean > d.best_mean) {
                d.best_target = target;
                d.best_mean = mean;
            }
        }
        if (d.best_target < 0) {
            d.reason = "no other cluster";
        } else if (std::abs(d.best_mean - 0.5) <= kCompareSlack) {
            d.reason = "ambiguous: mean consensus 0.5";
        } else if (d.best_mean + kCompareSlack < strong_threshold) {
            d.reason = "weakly connected";
        } else {
            d.merged = true;
            d.reason = "strongly connected";
            for (std::size_t i : small) labels[i] = d.best_target;
        }
        result.decisions.push_back(d);
    }
    ClusterAssignment merged;
    merged.labels = std::move(labels);
    merged.nc = a.nc;
    result.assignment = relabel_by_first_appearance(merged);
    return result;
}

OverrideResult override_labels(const ClusterAssignment& a, std::span<const LabelMove> moves) {
    validate_assignment(a);
    std::set<std::size_t> seen;
    for (const auto& m : moves) {
        if (!seen.insert(m.column).second) throw ValidationError("duplicate column " + std::to_string(m.column) + " in moves");
        if (m.column >= a.size()) throw ValidationError("column " + std::to_string(m.column) + " out of range");
        if (m.new_label < 0 || m.new_label >= a.nc) {
            throw ValidationError("new label " + std::to_string(m.new_label) + " outside [0, " + std::to_string(a.nc) + ")");
        }
    }
    OverrideResult r;
    r.assignment.labels = a.labels;
    r.assignment.nc = a.nc;
    for (const auto& m : moves) {
        r.audit.push_back({m.column, a.labels[m.column], m.new_label});
        r.assignment.labels[m.column] = m.new_label;
    }
    return r;
}

std::vector<LabelMove> read_moves_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    const auto col = t.column("column");
    const auto lab = t.column("new_label");
    std::vector<LabelMove> moves;
    for (const auto& row : t.rows) {
        moves.push_back({static_cast<std::size_t>(parse_u64(row[col], path.string())),
                         static_cast<int>(parse_int(row[lab], path.string()))});
    }
    return moves;
}

void write_audit_csv(const std::filesystem::path& path, std::span<const OverrideRecord> audit) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "column,old_label,new_label\n";
    for (const auto& r : audit) out << r.column << ',' << r.old_label << ',' << r.new_label << '\n';
    if (!out) throw IoError("write failed on " + path.string());
}

void save_consensus(const std::filesystem::path& path, const ConsensusMatrix& c) {
    File f(path, File::Mode::create);
    std::vector<std::byte> buf(24 + static_cast<std::size_t>(c.values.size()) * sizeof(double));
    std::memcpy(buf.data(), kConsensusMagic, 8);
    std::uint64_t n = c.size();
    auto reps = static_cast<std::uint32_t>(c.repetitions);
    auto nc = static_cast<std::uint32_t>(c.nc);
    std::memcpy(buf.data() + 8, &n, 8);
    std::memcpy(buf.data() + 16, &reps, 4);
    std::memcpy(buf.data() + 20, &nc, 4);
    std::memcpy(buf.data() + 24, c.values.data(), static_cast<std::size_t>(c.values.size()) * sizeof(double));
    f.write_at(0, buf);
}

ConsensusMatrix load_consensus(const std::filesystem::path& path) {
    File f(path, File::Mode::read);
    if (f.size() < 24) throw FormatError(path.string() + ": file shorter than consensus header");
    std::array<std::byte, 24> head{};
    f.read_at(0, head);
    if (std::memcmp(head.data(), kConsensusMagic, 8) != 0) throw FormatError(path.string() + ": bad magic (expected CONS2)");
    std::uint64_t n;
    std::uint32_t reps, nc;
    std::memcpy(&n, head.data() + 8, 8);
    std::memcpy(&reps, head.data() + 16, 4);
    std::memcpy(&nc, head.data() + 20, 4);
    if (f.size() != 24 + n * n * sizeof(double)) throw FormatError(path.string() + ": size does not match N");
    ConsensusMatrix c;
    c.repetitions = static_cast<int>(reps);
    c.nc = static_cast<int>(nc);
    c.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    f.read_at(24, std::as_writable_bytes(std::span<double>(c.values.data(), static_cast<std::size_t>(n * n))));
    return c;
}

void write_consensus_csv(const std::filesystem::path& path, const Eigen::MatrixXd& values) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            if (j) out << ',';
            out << format_double(values(i, j));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

void write_histogram_csv(const std::filesystem::path& path, const ConsensusHistogram& h) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "value,pct\n";
    char line[64];
    for (std::size_t b = 0; b < 11; ++b) {
        std::snprintf(line, sizeof(line), "%.1f,%.2f\n", ConsensusHistogram::bin_value(b), h.percent[b]);
        out << line;
    }
    if (!out) throw IoError("write failed on " + path.string());
}

void write_merge_report_csv(const std::filesystem::path& path, std::span<const MergeDecision> decisions) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "label,size,best_target,best_mean,merged,reason\n";
    for (const auto& d : decisions) {
        out << d.label << ',' << d.size << ',' << d.best_target << ',' << format_double(d.best_mean) << ','
            << (d.merged ? 1 : 0) << ',' << d.reason << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace snapcluster
