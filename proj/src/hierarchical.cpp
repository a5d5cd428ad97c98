#include "snapcluster/hierarchical.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "snapcluster/binary_format.hpp"
#include "snapcluster/error.hpp"
#include "snapcluster/kv_file.hpp"
#include "snapcluster/parallel.hpp"

namespace snapcluster {

namespace {

constexpr std::string_view kDistMagic = "DIST";

using Index = Eigen::Index;

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

// Leaves reachable from each node, tracked through the merge sequence.
ClusterAssignment apply_merges(const Dendrogram& dg, std::size_t count) {
    const std::size_t n = dg.n_leaves;
    UnionFind uf(n);
    std::vector<std::size_t> rep(n + dg.merges.size());  // node -> a leaf inside it
    std::iota(rep.begin(), rep.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    for (std::size_t s = 0; s < dg.merges.size(); ++s) {
        rep[n + s] = rep[static_cast<std::size_t>(dg.merges[s].left)];
    }
    for (std::size_t s = 0; s < count; ++s) {
        uf.unite(rep[static_cast<std::size_t>(dg.merges[s].left)], rep[static_cast<std::size_t>(dg.merges[s].right)]);
    }
    std::vector<int> roots(n);
    for (std::size_t i = 0; i < n; ++i) roots[i] = static_cast<int>(uf.find(i));
    ClusterAssignment raw;
    raw.labels = std::move(roots);
    return relabel_by_first_appearance(raw);
}

}  // namespace

void validate_distance_matrix(const DistanceMatrix& d) {
    const auto& v = d.values;
    if (v.rows() != v.cols()) throw ValidationError("distance matrix must be square");
    if (!v.allFinite()) throw ValidationError("distance matrix has non-finite entries");
    for (Index i = 0; i < v.rows(); ++i) {
        if (v(i, i) != 0.0) throw ValidationError("distance matrix diagonal must be zero");
        for (Index j = i + 1; j < v.cols(); ++j) {
            if (v(i, j) < 0.0) throw ValidationError("negative distance");
            if (v(i, j) != v(j, i)) throw ValidationError("distance matrix is not symmetric");
        }
    }
}

DistanceMatrix pairwise_distances(const BlockMatrix& m, int jobs) {
    const std::size_t n = m.n_cols();
    const std::size_t tri = n * (n - 1) / 2;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_jobs(jobs)), m.block_count());
    std::vector<double> total(tri, 0.0);
    std::vector<std::vector<double>> partial(workers);
    for (std::size_t wave = 0; wave < m.block_count(); wave += workers) {
        const std::size_t count = std::min(workers, m.block_count() - wave);
        parallel_for(count, static_cast<int>(count), [&](std::size_t k) {
            auto& acc = partial[k];
            acc.assign(tri, 0.0);
            m.stream_block_rows(static_cast<std::uint32_t>(wave + k), [&](std::uint64_t, std::span<const double> row) {
                std::size_t p = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double xi = row[i];
                    for (std::size_t j = i + 1; j < n; ++j, ++p) {
                        const double diff = xi - row[j];
                        acc[p] += diff * diff;
                    }
                }
            });
        });
        for (std::size_t k = 0; k < count; ++k) {
            for (std::size_t p = 0; p < tri; ++p) total[p] += partial[k][p];
        }
    }
    DistanceMatrix d;
    d.values = Eigen::MatrixXd::Zero(static_cast<Index>(n), static_cast<Index>(n));
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++p) {
            double v = std::sqrt(total[p]);
            d.values(static_cast<Index>(i), static_cast<Index>(j)) = v;
            d.values(static_cast<Index>(j), static_cast<Index>(i)) = v;
        }
    }
    return d;
}

DistanceMatrix pairwise_distances(const Eigen::MatrixXd& columns) {
    const Index n = columns.cols();
    DistanceMatrix d;
    d.values = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            double v = (columns.col(i) - columns.col(j)).norm();
            d.values(i, j) = v;
            d.values(j, i) = v;
        }
    }
    return d;
}

Linkage parse_linkage(const std::string& name) {
    if (name == "single") return Linkage::single;
    if (name == "complete") return Linkage::complete;
    if (name == "average") return Linkage::average;
    if (name == "ward") return Linkage::ward;
    throw ValidationError("unknown linkage '" + name + "' (expected single, complete, average or ward)");
}

std::string linkage_name(Linkage l) {
    switch (l) {
        case Linkage::single: return "single";
        case Linkage::complete: return "complete";
        case Linkage::average: return "average";
        case Linkage::ward: return "ward";
    }
    return "ward";
}

Dendrogram build_dendrogram(const DistanceMatrix& dm, Linkage linkage) {
    validate_distance_matrix(dm);
    const Index n = dm.values.rows();
    Dendrogram dg;
    dg.n_leaves = static_cast<std::size_t>(n);
    if (n < 2) return dg;

    // Working dissimilarities. Ward works on half squared distances, which
    // equal the ESS increase of merging two singletons.
    Eigen::MatrixXd D = dm.values;
    if (linkage == Linkage::ward) D = 0.5 * dm.values.cwiseProduct(dm.values);

    std::vector<int> node(static_cast<std::size_t>(n));
    std::iota(node.begin(), node.end(), 0);
    std::vector<double> size(static_cast<std::size_t>(n), 1.0);
    std::vector<bool> active(static_cast<std::size_t>(n), true);

    for (Index step = 0; step < n - 1; ++step) {
        Index best_a = -1, best_b = -1;
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> best_nodes{0, 0};
        for (Index a = 0; a < n; ++a) {
            if (!active[static_cast<std::size_t>(a)]) continue;
            for (Index b = a + 1; b < n; ++b) {
                if (!active[static_cast<std::size_t>(b)]) continue;
                const double v = D(a, b);
                const int na = node[static_cast<std::size_t>(a)], nb = node[static_cast<std::size_t>(b)];
                std::pair<int, int> nodes{std::min(na, nb), std::max(na, nb)};
                if (best_a < 0 || v < best || (v == best && nodes < best_nodes)) {
                    best = v;
                    best_a = a;
                    best_b = b;
                    best_nodes = nodes;
                }
            }
        }
        const double na = size[static_cast<std::size_t>(best_a)];
        const double nb = size[static_cast<std::size_t>(best_b)];
        const double dab = D(best_a, best_b);
        for (Index k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == best_a || k == best_b) continue;
            const double dak = D(best_a, k), dbk = D(best_b, k);
            const double nk = size[static_cast<std::size_t>(k)];
            double v = 0.0;
            switch (linkage) {
                case Linkage::single: v = std::min(dak, dbk); break;
                case Linkage::complete: v = std::max(dak, dbk); break;
                case Linkage::average: v = (na * dak + nb * dbk) / (na + nb); break;
                case Linkage::ward: v = ((na + nk) * dak + (nb + nk) * dbk - nk * dab) / (na + nb + nk); break;
            }
            D(best_a, k) = v;
            D(k, best_a) = v;
        }
        Merge m;
        m.left = best_nodes.first;
        m.right = best_nodes.second;
        m.dissimilarity = best;
        m.size = static_cast<std::size_t>(na + nb);
        if (!dg.merges.empty() && best < dg.merges.back().dissimilarity) dg.monotonic = false;
        dg.merges.push_back(m);
        node[static_cast<std::size_t>(best_a)] = static_cast<int>(n + step);
        size[static_cast<std::size_t>(best_a)] = na + nb;
        active[static_cast<std::size_t>(best_b)] = false;
    }
    return dg;
}

ClusterAssignment cut_by_count(const Dendrogram& dg, int nc) {
    if (nc < 1 || static_cast<std::size_t>(nc) > dg.n_leaves) {
        throw ValidationError("nc must lie in 1.." + std::to_string(dg.n_leaves));
    }
    return apply_merges(dg, dg.n_leaves - static_cast<std::size_t>(nc));
}

ClusterAssignment cut_by_threshold(const Dendrogram& dg, double threshold) {
    std::size_t count = 0;
    while (count < dg.merges.size() && dg.merges[count].dissimilarity <= threshold) ++count;
    return apply_merges(dg, count);
}

HClusterResult hcluster(const DistanceMatrix& d, Linkage linkage, int nc) {
    if (nc < 1 || static_cast<std::size_t>(nc) > d.size()) {
        throw ValidationError("nc must lie in 1.." + std::to_string(d.size()));
    }
    HClusterResult r;
    r.dendrogram = build_dendrogram(d, linkage);
    r.assignment = cut_by_count(r.dendrogram, nc);
    return r;
}

void save_distance_matrix(const std::filesystem::path& path, const DistanceMatrix& d) {
    const std::size_t n = d.size();
    FileHeader h;
    h.magic = {'D', 'I', 'S', 'T'};
    h.rows = n;
    h.cols = n;
    h.aux0 = 0;
    std::vector<double> tri;
    tri.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) tri.push_back(d.values(static_cast<Index>(i), static_cast<Index>(j)));
    }
    File f(path, File::Mode::create);
    f.write_at(0, encode_header(h));
    f.write_at(kHeaderSize, std::as_bytes(std::span<const double>(tri)));
}

DistanceMatrix load_distance_matrix(const std::filesystem::path& path) {
    File f(path, File::Mode::read);
    FileHeader h = read_header(f, kDistMagic);
    if (h.rows != h.cols) throw FormatError(path.string() + ": distance matrix must be square");
    if (h.aux0 != 0) throw FormatError(path.string() + ": unsupported metric code");
    const std::size_t n = h.rows;
    const std::size_t tri = n * (n - 1) / 2;
    if (f.size() != kHeaderSize + tri * sizeof(double)) throw FormatError(path.string() + ": size does not match N");
    std::vector<double> vals(tri);
    f.read_at(kHeaderSize, std::as_writable_bytes(std::span<double>(vals)));
    DistanceMatrix d;
    d.values = Eigen::MatrixXd::Zero(static_cast<Index>(n), static_cast<Index>(n));
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++p) {
            d.values(static_cast<Index>(i), static_cast<Index>(j)) = vals[p];
            d.values(static_cast<Index>(j), static_cast<Index>(i)) = vals[p];
        }
    }
    return d;
}

void write_dendrogram_csv(const std::filesystem::path& path, const Dendrogram& dg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,left,right,dissimilarity,size\n";
    for (std::size_t s = 0; s < dg.merges.size(); ++s) {
        const auto& m = dg.merges[s];
        out << s << ',' << m.left << ',' << m.right << ',' << format_double(m.dissimilarity) << ',' << m.size << '\n';
    }
    if (!out) throw IoError("write failed on " + path.string());
}

}  // namespace snapcluster
