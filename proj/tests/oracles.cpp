#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <tuple>

namespace oracle {

namespace {

void dfs_paths(const tw::Graph& g, int v, int target, double max_on_path,
               std::vector<char>& visited, double& best) {
    if (v == target) {
        best = std::min(best, max_on_path);
        return;
    }
    visited[static_cast<std::size_t>(v)] = 1;
    for (int ai = g.adj_offsets[static_cast<std::size_t>(v)];
         ai < g.adj_offsets[static_cast<std::size_t>(v) + 1]; ++ai) {
        const auto [nbr, ei] = g.adj[static_cast<std::size_t>(ai)];
        if (visited[static_cast<std::size_t>(nbr)]) continue;
        dfs_paths(g, nbr, target,
                  std::max(max_on_path, g.edges[static_cast<std::size_t>(ei)].w), visited, best);
    }
    visited[static_cast<std::size_t>(v)] = 0;
}

}  // namespace

double pass_value_by_paths(const tw::Graph& g, int u, int v) {
    if (u == v) return 0.0;
    double best = std::numeric_limits<double>::max();
    std::vector<char> visited(static_cast<std::size_t>(g.n_vertices), 0);
    dfs_paths(g, u, v, 0.0, visited, best);
    return best;
}

tw::Graph random_connected_graph(tw::Rng& rng, int n, int extra_edges, bool integer_weights) {
    auto draw_weight = [&]() {
        if (integer_weights) return static_cast<double>(1 + rng.below(4));
        return rng.uniform(1e-3, 1.0);
    };
    std::vector<tw::Edge> edges;
    std::vector<std::vector<char>> present(static_cast<std::size_t>(n),
                                           std::vector<char>(static_cast<std::size_t>(n), 0));
    // Spanning tree: attach each vertex to a random earlier one.
    for (int v = 1; v < n; ++v) {
        const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
        edges.push_back({u, v, draw_weight()});
        present[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
        present[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
    }
    const int max_extra = n * (n - 1) / 2 - (n - 1);
    extra_edges = std::min(extra_edges, max_extra);
    int added = 0;
    while (added < extra_edges) {
        const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        const int v = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        if (u == v || present[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
        edges.push_back({u, v, draw_weight()});
        present[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
        present[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] = 1;
        ++added;
    }
    return tw::Graph::build(n, std::move(edges));
}

tw::Graph random_graph(tw::Rng& rng, int n, double edge_prob) {
    std::vector<tw::Edge> edges;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            if (rng.uniform() < edge_prob) edges.push_back({u, v, rng.uniform(1e-3, 1.0)});
        }
    }
    return tw::Graph::build(n, std::move(edges));
}

double complete_graph_mst_weight(const tw::Tensor& points) {
    const int n = static_cast<int>(points.dim(0));
    const std::int64_t d = points.row_size();
    struct Pair {
        double w;
        int u, v;
    };
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
            double sq = 0.0;
            for (std::int64_t k = 0; k < d; ++k) {
                const double diff = points.row(u)[k] - points.row(v)[k];
                sq += diff * diff;
            }
            pairs.push_back({std::sqrt(sq), u, v});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.w, a.u, a.v) < std::tie(b.w, b.u, b.v);
    });
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
    };
    std::vector<double> picked;
    for (const auto& p : pairs) {
        const int ru = find(p.u);
        const int rv = find(p.v);
        if (ru == rv) continue;
        parent[static_cast<std::size_t>(ru)] = rv;
        picked.push_back(p.w);
        if (static_cast<int>(picked.size()) == n - 1) break;
    }
    // Sum ascending so the total is comparable bit-for-bit with any other
    // MST of the same point set (all MSTs share one weight multiset).
    std::sort(picked.begin(), picked.end());
    double total = 0.0;
    for (const double w : picked) total += w;
    return total;
}

double nearest_mean_accuracy(const tw::HsiDataset& ds) {
    std::vector<std::vector<double>> mean(static_cast<std::size_t>(ds.n_classes),
                                          std::vector<double>(static_cast<std::size_t>(ds.bands), 0.0));
    std::vector<std::int64_t> count(static_cast<std::size_t>(ds.n_classes), 0);
    for (std::int64_t p = 0; p < ds.n_pixels(); ++p) {
        const int lab = ds.labels[static_cast<std::size_t>(p)];
        if (lab == 0) continue;
        ++count[static_cast<std::size_t>(lab - 1)];
        for (int b = 0; b < ds.bands; ++b) {
            mean[static_cast<std::size_t>(lab - 1)][static_cast<std::size_t>(b)] +=
                ds.cube[static_cast<std::size_t>(p * ds.bands + b)];
        }
    }
    for (int c = 0; c < ds.n_classes; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) continue;
        for (int b = 0; b < ds.bands; ++b) {
            mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)] /=
                static_cast<double>(count[static_cast<std::size_t>(c)]);
        }
    }
    std::int64_t hit = 0, total = 0;
    for (std::int64_t p = 0; p < ds.n_pixels(); ++p) {
        const int lab = ds.labels[static_cast<std::size_t>(p)];
        if (lab == 0) continue;
        int best = -1;
        double best_sq = std::numeric_limits<double>::max();
        for (int c = 0; c < ds.n_classes; ++c) {
            if (count[static_cast<std::size_t>(c)] == 0) continue;
            double sq = 0.0;
            for (int b = 0; b < ds.bands; ++b) {
                const double diff = ds.cube[static_cast<std::size_t>(p * ds.bands + b)] -
                                    mean[static_cast<std::size_t>(c)][static_cast<std::size_t>(b)];
                sq += diff * diff;
            }
            if (sq < best_sq) {
                best_sq = sq;
                best = c;
            }
        }
        ++total;
        if (best == lab - 1) ++hit;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double ap_by_pr_curve(const tw::Tensor& embeddings, const std::vector<int>& labels, int query) {
    const int n = static_cast<int>(embeddings.dim(0));
    const std::int64_t d = embeddings.row_size();
    int n_rel = 0;
    for (int i = 0; i < n; ++i) {
        if (i != query && labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(query)]) {
            ++n_rel;
        }
    }
    if (n_rel == 0) return -1.0;
    struct Entry {
        double sim;
        int idx;
    };
    std::vector<Entry> ranked;
    ranked.reserve(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        if (i == query) continue;
        double sq = 0.0;
        for (std::int64_t k = 0; k < d; ++k) {
            const double diff = embeddings.row(i)[k] - embeddings.row(query)[k];
            sq += diff * diff;
        }
        ranked.push_back({std::exp(-std::sqrt(sq)), i});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Entry& a, const Entry& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.idx < b.idx;
    });
    // Integrate the precision-recall curve: recall steps by 1/n_rel at each
    // relevant item, contributing that step times the precision there.
    double ap = 0.0;
    int rel_seen = 0;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        if (labels[static_cast<std::size_t>(ranked[r].idx)] !=
            labels[static_cast<std::size_t>(query)]) {
            continue;
        }
        ++rel_seen;
        const double precision = static_cast<double>(rel_seen) / static_cast<double>(r + 1);
        const double recall_step = 1.0 / static_cast<double>(n_rel);
        ap += recall_step * precision;
    }
    return ap;
}

}  // namespace oracle
