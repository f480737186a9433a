#include "tw/graph.hpp"

#include <algorithm>
#include <cmath>

#include "tw/util.hpp"

namespace tw {

Graph Graph::build(int n_vertices, std::vector<Edge> edges) {
    require(n_vertices >= 0, "Graph: negative vertex count");
    Graph g;
    g.n_vertices = n_vertices;
    for (Edge& e : edges) {
        require(e.u >= 0 && e.u < n_vertices && e.v >= 0 && e.v < n_vertices,
                "Graph: edge (", e.u, ",", e.v, ") out of range for ", n_vertices, " vertices");
        require(e.u != e.v, "Graph: self-loop at vertex ", e.u);
        require(std::isfinite(e.w) && e.w > 0.0, "Graph: edge (", e.u, ",", e.v,
                ") has non-positive weight ", e.w);
        if (e.u > e.v) std::swap(e.u, e.v);
    }
    g.edges = std::move(edges);

    // Duplicate check on the canonical (u,v) ordering.
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(g.edges.size());
    for (const Edge& e : g.edges) pairs.emplace_back(e.u, e.v);
    std::vector<std::pair<int, int>> sorted = pairs;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        require(sorted[i] != sorted[i - 1], "Graph: duplicate edge (", sorted[i].first, ",",
                sorted[i].second, ")");
    }

    std::vector<int> degree(static_cast<std::size_t>(n_vertices), 0);
    for (const Edge& e : g.edges) {
        ++degree[static_cast<std::size_t>(e.u)];
        ++degree[static_cast<std::size_t>(e.v)];
    }
    g.adj_offsets.assign(static_cast<std::size_t>(n_vertices) + 1, 0);
    for (int v = 0; v < n_vertices; ++v) {
        g.adj_offsets[static_cast<std::size_t>(v) + 1] =
            g.adj_offsets[static_cast<std::size_t>(v)] + degree[static_cast<std::size_t>(v)];
    }
    g.adj.resize(g.edges.size() * 2);
    std::vector<int> cursor(g.adj_offsets.begin(), g.adj_offsets.end() - 1);
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
        const Edge& e = g.edges[ei];
        g.adj[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.u)]++)] = {e.v, static_cast<int>(ei)};
        g.adj[static_cast<std::size_t>(cursor[static_cast<std::size_t>(e.v)]++)] = {e.u, static_cast<int>(ei)};
    }
    return g;
}

void Graph::set_weight(int edge_index, double w) {
    require(edge_index >= 0 && edge_index < n_edges(), "set_weight: bad edge index ", edge_index);
    require(std::isfinite(w) && w > 0.0, "set_weight: non-positive weight ", w);
    edges[static_cast<std::size_t>(edge_index)].w = w;
}

std::vector<double> Graph::weights() const {
    std::vector<double> w(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) w[i] = edges[i].w;
    return w;
}

void Graph::set_weights(const std::vector<double>& w) {
    require(w.size() == edges.size(), "set_weights: expected ", edges.size(), " weights, got ",
            w.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        require(std::isfinite(w[i]) && w[i] > 0.0, "set_weights: non-positive weight at edge ", i);
        edges[i].w = w[i];
    }
}

UnionFind::UnionFind(int n)
    : parent(static_cast<std::size_t>(n)),
      rank(static_cast<std::size_t>(n), 0),
      root_label(static_cast<std::size_t>(n), kUnlabeled) {
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
}

int UnionFind::find(int v) {
    int root = v;
    while (parent[static_cast<std::size_t>(root)] != root) root = parent[static_cast<std::size_t>(root)];
    while (parent[static_cast<std::size_t>(v)] != root) {
        int next = parent[static_cast<std::size_t>(v)];
        parent[static_cast<std::size_t>(v)] = root;
        v = next;
    }
    return root;
}

int UnionFind::unite(int a, int b) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return ra;
    const int la = root_label[static_cast<std::size_t>(ra)];
    const int lb = root_label[static_cast<std::size_t>(rb)];
    require(la == kUnlabeled || lb == kUnlabeled || la == lb,
            "UnionFind: refusing to merge roots labeled ", la, " and ", lb);
    if (rank[static_cast<std::size_t>(ra)] < rank[static_cast<std::size_t>(rb)]) std::swap(ra, rb);
    parent[static_cast<std::size_t>(rb)] = ra;
    if (rank[static_cast<std::size_t>(ra)] == rank[static_cast<std::size_t>(rb)]) {
        ++rank[static_cast<std::size_t>(ra)];
    }
    root_label[static_cast<std::size_t>(ra)] = la != kUnlabeled ? la : lb;
    return ra;
}

void UnionFind::set_label(int v, int label) {
    root_label[static_cast<std::size_t>(find(v))] = label;
}

}  // namespace tw
