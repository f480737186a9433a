#pragma once

#include <cstdint>
#include <vector>

namespace tw {

constexpr int kUnlabeled = -1;

struct Edge {
    int u = 0;
    int v = 0;
    double w = 1.0;
};

// Undirected edge-weighted graph with strictly positive weights. The edge
// set is fixed after construction; weights may be rewritten in place.
struct Graph {
    int n_vertices = 0;
    std::vector<Edge> edges;

    // CSR adjacency: entries are (neighbor, edge index).
    std::vector<int> adj_offsets;
    std::vector<std::pair<int, int>> adj;

    static Graph build(int n_vertices, std::vector<Edge> edges);

    int n_edges() const { return static_cast<int>(edges.size()); }

    void set_weight(int edge_index, double w);
    std::vector<double> weights() const;
    void set_weights(const std::vector<double>& w);
};

// Union-find with union by rank and path compression. Each root may carry a
// class label; uniting two roots with different labels is a logic error
// (the watershed skips such edges instead).
struct UnionFind {
    std::vector<int> parent;
    std::vector<int> rank;
    std::vector<int> root_label;

    explicit UnionFind(int n);

    int find(int v);
    // Merges the components of a and b; the surviving root inherits the
    // non-kUnlabeled label if either side has one. Returns the new root.
    int unite(int a, int b);
    int label_of(int v) { return root_label[static_cast<std::size_t>(find(v))]; }
    void set_label(int v, int label);
};

}  // namespace tw
