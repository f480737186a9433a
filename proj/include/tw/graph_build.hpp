#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tw/dataset.hpp"
#include "tw/graph.hpp"
#include "tw/pca.hpp"
#include "tw/tensor.hpp"

namespace tw {

// Where a combined edge came from.
enum EdgeProvenance : std::uint8_t {
    kFromAdjacency = 1,
    kFromEmst = 2,
    kFromBoth = 3,
};

struct EdgeSet {
    std::vector<std::pair<int, int>> adjacency_edges;  // vertex ids, u < v
    std::vector<std::pair<int, int>> emst_edges;
    std::vector<std::pair<int, int>> combined;         // deduplicated, sorted
    std::vector<std::uint8_t> provenance;              // per combined edge
};

// The classification graph over all labeled pixels: image 4-adjacency edges
// united with the Euclidean MST over `emst_dims`-dimensional PCA features.
// The edge set is fixed for the lifetime of a run; only weights change.
struct BuiltGraph {
    Graph graph;
    EdgeSet edges;
    std::vector<int> vertex_pixel;  // vertex id -> pixel index (row-major)
    std::vector<int> pixel_vertex;  // pixel index -> vertex id or -1
    Tensor features;                // [n_vertices, emst_dims] EMST feature rows
};

// Exact MST over the rows of `points` ([n, d]), Prim with a full scan per
// step. Ties are broken toward the lexicographically smallest (u, v) pair.
// The inner distance scan is parallelized over `threads` workers.
std::vector<std::pair<int, int>> euclidean_mst(const Tensor& points, int threads = 1);

BuiltGraph build_edge_set(const HsiDataset& ds, const ProjectedCube& projected, int emst_dims,
                          int threads = 1);

constexpr double kWeightClamp = 1e-12;

// Per-edge Euclidean distance between endpoint embedding rows, restricted to
// the given dimensions (ascending order expected) and clamped away from 0.
std::vector<double> edge_weights_from_embeddings(const Graph& g, const Tensor& embeddings,
                                                 const std::vector<int>& dims,
                                                 double clamp = kWeightClamp);

// Replaces every edge weight with the full-embedding distance of the
// endpoints. The edge set itself is untouched.
void reweight(Graph& g, const Tensor& embeddings, double clamp = kWeightClamp);

}  // namespace tw
