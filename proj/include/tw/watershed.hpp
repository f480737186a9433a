#pragma once

// Seeded watershed labeling on edge-weighted graphs plus the pass-value /
// set-dissimilarity machinery used to reason about its margins.

#include <map>
#include <vector>

#include "tw/graph.hpp"

namespace tw {

// Seeds: a sparse vertex -> class assignment. Class ids are dense 0..C-1
// from the caller's perspective; the watershed only requires them to be
// non-negative.
struct SeedSet {
    std::map<int, int> label_by_vertex;

    void add(int vertex, int label);
    bool empty() const { return label_by_vertex.empty(); }
    int max_class() const;
    // Vertices per class, class id -> sorted vertex list.
    std::map<int, std::vector<int>> by_class() const;
};

struct WatershedResult {
    std::vector<int> labels;     // per vertex, kUnlabeled where no seed competes
    std::vector<int> component;  // per vertex, dense component id (first-occurrence order)
};

// Propagates seed labels along ascending-weight edges. Edges whose endpoints
// already belong to two labeled components are skipped; everything else is
// merged and inherits whichever label (if any) is present.
WatershedResult watershed_label(const Graph& g, const SeedSet& seeds);

struct PassValue {
    double value = 0.0;
    bool disconnected = false;
};

// Minimum over u-v paths of the maximum edge weight along the path.
// u == v gives 0. Disconnected pairs report disconnected=true with
// value = numeric_limits<double>::max().
PassValue pass_value(const Graph& g, int u, int v);

// min over (x in X, y in Y) of pass_value(x, y). Overlapping sets give 0.
PassValue set_dissimilarity(const Graph& g, const std::vector<int>& xs,
                            const std::vector<int>& ys);

struct MarginResult {
    double margin = 0.0;
    std::vector<int> labels;
    bool disconnected = false;  // no cross path between some seed classes: margin is the sentinel
};

// Exhaustive search over all labelings that extend the seeds, maximizing the
// minimum over classes c of the dissimilarity between class c's seeds and the
// vertices outside its region. Only for small graphs (n <= 16 guard).
MarginResult brute_force_max_margin(const Graph& g, const SeedSet& seeds);

// Margin of a specific labeling with respect to the seeds: min over classes c
// of set_dissimilarity(seeds_c, complement of region_c). Labelings that
// mislabel a seed get -infinity.
double labeling_margin(const Graph& g, const SeedSet& seeds, const std::vector<int>& labels);

struct OrphanReport {
    int relabeled = 0;
    int still_unlabeled = 0;
};

// Assigns each unlabeled vertex the class of the seed with the smallest pass
// value to it (ties: smaller pass value, then lower class id, then lower seed
// vertex id). Vertices disconnected from every seed stay unlabeled.
OrphanReport label_orphans(const Graph& g, std::vector<int>& labels, const SeedSet& seeds);

}  // namespace tw
