#pragma once

#include <cstdint>
#include <vector>

#include "tw/graph.hpp"
#include "tw/rng.hpp"
#include "tw/tensor.hpp"
#include "tw/watershed.hpp"

namespace tw {

// Watershed propagation plus nearest-seed fallback for seedless components.
// Every vertex reachable from any seed ends up labeled.
std::vector<int> classify_single(const Graph& g, const SeedSet& seeds);

struct EnsembleConfig {
    int n_estimators = 25;
    double seed_fraction = 0.5;     // per class, at least one seed survives
    double feature_fraction = 0.5;  // of embedding dimensions
    std::uint64_t seed = 0;
    int threads = 1;
};

struct EnsembleResult {
    std::vector<int> labels;  // argmax of votes, ties to the lowest class id,
                              // kUnlabeled when no estimator voted
    int n_classes = 0;
    std::vector<int> votes;   // [n_vertices][n_classes] flattened

    int vote(int vertex, int cls) const {
        return votes[static_cast<std::size_t>(vertex) * static_cast<std::size_t>(n_classes) +
                     static_cast<std::size_t>(cls)];
    }
};

// Majority vote over n_estimators watersheds, each on a per-class subsample
// of the seeds and a random subset of embedding dimensions. With
// (1, 1.0, 1.0) this reproduces classify_single bit for bit.
EnsembleResult classify_ensemble(const Graph& g, const Tensor& embeddings, const SeedSet& seeds,
                                 const EnsembleConfig& cfg);

struct TripletBatch {
    std::vector<int> anchors;
    std::vector<int> positives;
    std::vector<int> negatives;

    // Validates the triplet constraints against the labeling: anchor and
    // positive share a label, the negative differs, nobody is unlabeled.
    TripletBatch(std::vector<int> a, std::vector<int> p, std::vector<int> n,
                 const std::vector<int>& labels);

    int size() const { return static_cast<int>(anchors.size()); }
};

// batch_size uniform triplets over the pool: anchor uniform over the pool,
// positive uniform over same-label pool members (excluding the anchor),
// negative uniform over different-label pool members. Anchors whose class
// is a singleton are resampled (bounded retries, then that slot is skipped).
TripletBatch mine_triplets(const std::vector<int>& labels, const std::vector<int>& pool,
                           int batch_size, Rng& rng);

}  // namespace tw
