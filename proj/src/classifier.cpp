#include "tw/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tw/graph_build.hpp"
#include "tw/parallel.hpp"
#include "tw/util.hpp"

namespace tw {

std::vector<int> classify_single(const Graph& g, const SeedSet& seeds) {
    WatershedResult res = watershed_label(g, seeds);
    label_orphans(g, res.labels, seeds);
    return res.labels;
}

EnsembleResult classify_ensemble(const Graph& g, const Tensor& embeddings, const SeedSet& seeds,
                                 const EnsembleConfig& cfg) {
    require(cfg.n_estimators >= 1, "ensemble: n_estimators must be at least 1, got ",
            cfg.n_estimators);
    require(cfg.seed_fraction > 0.0 && cfg.seed_fraction <= 1.0, "ensemble: seed_fraction ",
            cfg.seed_fraction, " outside (0,1]");
    require(cfg.feature_fraction > 0.0 && cfg.feature_fraction <= 1.0,
            "ensemble: feature_fraction ", cfg.feature_fraction, " outside (0,1]");
    require(!seeds.empty(), "ensemble: empty seed set");
    const auto by_class = seeds.by_class();
    const int n_classes = seeds.max_class() + 1;
    for (int c = 0; c < n_classes; ++c) {
        require(by_class.count(c) != 0, "ensemble: class ", c, " has no seeds");
    }
    const int d = static_cast<int>(embeddings.dim(1));
    const int n_dims = std::max(1, static_cast<int>(std::ceil(cfg.feature_fraction * d)));

    std::vector<std::vector<int>> estimator_labels(static_cast<std::size_t>(cfg.n_estimators));
    parallel_for(cfg.n_estimators, cfg.threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t t = begin; t < end; ++t) {
            Rng rng = Rng::derive(cfg.seed, {stream::kEnsemble, static_cast<std::uint64_t>(t)});
            SeedSet sub;
            for (const auto& [c, members] : by_class) {
                const int n_c = static_cast<int>(members.size());
                const int k = std::max(
                    1, static_cast<int>(std::ceil(cfg.seed_fraction * static_cast<double>(n_c))));
                for (int idx : rng.sample_without_replacement(n_c, k)) {
                    sub.add(members[static_cast<std::size_t>(idx)], c);
                }
            }
            std::vector<int> dims = rng.sample_without_replacement(d, n_dims);
            std::sort(dims.begin(), dims.end());  // keep the distance sum order canonical

            Graph scratch = g;
            scratch.set_weights(edge_weights_from_embeddings(g, embeddings, dims));
            estimator_labels[static_cast<std::size_t>(t)] = classify_single(scratch, sub);
        }
    });

    EnsembleResult res;
    res.n_classes = n_classes;
    res.votes.assign(static_cast<std::size_t>(g.n_vertices) * static_cast<std::size_t>(n_classes),
                     0);
    for (int t = 0; t < cfg.n_estimators; ++t) {
        const auto& labels = estimator_labels[static_cast<std::size_t>(t)];
        for (int v = 0; v < g.n_vertices; ++v) {
            const int c = labels[static_cast<std::size_t>(v)];
            if (c != kUnlabeled) {
                ++res.votes[static_cast<std::size_t>(v) * static_cast<std::size_t>(n_classes) +
                            static_cast<std::size_t>(c)];
            }
        }
    }
    res.labels.assign(static_cast<std::size_t>(g.n_vertices), kUnlabeled);
    for (int v = 0; v < g.n_vertices; ++v) {
        int best = kUnlabeled, best_votes = 0;
        for (int c = 0; c < n_classes; ++c) {
            const int count = res.vote(v, c);
            if (count > best_votes) {  // ties keep the earlier (lower) class
                best_votes = count;
                best = c;
            }
        }
        res.labels[static_cast<std::size_t>(v)] = best;
    }
    return res;
}

TripletBatch::TripletBatch(std::vector<int> a, std::vector<int> p, std::vector<int> n,
                           const std::vector<int>& labels)
    : anchors(std::move(a)), positives(std::move(p)), negatives(std::move(n)) {
    require(anchors.size() == positives.size() && anchors.size() == negatives.size(),
            "TripletBatch: ragged member arrays");
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        const int la = labels[static_cast<std::size_t>(anchors[i])];
        const int lp = labels[static_cast<std::size_t>(positives[i])];
        const int ln = labels[static_cast<std::size_t>(negatives[i])];
        require(la != kUnlabeled && lp != kUnlabeled && ln != kUnlabeled,
                "TripletBatch: unlabeled member in triplet ", i);
        require(la == lp, "TripletBatch: anchor/positive label mismatch in triplet ", i);
        require(la != ln, "TripletBatch: negative shares the anchor label in triplet ", i);
        require(anchors[i] != positives[i], "TripletBatch: anchor equals positive in triplet ", i);
    }
}

TripletBatch mine_triplets(const std::vector<int>& labels, const std::vector<int>& pool,
                           int batch_size, Rng& rng) {
    require(batch_size >= 0, "mine_triplets: negative batch size");
    std::map<int, std::vector<int>> members;  // class -> pool positions' vertices
    for (int v : pool) {
        require(v >= 0 && v < static_cast<int>(labels.size()), "mine_triplets: pool vertex ", v,
                " out of range");
        const int c = labels[static_cast<std::size_t>(v)];
        if (c != kUnlabeled) members[c].push_back(v);
    }
    require(members.size() >= 2, "mine_triplets: need at least two classes in the pool, got ",
            members.size());

    // flat pool of labeled vertices + per-vertex position within its class
    std::vector<int> flat;
    std::map<int, int> class_sizes;
    for (const auto& [c, vs] : members) {
        class_sizes[c] = static_cast<int>(vs.size());
        flat.insert(flat.end(), vs.begin(), vs.end());
    }
    const int total = static_cast<int>(flat.size());

    std::vector<int> anchors, positives, negatives;
    for (int i = 0; i < batch_size; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 32 && !placed; ++attempt) {
            const int anchor = flat[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(total)))];
            const int cls = labels[static_cast<std::size_t>(anchor)];
            const auto& same = members.at(cls);
            const int n_same = static_cast<int>(same.size());
            if (n_same < 2) continue;  // singleton class, draw a new anchor

            // position of the anchor within its class list (sorted insert order)
            const int anchor_pos = static_cast<int>(
                std::find(same.begin(), same.end(), anchor) - same.begin());
            int pos_idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_same - 1)));
            if (pos_idx >= anchor_pos) ++pos_idx;
            const int positive = same[static_cast<std::size_t>(pos_idx)];

            const int n_other = total - n_same;
            int neg_idx = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_other)));
            int negative = -1;
            for (const auto& [c2, vs2] : members) {
                if (c2 == cls) continue;
                if (neg_idx < static_cast<int>(vs2.size())) {
                    negative = vs2[static_cast<std::size_t>(neg_idx)];
                    break;
                }
                neg_idx -= static_cast<int>(vs2.size());
            }
            anchors.push_back(anchor);
            positives.push_back(positive);
            negatives.push_back(negative);
            placed = true;
        }
        // all retries hit singleton classes: leave this slot unfilled
    }
    return TripletBatch(std::move(anchors), std::move(positives), std::move(negatives), labels);
}

}  // namespace tw
