#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tw/trainer.hpp"

namespace tw {

// Everything a subcommand needs, parsed from flags. The semantic settings
// (not paths or thread counts) are echoed as ordered JSON into every
// artifact so results are self-describing.
struct RunConfig {
    std::string command;
    std::string data_dir;
    std::string out_dir;
    std::uint64_t seed = 0;
    int threads = 0;  // 0 = hardware concurrency; never echoed

    // split
    bool per_class_mode = false;
    double train_frac = 0.1;
    int per_class_big = 30;
    int per_class_small = 15;

    // features and graph
    int pca_k = 0;  // 0 = all bands
    int emst_dims = 32;  // capped at the PCA component count

    // trainer
    TrainConfig train;
    int repeats = 1;

    // ensemble (predict, and the post-train evaluation)
    int n_estimators = 25;
    double ensemble_seed_frac = 0.5;
    double feature_frac = 0.5;

    // eval
    bool map = false;
    int map_subsample = 0;

    // artifact paths for predict / eval
    std::string model_path;
    std::string resume_path;  // train: continue from this model instead of a fresh init
    std::string pred_path;
    std::string votes_path;      // optional vote-count CSV from predict
    std::string dump_graph_path;  // optional edge dump from graph-stats

    // make-synth
    int synth_h = 64;
    int synth_w = 64;
    int synth_bands = 8;
    int synth_classes = 4;
    double noise_sigma = 0.5;
    double unlabeled_frac = 0.0;
    double separation = 6.0;
};

// Writes a synthetic dataset to out_dir and prints the class sizes.
void run_make_synth(const RunConfig& cfg);

// Full training entry point: loads the dataset, splits, fits PCA, builds the
// graph, trains `repeats` models with seeds seed+0..seed+r-1, writes
// model[_r].twnet and train_log[_r].jsonl, and (when a test split exists)
// scores each run with the ensemble classifier and writes summary.json.
void run_train(const RunConfig& cfg);

// Rebuilds the training run's split/PCA/graph from the model's embedded
// config, embeds every vertex, seeds the ensemble with all train pixels and
// writes pred.u16 (1-based labels, 0 = no prediction) plus pred.json.
void run_predict(const RunConfig& cfg);

// Scores a prediction raster over the test split; optionally computes MAP
// from a model's embeddings of the test pixels. Writes report.json/csv.
void run_eval(const RunConfig& cfg);

// Prints the combined-graph statistics JSON; optionally dumps the edge list.
void run_graph_stats(const RunConfig& cfg);

}  // namespace tw
