#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "tw/classifier.hpp"
#include "tw/dataset.hpp"
#include "tw/graph_build.hpp"
#include "tw/model.hpp"
#include "tw/pca.hpp"

namespace tw {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 256;
    double alpha = 0.2;          // triplet margin
    double seed_fraction = 0.4;  // of the train pixels, per class, each epoch
    double lr_base = 0.01;
    double lr_max = 0.1;
    int cycle_len = 0;  // iterations per half-cycle; 0 = four epochs' worth

    enum class Arch { Mlp, Conv };
    Arch arch = Arch::Mlp;
    int embed_dim = 64;
    std::vector<int> mlp_hidden = {128, 128};
    std::vector<int> conv_channels = {16, 32, 64};
    int patch = 11;

    double stop_tol = 1e-4;  // mean loss below this (with perfect out-of-box) arms early stop
    int patience = 5;

    enum class Pool { All, TrainOnly };
    Pool pool = Pool::All;
    bool fixed_seeds = false;  // reuse the first epoch's seeds instead of resampling

    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double out_of_box = 0.0;      // train accuracy excluding the seeds
    double active_fraction = 0.0; // triplets with positive loss
    bool degenerate = false;      // watershed collapsed to one class; SGD skipped
    double lr_last = 0.0;
};

// Hinge loss max(0, d(a,p) - d(a,n) + alpha) on one triplet of embedding
// rows, with analytic gradients for all three. Gradients are zero when the
// hinge is inactive; a zero distance contributes a zero subgradient.
double triplet_loss(const double* a, const double* p, const double* n, int dim, double alpha,
                    double* grad_a, double* grad_p, double* grad_n);

// Triangular wave between lr_base and lr_max with period 2*cycle_len.
double cyclic_lr(std::int64_t iteration, double lr_base, double lr_max, int cycle_len);

// Patches for the given pixels as one NCHW batch matching model input
// conventions (channels first).
Tensor build_patch_batch(const ProjectedCube& projected, const std::vector<int>& pixels,
                         int patch);

// Embeds every vertex with the model in eval mode, [n_vertices, embed_dim].
Tensor embed_all(const Model& model, const ProjectedCube& projected,
                 const std::vector<int>& vertex_pixel, int threads);

// One training run: per epoch, embed everything, reweight the graph, sample
// stratified seeds from the train split, watershed-propagate labels, mine
// triplets and take SGD steps under a cyclic learning rate. Stops early
// after `patience` consecutive epochs at perfect out-of-box accuracy and
// mean loss below stop_tol.
std::vector<EpochRecord> train(const HsiDataset& ds, const ProjectedCube& projected,
                               BuiltGraph& built, const SplitMask& mask, Model& model,
                               const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace tw
