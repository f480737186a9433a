#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tw/layers.hpp"
#include "tw/tensor.hpp"

namespace tw {

struct BackwardResult {
    std::vector<double> param_grad;  // aligned with Model::params
    Tensor input_grad;
};

// A layered embedding network with explicit forward/backward passes.
// Parameters live in one flat vector with per-layer offsets; batchnorm
// running statistics live in a parallel flat vector (mean then var per
// layer). Training mutates params/running/caches and is single-writer;
// forward_eval is const and safe to call from parallel workers.
struct Model {
    std::vector<LayerSpec> layers;
    std::vector<std::int64_t> input_shape;  // per item, e.g. {C,H,W} or {F}
    std::vector<double> params;
    std::vector<double> running;
    std::vector<std::int64_t> param_offsets;
    std::vector<std::int64_t> running_offsets;
    int embed_dim = 0;
    std::uint64_t init_seed = 0;
    bool train_mode = false;
    std::string config_echo_json;  // serialized run config, embedded in the model file

    std::int64_t param_count() const { return static_cast<std::int64_t>(params.size()); }

    // Forward over a batch whose trailing dims equal input_shape. In train
    // mode, activations are cached for backward and batchnorm running
    // statistics are updated. If relu_signs is given, the sign pattern of
    // every pre-ReLU activation is appended to it (used by grad_check to
    // detect kink crossings).
    Tensor forward(const Tensor& batch, std::vector<std::uint8_t>* relu_signs = nullptr);

    // Inference path: no caches, running statistics only. Thread-safe.
    Tensor forward_eval(const Tensor& batch) const;

    // Gradients for the batch cached by the last train-mode forward.
    BackwardResult backward(const Tensor& upstream);

    void save(const std::string& path) const;
    static Model load(const std::string& path);

  private:
    struct LayerCache {
        Tensor input;
        Tensor xhat;                 // batchnorm normalized activations
        std::vector<double> invstd;  // batchnorm 1/sqrt(var+eps) per channel
        std::vector<std::uint8_t> relu_mask;
    };
    std::vector<LayerCache> caches_;
    std::vector<std::int64_t> cached_output_shape_;
    bool has_cache_ = false;

    Tensor run(const Tensor& batch, bool training, std::vector<LayerCache>* caches,
               std::vector<std::uint8_t>* relu_signs, std::vector<double>* running_io) const;
};

// Validates the layer chain against input_shape, allocates parameters and
// running statistics, and initializes weights uniformly in +-1/sqrt(fan_in)
// from the given seed. Batchnorm starts at gamma=1, beta=0, running mean 0,
// running var 1.
Model build_model(std::vector<LayerSpec> layers, std::vector<std::int64_t> input_shape,
                  std::uint64_t seed);

// flatten -> linear(128) -> bn -> relu -> linear(128) -> bn -> relu -> linear(embed)
std::vector<LayerSpec> mlp_architecture(int in_ch, int height, int width,
                                        const std::vector<int>& hidden, int embed_dim);

// bn -> relu -> conv(c0) -> bn -> relu -> conv(c1, s2) -> bn -> relu ->
// conv(c2, s2) -> bn -> relu -> linear(embed); all convs 3x3 pad 1.
std::vector<LayerSpec> conv_architecture(int in_ch, int height, int width,
                                         const std::vector<int>& channels, int embed_dim);

// Loss adapter for grad_check: given network output, returns the scalar loss
// and writes d(loss)/d(output) into grad_out.
using LossFn = std::function<double(const Tensor& out, Tensor* grad_out)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
    int skipped_kinks = 0;
};

// Central-difference check of the analytic parameter gradient. Parameters
// whose two-sided perturbation flips any pre-ReLU sign are skipped (the
// difference quotient straddles a kink there). Above max_params parameters,
// a seeded random subsample is checked.
GradCheckResult grad_check(Model& model, const Tensor& batch, const LossFn& loss_fn,
                           double step = 1e-5, int max_params = 10000, std::uint64_t seed = 0);

}  // namespace tw
