#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tw {

enum class LayerKind { Linear, Conv2d, BatchNorm, Relu };

std::string layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

// Hyperparameters for one layer. Only the fields of the active kind are
// meaningful; the rest stay at their zero defaults.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;

    // linear
    int in_features = 0;
    int out_features = 0;

    // conv2d
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 0;
    int stride = 1;
    int pad = 0;

    // batchnorm
    int features = 0;
    double momentum = 0.1;
    double eps = 1e-5;

    static LayerSpec linear(int in, int out);
    static LayerSpec conv2d(int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0);
    static LayerSpec batchnorm(int features, double momentum = 0.1, double eps = 1e-5);
    static LayerSpec relu();

    std::int64_t param_count() const;
    // Batchnorm keeps (running mean, running var) per channel.
    std::int64_t running_count() const;

    // Output shape for a given input shape (leading batch dim included).
    // Throws with layer context if the input is incompatible.
    std::vector<std::int64_t> infer_output_shape(const std::vector<std::int64_t>& in,
                                                 int layer_index) const;
};

}  // namespace tw
