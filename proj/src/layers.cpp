#include "tw/layers.hpp"

#include "tw/util.hpp"

namespace tw {

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Linear: return "linear";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Relu: return "relu";
    }
    return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
    if (name == "linear") return LayerKind::Linear;
    if (name == "conv2d") return LayerKind::Conv2d;
    if (name == "batchnorm") return LayerKind::BatchNorm;
    if (name == "relu") return LayerKind::Relu;
    fail("unknown layer kind '", name, "'");
}

LayerSpec LayerSpec::linear(int in, int out) {
    require(in > 0 && out > 0, "linear: feature counts must be positive");
    LayerSpec s;
    s.kind = LayerKind::Linear;
    s.in_features = in;
    s.out_features = out;
    return s;
}

LayerSpec LayerSpec::conv2d(int in_ch, int out_ch, int kernel, int stride, int pad) {
    require(in_ch > 0 && out_ch > 0 && kernel > 0, "conv2d: channels and kernel must be positive");
    require(stride >= 1 && pad >= 0, "conv2d: invalid stride/pad");
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    return s;
}

LayerSpec LayerSpec::batchnorm(int features, double momentum, double eps) {
    require(features > 0, "batchnorm: features must be positive");
    require(momentum > 0.0 && momentum <= 1.0, "batchnorm: momentum out of range");
    require(eps > 0.0, "batchnorm: eps must be positive");
    LayerSpec s;
    s.kind = LayerKind::BatchNorm;
    s.features = features;
    s.momentum = momentum;
    s.eps = eps;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}

std::int64_t LayerSpec::param_count() const {
    switch (kind) {
        case LayerKind::Linear:
            return static_cast<std::int64_t>(in_features) * out_features + out_features;
        case LayerKind::Conv2d:
            return static_cast<std::int64_t>(out_ch) * in_ch * kernel * kernel + out_ch;
        case LayerKind::BatchNorm:
            return 2 * static_cast<std::int64_t>(features);  // gamma, beta
        case LayerKind::Relu:
            return 0;
    }
    return 0;
}

std::int64_t LayerSpec::running_count() const {
    return kind == LayerKind::BatchNorm ? 2 * static_cast<std::int64_t>(features) : 0;
}

std::vector<std::int64_t> LayerSpec::infer_output_shape(const std::vector<std::int64_t>& in,
                                                        int layer_index) const {
    switch (kind) {
        case LayerKind::Linear: {
            require(in.size() >= 2, "layer ", layer_index, " (linear): need rank >= 2, got ",
                    shape_str(in));
            std::int64_t flat = 1;
            for (std::size_t i = 1; i < in.size(); ++i) flat *= in[i];
            require(flat == in_features, "layer ", layer_index, " (linear): expected ",
                    in_features, " input features, got ", flat, " from shape ", shape_str(in));
            return {in[0], out_features};
        }
        case LayerKind::Conv2d: {
            require(in.size() == 4, "layer ", layer_index, " (conv2d): need NCHW input, got ",
                    shape_str(in));
            require(in[1] == in_ch, "layer ", layer_index, " (conv2d): expected ", in_ch,
                    " channels, got ", in[1]);
            const std::int64_t ho = (in[2] + 2 * pad - kernel) / stride + 1;
            const std::int64_t wo = (in[3] + 2 * pad - kernel) / stride + 1;
            require(in[2] + 2 * pad >= kernel && in[3] + 2 * pad >= kernel, "layer ", layer_index,
                    " (conv2d): kernel ", kernel, " larger than padded input ", shape_str(in));
            return {in[0], out_ch, ho, wo};
        }
        case LayerKind::BatchNorm: {
            const std::int64_t ch = in.size() == 4 ? in[1] : (in.size() == 2 ? in[1] : -1);
            require(ch > 0, "layer ", layer_index, " (batchnorm): need rank 2 or 4, got ",
                    shape_str(in));
            require(ch == features, "layer ", layer_index, " (batchnorm): expected ", features,
                    " channels, got ", ch);
            return in;
        }
        case LayerKind::Relu:
            return in;
    }
    fail("unreachable");
}

}  // namespace tw
