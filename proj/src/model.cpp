#include "tw/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tw/rng.hpp"
#include "tw/util.hpp"

namespace tw {

namespace {

using ordered_json = nlohmann::ordered_json;

std::int64_t flat_features(const std::vector<std::int64_t>& shape) {
    std::int64_t f = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) f *= shape[i];
    return f;
}

void linear_forward(const LayerSpec& s, const double* w, const Tensor& x, Tensor& y) {
    const std::int64_t n_items = x.dim(0);
    const std::int64_t in = s.in_features;
    const std::int64_t out = s.out_features;
    const double* bias = w + in * out;
    for (std::int64_t n = 0; n < n_items; ++n) {
        const double* xn = x.data.data() + n * in;
        double* yn = y.data.data() + n * out;
        for (std::int64_t o = 0; o < out; ++o) {
            const double* wo = w + o * in;
            double acc = bias[o];
            for (std::int64_t i = 0; i < in; ++i) acc += wo[i] * xn[i];
            yn[o] = acc;
        }
    }
}

void conv_forward(const LayerSpec& s, const double* w, const Tensor& x, Tensor& y) {
    const std::int64_t n_items = x.dim(0);
    const std::int64_t ih = x.dim(2), iw = x.dim(3);
    const std::int64_t oh = y.dim(2), ow = y.dim(3);
    const std::int64_t k = s.kernel;
    const double* bias = w + static_cast<std::int64_t>(s.out_ch) * s.in_ch * k * k;
    for (std::int64_t n = 0; n < n_items; ++n) {
        for (std::int64_t oc = 0; oc < s.out_ch; ++oc) {
            for (std::int64_t r = 0; r < oh; ++r) {
                for (std::int64_t c = 0; c < ow; ++c) {
                    double acc = bias[oc];
                    for (std::int64_t ic = 0; ic < s.in_ch; ++ic) {
                        const double* wk = w + ((oc * s.in_ch + ic) * k) * k;
                        for (std::int64_t kr = 0; kr < k; ++kr) {
                            const std::int64_t pr = r * s.stride - s.pad + kr;
                            if (pr < 0 || pr >= ih) continue;
                            for (std::int64_t kc = 0; kc < k; ++kc) {
                                const std::int64_t pc = c * s.stride - s.pad + kc;
                                if (pc < 0 || pc >= iw) continue;
                                acc += wk[kr * k + kc] * x.at(n, ic, pr, pc);
                            }
                        }
                    }
                    y.at(n, oc, r, c) = acc;
                }
            }
        }
    }
}

// Per-channel offsets into a (possibly 4-D) tensor: visits every element of
// channel c and applies fn(flat_index).
template <class Fn>
void for_channel(const Tensor& x, std::int64_t c, Fn&& fn) {
    const std::int64_t n_items = x.dim(0);
    const std::int64_t channels = x.dim(1);
    const std::int64_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    for (std::int64_t n = 0; n < n_items; ++n) {
        const std::int64_t base = (n * channels + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) fn(base + s);
    }
}

}  // namespace

Tensor Model::run(const Tensor& batch, bool training, std::vector<LayerCache>* caches,
                  std::vector<std::uint8_t>* relu_signs, std::vector<double>* running_io) const {
    require(batch.rank() >= 2, "forward: batch must have a leading batch dim, got shape ",
            batch.shape_str());
    {
        std::vector<std::int64_t> item(batch.shape.begin() + 1, batch.shape.end());
        require(item == input_shape, "forward: expected item shape ", shape_str(input_shape),
                ", got ", shape_str(item));
    }
    if (caches) caches->assign(layers.size(), LayerCache{});

    Tensor x = batch;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerSpec& s = layers[li];
        std::vector<std::int64_t> out_shape = s.infer_output_shape(x.shape, static_cast<int>(li));
        const double* w = params.data() + param_offsets[li];
        Tensor y(out_shape);

        switch (s.kind) {
            case LayerKind::Linear: {
                if (caches) (*caches)[li].input = x;
                linear_forward(s, w, x, y);
                break;
            }
            case LayerKind::Conv2d: {
                if (caches) (*caches)[li].input = x;
                conv_forward(s, w, x, y);
                break;
            }
            case LayerKind::BatchNorm: {
                const double* gamma = w;
                const double* beta = w + s.features;
                const std::int64_t spatial = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
                const std::int64_t count = x.dim(0) * spatial;
                Tensor xhat(x.shape);
                std::vector<double> invstd(static_cast<std::size_t>(s.features), 0.0);
                for (std::int64_t c = 0; c < s.features; ++c) {
                    double mean, var;
                    if (training) {
                        double sum = 0.0;
                        for_channel(x, c, [&](std::int64_t i) { sum += x.data[static_cast<std::size_t>(i)]; });
                        mean = sum / static_cast<double>(count);
                        double sq = 0.0;
                        for_channel(x, c, [&](std::int64_t i) {
                            const double d = x.data[static_cast<std::size_t>(i)] - mean;
                            sq += d * d;
                        });
                        var = sq / static_cast<double>(count);
                        if (running_io) {
                            double& rm = (*running_io)[static_cast<std::size_t>(running_offsets[li] + c)];
                            double& rv = (*running_io)[static_cast<std::size_t>(running_offsets[li] + s.features + c)];
                            rm = (1.0 - s.momentum) * rm + s.momentum * mean;
                            rv = (1.0 - s.momentum) * rv + s.momentum * var;
                        }
                    } else {
                        mean = running[static_cast<std::size_t>(running_offsets[li] + c)];
                        var = running[static_cast<std::size_t>(running_offsets[li] + s.features + c)];
                    }
                    const double is = 1.0 / std::sqrt(var + s.eps);
                    invstd[static_cast<std::size_t>(c)] = is;
                    for_channel(x, c, [&](std::int64_t i) {
                        const double xh = (x.data[static_cast<std::size_t>(i)] - mean) * is;
                        xhat.data[static_cast<std::size_t>(i)] = xh;
                        y.data[static_cast<std::size_t>(i)] = gamma[c] * xh + beta[c];
                    });
                }
                if (caches) {
                    (*caches)[li].xhat = std::move(xhat);
                    (*caches)[li].invstd = std::move(invstd);
                }
                break;
            }
            case LayerKind::Relu: {
                std::vector<std::uint8_t> mask(x.data.size());
                for (std::size_t i = 0; i < x.data.size(); ++i) {
                    const bool pos = x.data[i] > 0.0;
                    mask[i] = pos ? 1 : 0;
                    y.data[i] = pos ? x.data[i] : 0.0;
                }
                if (relu_signs) relu_signs->insert(relu_signs->end(), mask.begin(), mask.end());
                if (caches) (*caches)[li].relu_mask = std::move(mask);
                break;
            }
        }
        x = std::move(y);
    }
    x.check_finite("forward output");
    return x;
}

Tensor Model::forward(const Tensor& batch, std::vector<std::uint8_t>* relu_signs) {
    if (train_mode) {
        Tensor out = run(batch, true, &caches_, relu_signs, &running);
        cached_output_shape_ = out.shape;
        has_cache_ = true;
        return out;
    }
    has_cache_ = false;
    return run(batch, false, nullptr, relu_signs, nullptr);
}

Tensor Model::forward_eval(const Tensor& batch) const {
    return run(batch, false, nullptr, nullptr, nullptr);
}

BackwardResult Model::backward(const Tensor& upstream) {
    require(has_cache_, "backward: no cached forward pass (call forward in train mode first)");
    require(upstream.shape == cached_output_shape_, "backward: upstream shape ",
            upstream.shape_str(), " does not match forward output ",
            shape_str(cached_output_shape_));

    BackwardResult res;
    res.param_grad.assign(params.size(), 0.0);
    Tensor g = upstream;

    for (int li = static_cast<int>(layers.size()) - 1; li >= 0; --li) {
        const LayerSpec& s = layers[static_cast<std::size_t>(li)];
        const LayerCache& cache = caches_[static_cast<std::size_t>(li)];
        const double* w = params.data() + param_offsets[static_cast<std::size_t>(li)];
        double* gw = res.param_grad.data() + param_offsets[static_cast<std::size_t>(li)];

        switch (s.kind) {
            case LayerKind::Linear: {
                const Tensor& x = cache.input;
                const std::int64_t n_items = x.dim(0);
                const std::int64_t in = s.in_features;
                const std::int64_t out = s.out_features;
                double* gb = gw + in * out;
                Tensor gx(x.shape);
                for (std::int64_t n = 0; n < n_items; ++n) {
                    const double* xn = x.data.data() + n * in;
                    const double* gn = g.data.data() + n * out;
                    double* gxn = gx.data.data() + n * in;
                    for (std::int64_t o = 0; o < out; ++o) {
                        const double go = gn[o];
                        if (go == 0.0) continue;
                        double* gwo = gw + o * in;
                        const double* wo = w + o * in;
                        for (std::int64_t i = 0; i < in; ++i) {
                            gwo[i] += go * xn[i];
                            gxn[i] += go * wo[i];
                        }
                        gb[o] += go;
                    }
                }
                g = std::move(gx);
                break;
            }
            case LayerKind::Conv2d: {
                const Tensor& x = cache.input;
                const std::int64_t n_items = x.dim(0);
                const std::int64_t ih = x.dim(2), iw = x.dim(3);
                const std::int64_t oh = g.dim(2), ow = g.dim(3);
                const std::int64_t k = s.kernel;
                double* gb = gw + static_cast<std::int64_t>(s.out_ch) * s.in_ch * k * k;
                Tensor gx(x.shape);
                for (std::int64_t n = 0; n < n_items; ++n) {
                    for (std::int64_t oc = 0; oc < s.out_ch; ++oc) {
                        for (std::int64_t r = 0; r < oh; ++r) {
                            for (std::int64_t c = 0; c < ow; ++c) {
                                const double go = g.at(n, oc, r, c);
                                if (go == 0.0) continue;
                                gb[oc] += go;
                                for (std::int64_t ic = 0; ic < s.in_ch; ++ic) {
                                    const double* wk = w + ((oc * s.in_ch + ic) * k) * k;
                                    double* gwk = gw + ((oc * s.in_ch + ic) * k) * k;
                                    for (std::int64_t kr = 0; kr < k; ++kr) {
                                        const std::int64_t pr = r * s.stride - s.pad + kr;
                                        if (pr < 0 || pr >= ih) continue;
                                        for (std::int64_t kc = 0; kc < k; ++kc) {
                                            const std::int64_t pc = c * s.stride - s.pad + kc;
                                            if (pc < 0 || pc >= iw) continue;
                                            gwk[kr * k + kc] += go * x.at(n, ic, pr, pc);
                                            gx.at(n, ic, pr, pc) += go * wk[kr * k + kc];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                g = std::move(gx);
                break;
            }
            case LayerKind::BatchNorm: {
                const Tensor& xhat = cache.xhat;
                const std::int64_t spatial = xhat.rank() == 4 ? xhat.dim(2) * xhat.dim(3) : 1;
                const double count = static_cast<double>(xhat.dim(0) * spatial);
                const double* gamma = w;
                double* ggamma = gw;
                double* gbeta = gw + s.features;
                Tensor gx(xhat.shape);
                for (std::int64_t c = 0; c < s.features; ++c) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for_channel(xhat, c, [&](std::int64_t i) {
                        const double gi = g.data[static_cast<std::size_t>(i)];
                        sum_g += gi;
                        sum_gx += gi * xhat.data[static_cast<std::size_t>(i)];
                    });
                    ggamma[c] += sum_gx;
                    gbeta[c] += sum_g;
                    const double scale = gamma[c] * cache.invstd[static_cast<std::size_t>(c)] / count;
                    for_channel(xhat, c, [&](std::int64_t i) {
                        const double gi = g.data[static_cast<std::size_t>(i)];
                        gx.data[static_cast<std::size_t>(i)] =
                            scale * (count * gi - sum_g - xhat.data[static_cast<std::size_t>(i)] * sum_gx);
                    });
                }
                g = std::move(gx);
                break;
            }
            case LayerKind::Relu: {
                for (std::size_t i = 0; i < g.data.size(); ++i) {
                    if (!cache.relu_mask[i]) g.data[i] = 0.0;
                }
                break;
            }
        }
    }
    g.check_finite("backward input gradient");
    for (double v : res.param_grad) {
        require(std::isfinite(v), "backward: non-finite parameter gradient");
    }
    res.input_grad = std::move(g);
    return res;
}

Model build_model(std::vector<LayerSpec> layers, std::vector<std::int64_t> input_shape,
                  std::uint64_t seed) {
    require(!layers.empty(), "build_model: no layers");
    Model m;
    m.layers = std::move(layers);
    m.input_shape = std::move(input_shape);
    m.init_seed = seed;

    // Shape-check the whole chain with a phantom batch of 1.
    std::vector<std::int64_t> shape;
    shape.push_back(1);
    shape.insert(shape.end(), m.input_shape.begin(), m.input_shape.end());
    std::int64_t p_total = 0, r_total = 0;
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        m.param_offsets.push_back(p_total);
        m.running_offsets.push_back(r_total);
        shape = m.layers[li].infer_output_shape(shape, static_cast<int>(li));
        p_total += m.layers[li].param_count();
        r_total += m.layers[li].running_count();
    }
    require(shape.size() == 2, "build_model: final layer must produce [batch, embed], got ",
            shape_str(shape));
    m.embed_dim = static_cast<int>(shape[1]);

    m.params.assign(static_cast<std::size_t>(p_total), 0.0);
    m.running.assign(static_cast<std::size_t>(r_total), 0.0);

    Rng rng = Rng::derive(seed, {stream::kInit});
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const LayerSpec& s = m.layers[li];
        double* w = m.params.data() + m.param_offsets[li];
        switch (s.kind) {
            case LayerKind::Linear: {
                const double bound = 1.0 / std::sqrt(static_cast<double>(s.in_features));
                for (std::int64_t i = 0; i < s.param_count(); ++i) w[i] = rng.uniform(-bound, bound);
                break;
            }
            case LayerKind::Conv2d: {
                const double bound =
                    1.0 / std::sqrt(static_cast<double>(s.in_ch) * s.kernel * s.kernel);
                for (std::int64_t i = 0; i < s.param_count(); ++i) w[i] = rng.uniform(-bound, bound);
                break;
            }
            case LayerKind::BatchNorm: {
                for (int c = 0; c < s.features; ++c) w[c] = 1.0;                    // gamma
                for (int c = 0; c < s.features; ++c) w[s.features + c] = 0.0;       // beta
                double* r = m.running.data() + m.running_offsets[li];
                for (int c = 0; c < s.features; ++c) r[c] = 0.0;                    // mean
                for (int c = 0; c < s.features; ++c) r[s.features + c] = 1.0;       // var
                break;
            }
            case LayerKind::Relu:
                break;
        }
    }
    return m;
}

std::vector<LayerSpec> mlp_architecture(int in_ch, int height, int width,
                                        const std::vector<int>& hidden, int embed_dim) {
    require(embed_dim > 0, "mlp_architecture: embed_dim must be positive");
    std::vector<LayerSpec> layers;
    int prev = in_ch * height * width;
    for (int h : hidden) {
        layers.push_back(LayerSpec::linear(prev, h));
        layers.push_back(LayerSpec::batchnorm(h));
        layers.push_back(LayerSpec::relu());
        prev = h;
    }
    layers.push_back(LayerSpec::linear(prev, embed_dim));
    return layers;
}

std::vector<LayerSpec> conv_architecture(int in_ch, int height, int width,
                                         const std::vector<int>& channels, int embed_dim) {
    require(channels.size() == 3, "conv_architecture: need exactly 3 channel counts");
    std::vector<LayerSpec> layers;
    int prev = in_ch;
    int h = height, w = width;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const int stride = i == 0 ? 1 : 2;
        layers.push_back(LayerSpec::batchnorm(prev));
        layers.push_back(LayerSpec::relu());
        layers.push_back(LayerSpec::conv2d(prev, channels[i], 3, stride, 1));
        h = (h + 2 - 3) / stride + 1;
        w = (w + 2 - 3) / stride + 1;
        prev = channels[i];
    }
    layers.push_back(LayerSpec::batchnorm(prev));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::linear(prev * h * w, embed_dim));
    return layers;
}

namespace {

constexpr char kMagic[6] = {'T', 'W', 'N', 'E', 'T', '1'};

ordered_json layer_to_json(const LayerSpec& s) {
    ordered_json j;
    j["kind"] = layer_kind_name(s.kind);
    switch (s.kind) {
        case LayerKind::Linear:
            j["in"] = s.in_features;
            j["out"] = s.out_features;
            break;
        case LayerKind::Conv2d:
            j["in_ch"] = s.in_ch;
            j["out_ch"] = s.out_ch;
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            j["pad"] = s.pad;
            break;
        case LayerKind::BatchNorm:
            j["features"] = s.features;
            j["momentum"] = s.momentum;
            j["eps"] = s.eps;
            break;
        case LayerKind::Relu:
            break;
    }
    return j;
}

LayerSpec layer_from_json(const ordered_json& j) {
    const LayerKind kind = layer_kind_from_name(j.at("kind").get<std::string>());
    switch (kind) {
        case LayerKind::Linear:
            return LayerSpec::linear(j.at("in").get<int>(), j.at("out").get<int>());
        case LayerKind::Conv2d:
            return LayerSpec::conv2d(j.at("in_ch").get<int>(), j.at("out_ch").get<int>(),
                                     j.at("kernel").get<int>(), j.at("stride").get<int>(),
                                     j.at("pad").get<int>());
        case LayerKind::BatchNorm:
            return LayerSpec::batchnorm(j.at("features").get<int>(), j.at("momentum").get<double>(),
                                        j.at("eps").get<double>());
        case LayerKind::Relu:
            return LayerSpec::relu();
    }
    fail("unreachable");
}

void write_f32_blob(std::ofstream& out, const std::vector<double>& v) {
    for (double d : v) {
        const float f = static_cast<float>(d);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        const unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                                    static_cast<unsigned char>((bits >> 8) & 0xff),
                                    static_cast<unsigned char>((bits >> 16) & 0xff),
                                    static_cast<unsigned char>((bits >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    }
}

std::vector<double> read_f32_blob(std::ifstream& in, std::int64_t count, const char* what) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        require(in.good(), "model file: truncated ", what, " blob at entry ", i, " of ", count);
        std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                             (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) |
                             (static_cast<std::uint32_t>(b[3]) << 24);
        float f;
        std::memcpy(&f, &bits, 4);
        v[static_cast<std::size_t>(i)] = static_cast<double>(f);
    }
    return v;
}

}  // namespace

void Model::save(const std::string& path) const {
    ordered_json header;
    header["format"] = "TWNET1";
    header["version"] = 1;
    header["input_shape"] = input_shape;
    header["embed_dim"] = embed_dim;
    header["seed"] = init_seed;
    header["param_count"] = param_count();
    header["running_count"] = static_cast<std::int64_t>(running.size());
    ordered_json jl = ordered_json::array();
    for (const LayerSpec& s : layers) jl.push_back(layer_to_json(s));
    header["layers"] = jl;
    if (!config_echo_json.empty()) {
        header["config"] = ordered_json::parse(config_echo_json);
    } else {
        header["config"] = nullptr;
    }
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot open model file for writing: ", path);
    out.write(kMagic, 6);
    const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    const unsigned char lb[4] = {static_cast<unsigned char>(len & 0xff),
                                 static_cast<unsigned char>((len >> 8) & 0xff),
                                 static_cast<unsigned char>((len >> 16) & 0xff),
                                 static_cast<unsigned char>((len >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(lb), 4);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_f32_blob(out, params);
    write_f32_blob(out, running);
    require(out.good(), "failed writing model file: ", path);
}

Model Model::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open model file: ", path);
    char magic[6];
    in.read(magic, 6);
    require(in.good() && std::memcmp(magic, kMagic, 6) == 0, "not a TWNET1 model file: ", path);
    unsigned char lb[4];
    in.read(reinterpret_cast<char*>(lb), 4);
    require(in.good(), "model file: truncated header length");
    const std::uint32_t len = static_cast<std::uint32_t>(lb[0]) |
                              (static_cast<std::uint32_t>(lb[1]) << 8) |
                              (static_cast<std::uint32_t>(lb[2]) << 16) |
                              (static_cast<std::uint32_t>(lb[3]) << 24);
    std::string hs(len, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(len));
    require(in.good(), "model file: truncated header (declared ", len, " bytes)");
    ordered_json header = ordered_json::parse(hs);
    require(header.at("format").get<std::string>() == "TWNET1", "bad model header format field");

    std::vector<LayerSpec> layers;
    for (const auto& jl : header.at("layers")) layers.push_back(layer_from_json(jl));
    Model m = build_model(std::move(layers),
                          header.at("input_shape").get<std::vector<std::int64_t>>(),
                          header.at("seed").get<std::uint64_t>());
    require(m.embed_dim == header.at("embed_dim").get<int>(), "model header embed_dim mismatch");

    const std::int64_t pc = header.at("param_count").get<std::int64_t>();
    const std::int64_t rc = header.at("running_count").get<std::int64_t>();
    require(pc == m.param_count(), "model header declares ", pc, " params, layers need ",
            m.param_count());
    require(rc == static_cast<std::int64_t>(m.running.size()), "model header declares ", rc,
            " running stats, layers need ", m.running.size());
    m.params = read_f32_blob(in, pc, "parameter");
    m.running = read_f32_blob(in, rc, "running-stat");
    in.peek();
    require(in.eof(), "model file: trailing bytes after declared blobs");
    if (!header.at("config").is_null()) m.config_echo_json = header.at("config").dump();
    return m;
}

GradCheckResult grad_check(Model& model, const Tensor& batch, const LossFn& loss_fn, double step,
                           int max_params, std::uint64_t seed) {
    require(model.param_count() >= 1, "grad_check: model has no parameters");
    const bool was_training = model.train_mode;
    const std::vector<double> params0 = model.params;
    const std::vector<double> running0 = model.running;
    model.train_mode = true;

    auto eval_loss = [&](std::vector<std::uint8_t>* signs) {
        model.running = running0;
        Tensor out = model.forward(batch, signs);
        Tensor scratch_grad;
        const double loss = loss_fn(out, &scratch_grad);
        require(std::isfinite(loss), "grad_check: non-finite loss ", loss);
        return loss;
    };

    // Analytic gradient at the base point.
    model.running = running0;
    Tensor out = model.forward(batch);
    Tensor gout(out.shape);
    const double base_loss = loss_fn(out, &gout);
    require(std::isfinite(base_loss), "grad_check: non-finite loss ", base_loss);
    BackwardResult analytic = model.backward(gout);

    std::vector<std::int64_t> indices;
    const std::int64_t total = model.param_count();
    if (total <= max_params) {
        for (std::int64_t i = 0; i < total; ++i) indices.push_back(i);
    } else {
        Rng rng = Rng::derive(seed, {stream::kGradCheck});
        for (int i : rng.sample_without_replacement(static_cast<int>(total), max_params)) {
            indices.push_back(i);
        }
        std::sort(indices.begin(), indices.end());
    }

    GradCheckResult res;
    std::vector<std::uint8_t> signs_p, signs_m;
    for (std::int64_t idx : indices) {
        signs_p.clear();
        signs_m.clear();
        model.params[static_cast<std::size_t>(idx)] = params0[static_cast<std::size_t>(idx)] + step;
        const double lp = eval_loss(&signs_p);
        model.params[static_cast<std::size_t>(idx)] = params0[static_cast<std::size_t>(idx)] - step;
        const double lm = eval_loss(&signs_m);
        model.params[static_cast<std::size_t>(idx)] = params0[static_cast<std::size_t>(idx)];
        if (signs_p != signs_m) {
            ++res.skipped_kinks;  // difference quotient straddles a ReLU kink
            continue;
        }
        const double numeric = (lp - lm) / (2.0 * step);
        const double a = analytic.param_grad[static_cast<std::size_t>(idx)];
        const double denom = std::max(std::abs(a), std::abs(numeric));
        const double err = denom < 1e-7 ? std::abs(a - numeric) : std::abs(a - numeric) / denom;
        res.max_rel_err = std::max(res.max_rel_err, err);
        ++res.checked;
    }

    model.params = params0;
    model.running = running0;
    model.train_mode = was_training;
    return res;
}

}  // namespace tw
