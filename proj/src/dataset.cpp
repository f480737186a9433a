#include "tw/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tw/util.hpp"

namespace tw {

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

float decode_f32le(const unsigned char* p) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                            static_cast<std::uint32_t>(p[1]) << 8 |
                            static_cast<std::uint32_t>(p[2]) << 16 |
                            static_cast<std::uint32_t>(p[3]) << 24;
    return std::bit_cast<float>(u);
}

void encode_f32le(float f, unsigned char* p) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    p[0] = static_cast<unsigned char>(u & 0xff);
    p[1] = static_cast<unsigned char>(u >> 8 & 0xff);
    p[2] = static_cast<unsigned char>(u >> 16 & 0xff);
    p[3] = static_cast<unsigned char>(u >> 24 & 0xff);
}

}  // namespace

HsiDataset load_dataset(const std::string& dir) {
    const std::string header_path = dir + "/cube.json";
    std::ifstream hin(header_path);
    require(hin.good(), "cannot open ", header_path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hin);
    } catch (const nlohmann::json::exception& e) {
        fail(header_path, ": invalid JSON: ", e.what());
    }

    HsiDataset ds;
    try {
        ds.height = header.at("height").get<int>();
        ds.width = header.at("width").get<int>();
        ds.bands = header.at("bands").get<int>();
        const std::string dtype = header.at("dtype").get<std::string>();
        require(dtype == "f32le", header_path, ": unsupported dtype \"", dtype, "\"");
        const std::string order = header.at("order").get<std::string>();
        require(order == "row-major HWB", header_path, ": unsupported order \"", order, "\"");
        if (header.contains("classes")) ds.n_classes = header.at("classes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail(header_path, ": bad header field: ", e.what());
    }
    require(ds.height > 0 && ds.width > 0 && ds.bands > 0, header_path,
            ": non-positive dimensions ", ds.height, "x", ds.width, "x", ds.bands);

    const auto cube_bytes = read_bytes(dir + "/cube.f32");
    const std::size_t want_cube = static_cast<std::size_t>(ds.n_pixels()) *
                                  static_cast<std::size_t>(ds.bands) * 4;
    require(cube_bytes.size() == want_cube, dir, "/cube.f32: expected ", want_cube,
            " bytes, got ", cube_bytes.size());
    ds.cube.resize(want_cube / 4);
    for (std::size_t i = 0; i < ds.cube.size(); ++i) {
        ds.cube[i] = decode_f32le(cube_bytes.data() + i * 4);
        require(std::isfinite(ds.cube[i]), dir, "/cube.f32: non-finite value at index ", i);
    }

    const auto label_bytes = read_bytes(dir + "/labels.u16");
    const std::size_t want_labels = static_cast<std::size_t>(ds.n_pixels()) * 2;
    require(label_bytes.size() == want_labels, dir, "/labels.u16: expected ", want_labels,
            " bytes, got ", label_bytes.size());
    ds.labels.resize(want_labels / 2);
    std::uint16_t max_label = 0;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        ds.labels[i] = static_cast<std::uint16_t>(label_bytes[i * 2] |
                                                  label_bytes[i * 2 + 1] << 8);
        max_label = std::max(max_label, ds.labels[i]);
    }
    require(max_label > 0, dir, ": no labeled pixels (all labels are 0)");
    if (ds.n_classes == 0) {
        ds.n_classes = max_label;
    } else {
        require(max_label <= ds.n_classes, dir, ": label ", max_label,
                " exceeds declared class count ", ds.n_classes);
    }
    return ds;
}

void save_dataset(const HsiDataset& ds, const std::string& dir) {
    require(ds.height > 0 && ds.width > 0 && ds.bands > 0, "save_dataset: empty dataset");
    require(static_cast<std::int64_t>(ds.cube.size()) == ds.n_pixels() * ds.bands,
            "save_dataset: cube size mismatch");
    require(static_cast<std::int64_t>(ds.labels.size()) == ds.n_pixels(),
            "save_dataset: label size mismatch");
    std::filesystem::create_directories(dir);

    nlohmann::ordered_json header;
    header["format"] = "twcube";
    header["version"] = 1;
    header["height"] = ds.height;
    header["width"] = ds.width;
    header["bands"] = ds.bands;
    header["classes"] = ds.n_classes;
    header["dtype"] = "f32le";
    header["order"] = "row-major HWB";
    std::ofstream hout(dir + "/cube.json");
    require(hout.good(), "cannot write ", dir, "/cube.json");
    hout << header.dump(2) << "\n";

    std::vector<unsigned char> cube_bytes(ds.cube.size() * 4);
    for (std::size_t i = 0; i < ds.cube.size(); ++i) {
        encode_f32le(ds.cube[i], cube_bytes.data() + i * 4);
    }
    std::ofstream cout_(dir + "/cube.f32", std::ios::binary);
    require(cout_.good(), "cannot write ", dir, "/cube.f32");
    cout_.write(reinterpret_cast<const char*>(cube_bytes.data()),
                static_cast<std::streamsize>(cube_bytes.size()));

    std::vector<unsigned char> label_bytes(ds.labels.size() * 2);
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        label_bytes[i * 2] = static_cast<unsigned char>(ds.labels[i] & 0xff);
        label_bytes[i * 2 + 1] = static_cast<unsigned char>(ds.labels[i] >> 8);
    }
    std::ofstream lout(dir + "/labels.u16", std::ios::binary);
    require(lout.good(), "cannot write ", dir, "/labels.u16");
    lout.write(reinterpret_cast<const char*>(label_bytes.data()),
               static_cast<std::streamsize>(label_bytes.size()));
}

namespace {

// Mutually orthogonal unit vectors when bands allows, random unit vectors
// otherwise.
std::vector<std::vector<double>> class_directions(int classes, int bands, Rng& rng) {
    std::vector<std::vector<double>> dirs;
    for (int c = 0; c < classes; ++c) {
        std::vector<double> v(static_cast<std::size_t>(bands));
        for (int attempt = 0; attempt < 64; ++attempt) {
            for (double& x : v) x = rng.gaussian();
            if (bands >= classes) {
                for (const auto& prev : dirs) {
                    double dot = 0.0;
                    for (int b = 0; b < bands; ++b) dot += v[static_cast<std::size_t>(b)] * prev[static_cast<std::size_t>(b)];
                    for (int b = 0; b < bands; ++b) v[static_cast<std::size_t>(b)] -= dot * prev[static_cast<std::size_t>(b)];
                }
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (double& x : v) x /= norm;
                break;
            }
        }
        dirs.push_back(v);
    }
    return dirs;
}

}  // namespace

HsiDataset make_synthetic(const SyntheticParams& p) {
    require(p.classes >= 2, "make_synthetic: need at least 2 classes, got ", p.classes);
    require(p.height >= 1 && p.width >= 1 && p.bands >= 1, "make_synthetic: bad dims ",
            p.height, "x", p.width, "x", p.bands);
    require(static_cast<std::int64_t>(p.height) * p.width >= p.classes,
            "make_synthetic: fewer pixels than classes");
    require(p.noise_sigma >= 0.0, "make_synthetic: negative noise_sigma");
    require(p.unlabeled_frac >= 0.0 && p.unlabeled_frac < 1.0,
            "make_synthetic: unlabeled_frac must lie in [0,1)");

    Rng rng = Rng::derive(p.seed, {stream::kSynth});
    HsiDataset ds;
    ds.height = p.height;
    ds.width = p.width;
    ds.bands = p.bands;
    ds.n_classes = p.classes;
    const std::int64_t n = ds.n_pixels();

    const std::vector<int> sites = rng.sample_without_replacement(static_cast<int>(n), p.classes);

    ds.labels.resize(static_cast<std::size_t>(n));
    for (std::int64_t pix = 0; pix < n; ++pix) {
        const std::int64_t r = pix / p.width, c = pix % p.width;
        std::int64_t best = -1;
        int best_site = 0;
        for (int s = 0; s < p.classes; ++s) {
            const std::int64_t sr = sites[static_cast<std::size_t>(s)] / p.width;
            const std::int64_t sc = sites[static_cast<std::size_t>(s)] % p.width;
            const std::int64_t d2 = (r - sr) * (r - sr) + (c - sc) * (c - sc);
            if (best < 0 || d2 < best) {
                best = d2;
                best_site = s;
            }
        }
        ds.labels[static_cast<std::size_t>(pix)] = static_cast<std::uint16_t>(best_site + 1);
    }

    const double scale = p.separation * (p.noise_sigma > 0.0 ? p.noise_sigma : 1.0);
    const auto dirs = class_directions(p.classes, p.bands, rng);
    ds.cube.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(p.bands));
    for (std::int64_t pix = 0; pix < n; ++pix) {
        const int cls = ds.labels[static_cast<std::size_t>(pix)] - 1;
        for (int b = 0; b < p.bands; ++b) {
            const double mean = scale * dirs[static_cast<std::size_t>(cls)][static_cast<std::size_t>(b)];
            const double noise = p.noise_sigma > 0.0 ? p.noise_sigma * rng.gaussian() : 0.0;
            ds.cube[static_cast<std::size_t>(pix * p.bands + b)] = static_cast<float>(mean + noise);
        }
    }

    if (p.unlabeled_frac > 0.0) {
        // Strip labels from a random subset, but never from the class sites,
        // so every class keeps at least one labeled pixel.
        std::vector<char> is_site(static_cast<std::size_t>(n), 0);
        for (int s : sites) is_site[static_cast<std::size_t>(s)] = 1;
        std::vector<int> candidates;
        candidates.reserve(static_cast<std::size_t>(n));
        for (std::int64_t pix = 0; pix < n; ++pix) {
            if (!is_site[static_cast<std::size_t>(pix)]) candidates.push_back(static_cast<int>(pix));
        }
        const int strip = std::min(static_cast<int>(candidates.size()),
                                   static_cast<int>(std::llround(p.unlabeled_frac * static_cast<double>(n))));
        for (int idx : rng.sample_without_replacement(static_cast<int>(candidates.size()), strip)) {
            ds.labels[static_cast<std::size_t>(candidates[static_cast<std::size_t>(idx)])] = 0;
        }
    }
    return ds;
}

int SplitMask::train_total() const {
    return static_cast<int>(std::count(state.begin(), state.end(), kTrain));
}

int SplitMask::test_total() const {
    return static_cast<int>(std::count(state.begin(), state.end(), kTest));
}

SplitMask split(const HsiDataset& ds, const SplitSpec& spec, std::uint64_t seed) {
    if (spec.mode == SplitSpec::Mode::Fraction) {
        require(spec.fraction > 0.0 && spec.fraction <= 1.0, "split: fraction ", spec.fraction,
                " outside (0,1]");
    } else {
        require(spec.per_class_big >= 1 && spec.per_class_small >= 1,
                "split: per-class counts must be at least 1");
    }

    std::vector<std::vector<int>> pixels_by_class(static_cast<std::size_t>(ds.n_classes));
    for (std::int64_t pix = 0; pix < ds.n_pixels(); ++pix) {
        const int label = ds.labels[static_cast<std::size_t>(pix)];
        if (label != 0) pixels_by_class[static_cast<std::size_t>(label - 1)].push_back(static_cast<int>(pix));
    }

    SplitMask mask;
    mask.state.assign(static_cast<std::size_t>(ds.n_pixels()), SplitMask::kExcluded);
    mask.train_per_class.resize(static_cast<std::size_t>(ds.n_classes));
    mask.test_per_class.resize(static_cast<std::size_t>(ds.n_classes));

    for (int c = 1; c <= ds.n_classes; ++c) {
        auto& pixels = pixels_by_class[static_cast<std::size_t>(c - 1)];
        const int n_c = static_cast<int>(pixels.size());
        require(n_c >= 2, "split: class ", c, " has ", n_c, " labeled pixels, need at least 2");

        int k;
        if (spec.mode == SplitSpec::Mode::Fraction) {
            k = static_cast<int>(std::llround(spec.fraction * n_c));
            k = std::max(1, std::min(k, n_c));
        } else {
            k = n_c > spec.per_class_big ? spec.per_class_big : std::min(spec.per_class_small, n_c);
        }

        Rng rc = Rng::derive(seed, {stream::kSplit, static_cast<std::uint64_t>(c)});
        rc.shuffle(pixels);
        for (int i = 0; i < n_c; ++i) {
            mask.state[static_cast<std::size_t>(pixels[static_cast<std::size_t>(i)])] =
                i < k ? SplitMask::kTrain : SplitMask::kTest;
        }
        mask.train_per_class[static_cast<std::size_t>(c - 1)] = k;
        mask.test_per_class[static_cast<std::size_t>(c - 1)] = n_c - k;
    }
    return mask;
}

}  // namespace tw
