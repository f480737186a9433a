#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tw/rng.hpp"

namespace tw {

// A multi-band image cube with per-pixel integer labels. Label 0 means
// "no ground truth"; real classes are 1..n_classes. Cube layout is
// row-major [height][width][bands], float32.
struct HsiDataset {
    int height = 0;
    int width = 0;
    int bands = 0;
    int n_classes = 0;
    std::vector<float> cube;
    std::vector<std::uint16_t> labels;

    std::int64_t n_pixels() const { return static_cast<std::int64_t>(height) * width; }
    float at(int r, int c, int b) const {
        return cube[static_cast<std::size_t>((static_cast<std::int64_t>(r) * width + c) * bands + b)];
    }
    std::uint16_t label_at(int r, int c) const {
        return labels[static_cast<std::size_t>(static_cast<std::int64_t>(r) * width + c)];
    }
};

// Reads cube.json / cube.f32 / labels.u16 from `dir`. Byte counts must match
// the header exactly; the cube must be finite; labels must not exceed the
// class count (taken from the header, or from the label maximum when the
// header omits it).
HsiDataset load_dataset(const std::string& dir);

// Writes the three-file on-disk format. Creates `dir` if needed.
void save_dataset(const HsiDataset& ds, const std::string& dir);

struct SyntheticParams {
    int height = 64;
    int width = 64;
    int bands = 8;
    int classes = 4;
    double noise_sigma = 0.5;
    double unlabeled_frac = 0.0;
    // Class-mean scale in units of noise_sigma (or absolute when sigma is 0).
    double separation = 6.0;
    std::uint64_t seed = 0;
};

// Voronoi-cell label map over random sites plus Gaussian spectra around
// per-class mean vectors. Class means are mutually orthogonal directions
// when bands >= classes, random unit directions otherwise, scaled so a
// nearest-mean classifier is nearly perfect at the default separation.
HsiDataset make_synthetic(const SyntheticParams& p);

// Train/test assignment over labeled pixels, stratified per class.
struct SplitSpec {
    enum class Mode { Fraction, PerClass };
    Mode mode = Mode::Fraction;
    double fraction = 0.1;
    // "N samples if the class is bigger than N, else M" (M capped by size)
    int per_class_big = 30;
    int per_class_small = 15;
};

struct SplitMask {
    static constexpr std::uint8_t kExcluded = 0;
    static constexpr std::uint8_t kTrain = 1;
    static constexpr std::uint8_t kTest = 2;

    std::vector<std::uint8_t> state;  // one entry per pixel
    std::vector<int> train_per_class;  // index = class id - 1
    std::vector<int> test_per_class;

    int train_total() const;
    int test_total() const;
};

// Deterministic given the seed: per-class shuffle, then the first k pixels
// train and the rest test. Fraction mode takes round(f * n_c) clamped to
// [1, n_c]; per-class mode follows SplitSpec's big/small rule.
SplitMask split(const HsiDataset& ds, const SplitSpec& spec, std::uint64_t seed);

}  // namespace tw
