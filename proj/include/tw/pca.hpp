#pragma once

#include <cstdint>
#include <vector>

#include "tw/dataset.hpp"
#include "tw/tensor.hpp"

namespace tw {

struct PcaBasis {
    int bands = 0;
    int k = 0;
    std::vector<double> mean;        // length bands
    std::vector<double> components;  // bands x k, row-major, orthonormal columns
    std::vector<double> eigenvalues; // length k, descending

    double component(int b, int comp) const {
        return components[static_cast<std::size_t>(b) * static_cast<std::size_t>(k) +
                          static_cast<std::size_t>(comp)];
    }
};

// Eigendecomposition of the pixel covariance over all pixels (labeled or
// not), (n-1)-normalized. Components are ordered by descending eigenvalue;
// each column's largest-magnitude entry is made positive so the sign is
// deterministic.
PcaBasis fit_pca(const HsiDataset& ds, int k);

// Projects one spectrum (length bands) onto the first n_components columns.
std::vector<double> project(const PcaBasis& basis, const float* spectrum, int n_components);

// The whole cube in PCA coordinates, [height][width][k] row-major.
struct ProjectedCube {
    int height = 0;
    int width = 0;
    int k = 0;
    std::vector<double> values;

    const double* at(int r, int c) const {
        return values.data() +
               (static_cast<std::int64_t>(r) * width + c) * static_cast<std::int64_t>(k);
    }
};

ProjectedCube project_cube(const HsiDataset& ds, const PcaBasis& basis);

// size x size window centered on (r, c), zero-filled outside the image.
// Layout [size][size][k], matching the cube's band-last convention.
Tensor extract_patch(const ProjectedCube& cube, int r, int c, int size);

}  // namespace tw
