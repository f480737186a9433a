#include "tw/pca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tw/util.hpp"

namespace tw {

PcaBasis fit_pca(const HsiDataset& ds, int k) {
    const std::int64_t n = ds.n_pixels();
    const int B = ds.bands;
    require(k >= 1 && k <= B, "fit_pca: k = ", k, " outside [1, ", B, "]");
    require(n >= 2, "fit_pca: need at least 2 pixels, got ", n);

    PcaBasis basis;
    basis.bands = B;
    basis.k = k;
    basis.mean.assign(static_cast<std::size_t>(B), 0.0);
    for (std::int64_t p = 0; p < n; ++p) {
        for (int b = 0; b < B; ++b) {
            basis.mean[static_cast<std::size_t>(b)] +=
                ds.cube[static_cast<std::size_t>(p * B + b)];
        }
    }
    for (double& m : basis.mean) m /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(B, B);
    for (std::int64_t p = 0; p < n; ++p) {
        Eigen::VectorXd d(B);
        for (int b = 0; b < B; ++b) {
            d(b) = ds.cube[static_cast<std::size_t>(p * B + b)] - basis.mean[static_cast<std::size_t>(b)];
        }
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(n - 1);
    require(cov.diagonal().maxCoeff() > 1e-12, "fit_pca: zero-variance data");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    require(solver.info() == Eigen::Success, "fit_pca: eigendecomposition failed");
    // Eigen returns ascending eigenvalues; take the top k in descending order.
    basis.eigenvalues.resize(static_cast<std::size_t>(k));
    basis.components.resize(static_cast<std::size_t>(B) * static_cast<std::size_t>(k));
    for (int comp = 0; comp < k; ++comp) {
        const int src = B - 1 - comp;
        basis.eigenvalues[static_cast<std::size_t>(comp)] =
            std::max(0.0, solver.eigenvalues()(src));
        Eigen::VectorXd col = solver.eigenvectors().col(src);
        int arg = 0;
        for (int b = 1; b < B; ++b) {
            if (std::abs(col(b)) > std::abs(col(arg))) arg = b;
        }
        if (col(arg) < 0.0) col = -col;
        for (int b = 0; b < B; ++b) {
            basis.components[static_cast<std::size_t>(b) * static_cast<std::size_t>(k) +
                             static_cast<std::size_t>(comp)] = col(b);
        }
    }
    return basis;
}

std::vector<double> project(const PcaBasis& basis, const float* spectrum, int n_components) {
    require(n_components >= 1 && n_components <= basis.k, "project: n_components = ",
            n_components, " outside [1, ", basis.k, "]");
    std::vector<double> out(static_cast<std::size_t>(n_components), 0.0);
    for (int b = 0; b < basis.bands; ++b) {
        const double centered = static_cast<double>(spectrum[b]) - basis.mean[static_cast<std::size_t>(b)];
        for (int comp = 0; comp < n_components; ++comp) {
            out[static_cast<std::size_t>(comp)] += centered * basis.component(b, comp);
        }
    }
    return out;
}

ProjectedCube project_cube(const HsiDataset& ds, const PcaBasis& basis) {
    require(basis.bands == ds.bands, "project_cube: basis has ", basis.bands,
            " bands, dataset has ", ds.bands);
    ProjectedCube out;
    out.height = ds.height;
    out.width = ds.width;
    out.k = basis.k;
    out.values.resize(static_cast<std::size_t>(ds.n_pixels()) * static_cast<std::size_t>(basis.k));
    for (std::int64_t p = 0; p < ds.n_pixels(); ++p) {
        const auto v = project(basis, ds.cube.data() + p * ds.bands, basis.k);
        std::copy(v.begin(), v.end(), out.values.begin() + p * basis.k);
    }
    return out;
}

Tensor extract_patch(const ProjectedCube& cube, int r, int c, int size) {
    require(size >= 1 && size % 2 == 1, "extract_patch: size ", size, " must be odd");
    require(r >= 0 && r < cube.height && c >= 0 && c < cube.width,
            "extract_patch: pixel (", r, ",", c, ") outside ", cube.height, "x", cube.width);
    Tensor patch = Tensor::zeros({size, size, cube.k});
    const int half = size / 2;
    for (int pr = 0; pr < size; ++pr) {
        const int rr = r - half + pr;
        if (rr < 0 || rr >= cube.height) continue;
        for (int pc = 0; pc < size; ++pc) {
            const int cc = c - half + pc;
            if (cc < 0 || cc >= cube.width) continue;
            const double* src = cube.at(rr, cc);
            double* dst = patch.data.data() +
                          (static_cast<std::int64_t>(pr) * size + pc) * cube.k;
            std::copy(src, src + cube.k, dst);
        }
    }
    return patch;
}

}  // namespace tw
