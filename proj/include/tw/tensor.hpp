#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tw {

// Dense row-major tensor of doubles. Shapes use the NCHW convention for
// rank-4 data and [batch, features] for rank-2.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> s);

    static Tensor zeros(std::vector<std::int64_t> s) { return Tensor(std::move(s)); }

    std::int64_t numel() const;
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * shape[1] + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * shape[1] + j)]; }

    double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * shape[2] + h) * shape[3] + w)];
    }

    double* row(std::int64_t i) { return data.data() + i * row_size(); }
    const double* row(std::int64_t i) const { return data.data() + i * row_size(); }
    // Elements per leading-dimension slice.
    std::int64_t row_size() const;

    std::string shape_str() const;

    // Throws if any entry is NaN or infinite.
    void check_finite(const char* what) const;
};

}  // namespace tw
