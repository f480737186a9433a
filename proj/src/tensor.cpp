#include "tw/tensor.hpp"

#include <cmath>
#include <numeric>

#include "tw/util.hpp"

namespace tw {

Tensor::Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        require(d > 0, "Tensor: non-positive extent in shape ", tw::shape_str(shape));
        n *= d;
    }
    data.assign(static_cast<std::size_t>(n), 0.0);
}

std::int64_t Tensor::numel() const {
    return static_cast<std::int64_t>(data.size());
}

std::int64_t Tensor::row_size() const {
    std::int64_t n = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
    return n;
}

std::string Tensor::shape_str() const {
    return tw::shape_str(shape);
}

void Tensor::check_finite(const char* what) const {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            fail(what, ": non-finite value ", data[i], " at flat index ", i, ", shape ", shape_str());
        }
    }
}

}  // namespace tw
