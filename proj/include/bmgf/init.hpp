#pragma once

// Parameter initializers shared across modules.

#include <cmath>
#include <vector>

#include "bmgf/rng.hpp"
#include "bmgf/tensor.hpp"

namespace bmgf::init {

// Linear weight (fan_in x fan_out), uniform in +-1/sqrt(fan_in).
inline Tensor linear(Rng& rng, int fan_in, int fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(fan_in) * fan_out);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::matrix(fan_in, fan_out, v);
}

// Weight with an explicit fan-in that differs from the row count
// (convolution filters, perspective matrices).
inline Tensor fan_in_rows(Rng& rng, int rows, int cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::matrix(rows, cols, v);
}

inline Tensor embedding(Rng& rng, int rows, int cols) {
    std::vector<double> v(static_cast<size_t>(rows) * cols);
    for (double& x : v) x = rng.normal(0.0, 0.02);
    return Tensor::matrix(rows, cols, v);
}

inline Tensor zeros_vec(int n) { return Tensor::vec(std::vector<double>(n, 0.0)); }

inline Tensor ones_vec(int n) { return Tensor::vec(std::vector<double>(n, 1.0)); }

}  // namespace bmgf::init
