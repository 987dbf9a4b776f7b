#pragma once

#include <cmath>
#include <functional>

#include "dscnn/tensor.hpp"

namespace dscnn {

/// Central-difference numerical gradient of a scalar function of a tensor.
/// Divides by the actually materialized perturbation (xp - xm) so that
/// float rounding of x +/- eps does not bias the estimate.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                               float eps = 1e-3f) {
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float orig = probe[i];
        const float xp = orig + eps;
        const float xm = orig - eps;
        probe[i] = xp;
        const double fp = f(probe);
        probe[i] = xm;
        const double fm = f(probe);
        probe[i] = orig;
        const double denom = static_cast<double>(xp) - static_cast<double>(xm);
        grad[i] = static_cast<float>((fp - fm) / denom);
    }
    return grad;
}

/// ||a - b||_2 / max(||a||_2, ||b||_2, 1e-12): symmetric relative error
/// that stays meaningful when one side is near zero.
inline double l2_relative_error(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l2_relative_error: shape mismatch " + shape_str(a) +
                                                      " vs " + shape_str(b));
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        diff += d * d;
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
    return std::sqrt(diff) / denom;
}

}  // namespace dscnn
