#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "egoseg/net/tensor.hpp"

namespace egoseg::net {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0, numeric = 0.0; // at worst_index
};

inline double relative_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
}

/// `f(x)` returns (scalar, dscalar/dx). Every coordinate of the analytic gradient at x is
/// compared with the central difference (f(x+eps) - f(x-eps)) / 2eps.
template <class T, class F>
GradCheckResult grad_check(F&& f, Tensor4<T> x, double eps) {
    const auto [f0, analytic] = f(x);
    (void)f0;
    require_shape(analytic.shape == x.shape, "grad_check", analytic.shape, x.shape);
    GradCheckResult r;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T orig = x.data[i];
        x.data[i] = static_cast<T>(orig + eps);
        const double fp = f(x).first;
        x.data[i] = static_cast<T>(orig - eps);
        const double fm = f(x).first;
        x.data[i] = orig;
        const double num = (fp - fm) / (2.0 * eps);
        const double e = relative_error(analytic.data[i], num);
        if (e > r.max_rel_error || i == 0) r = {e, i, static_cast<double>(analytic.data[i]), num};
    }
    return r;
}

} // namespace egoseg::net
