// Finite-difference checking of taped gradients.
#pragma once

#include <algorithm>
#include <cmath>

#include "maukf/matrix.hpp"

namespace maukf {

/// Central difference (f(x + h e_i) - f(x - h e_i)) / 2h for every entry of x.
/// `f` maps a Matrix to a double.
template <class F>
Matrix central_difference(F&& f, Matrix x, double h = 1e-6) {
    Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(static_cast<const Matrix&>(x));
        x[i] = saved - h;
        const double down = f(static_cast<const Matrix&>(x));
        x[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries that
/// are zero up to rounding from dominating.
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8) {
    require_same_shape(a, b, "max_relative_error");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        const double e = std::abs(a[i] - b[i]) / denom;
        worst = std::isnan(e) ? e : std::max(worst, e);
        if (std::isnan(worst)) return worst;
    }
    return worst;
}

/// ||a - b||_F / max(||a||_F, ||b||_F, floor): one number per tensor, not
/// dominated by entries whose true value is near zero.
inline double tensor_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-12) {
    require_same_shape(a, b, "tensor_relative_error");
    const double diff = frobenius_norm(sub(a, b));
    return diff / std::max({frobenius_norm(a), frobenius_norm(b), floor});
}

}  // namespace maukf
