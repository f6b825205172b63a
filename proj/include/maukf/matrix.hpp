// Dense row-major matrices and the eager numerical kernels shared by the
// tape-free and taped evaluation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maukf {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when the jittered Cholesky ladder is exhausted.
struct CovarianceCollapse : NumericalError {
    using NumericalError::NumericalError;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("Matrix: data length does not match rows*cols");
        }
    }
    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
        : Matrix(rows, cols, std::vector<double>(values)) {}

    static Matrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, 0.0}; }
    static Matrix ones(std::size_t rows, std::size_t cols) { return {rows, cols, 1.0}; }
    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Matrix column(std::initializer_list<double> values) {
        return {values.size(), 1, std::vector<double>(values)};
    }
    static Matrix column(std::span<const double> values) {
        return {values.size(), 1, std::vector<double>(values.begin(), values.end())};
    }
    static Matrix diagonal(std::span<const double> values) {
        Matrix m(values.size(), values.size());
        for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
        return m;
    }
    static Matrix diagonal(std::initializer_list<double> values) {
        return diagonal(std::span<const double>(values.begin(), values.size()));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    Matrix col(std::size_t c) const {
        Matrix out(rows_, 1);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    std::string shape_string() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(const Matrix& m) noexcept {
    return std::all_of(m.data().begin(), m.data().end(),
                       [](double v) { return std::isfinite(v); });
}

inline const Matrix& require_finite(const Matrix& m, const char* op) {
    if (!all_finite(m)) throw NumericalError(std::string(op) + ": non-finite result");
    return m;
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

inline double trace(const Matrix& a) {
    if (a.rows() != a.cols()) throw ShapeError("trace: matrix not square");
    double t = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
    return t;
}

// ---------------------------------------------------------------------------
// Elementwise and structural kernels
// ---------------------------------------------------------------------------

inline Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    require_finite(out, "add");
    return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    require_finite(out, "sub");
    return out;
}

inline Matrix scale(const Matrix& a, double s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    require_finite(out, "scale");
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    require_finite(out, "hadamard");
    return out;
}

namespace detail {

// Two-lane partial dot product: even and odd indices accumulate separately
// and are summed at the end, then any odd tail element is added.
#if defined(__GNUC__)
typedef double lane2 __attribute__((vector_size(16)));
#endif

inline double dot2(const double* a, const double* x, std::size_t k) {
#if defined(__GNUC__)
    lane2 acc = {0.0, 0.0};
    std::size_t p = 0;
    for (; p + 2 <= k; p += 2) {
        lane2 va, vx;
        __builtin_memcpy(&va, a + p, sizeof va);
        __builtin_memcpy(&vx, x + p, sizeof vx);
        acc += va * vx;
    }
    double s = acc[0] + acc[1];
#else
    double even = 0.0, odd = 0.0;
    std::size_t p = 0;
    for (; p + 2 <= k; p += 2) {
        even += a[p] * x[p];
        odd += a[p + 1] * x[p + 1];
    }
    double s = even + odd;
#endif
    if (p < k) s += a[p] * x[p];
    return s;
}

// y = A x for row-major A (n x k), four rows at a time; every row uses the
// dot2 summation order.
inline void matvec(const double* pa, std::size_t n, std::size_t k, const double* px, double* py) {
    std::size_t i = 0;
#if defined(__GNUC__)
    for (; i + 4 <= n; i += 4) {
        const double* r0 = pa + i * k;
        const double* r1 = r0 + k;
        const double* r2 = r1 + k;
        const double* r3 = r2 + k;
        lane2 a0 = {0.0, 0.0}, a1 = a0, a2 = a0, a3 = a0;
        std::size_t p = 0;
        for (; p + 2 <= k; p += 2) {
            lane2 vx, w0, w1, w2, w3;
            __builtin_memcpy(&vx, px + p, sizeof vx);
            __builtin_memcpy(&w0, r0 + p, sizeof w0);
            __builtin_memcpy(&w1, r1 + p, sizeof w1);
            __builtin_memcpy(&w2, r2 + p, sizeof w2);
            __builtin_memcpy(&w3, r3 + p, sizeof w3);
            a0 += w0 * vx;
            a1 += w1 * vx;
            a2 += w2 * vx;
            a3 += w3 * vx;
        }
        double s0 = a0[0] + a0[1], s1 = a1[0] + a1[1], s2 = a2[0] + a2[1], s3 = a3[0] + a3[1];
        if (p < k) {
            s0 += r0[p] * px[p];
            s1 += r1[p] * px[p];
            s2 += r2[p] * px[p];
            s3 += r3[p] * px[p];
        }
        py[i] = s0;
        py[i + 1] = s1;
        py[i + 2] = s2;
        py[i + 3] = s3;
    }
#endif
    for (; i < n; ++i) py[i] = dot2(pa + i * k, px, k);
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + a.shape_string() + " * " +
                         b.shape_string());
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Matrix out(n, m);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    if (m == 1) {
        detail::matvec(pa, n, k, pb, po);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            double* row = po + i * m;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = pa[i * k + p];
                const double* brow = pb + p * m;
                for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
            }
        }
    }
    require_finite(out, "matmul");
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

template <class F>
Matrix map_elements(const Matrix& a, F&& f, const char* op) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    require_finite(out, op);
    return out;
}

inline double sigmoid_scalar(double x) {
    // Both branches avoid exp overflow.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Matrix tanh(const Matrix& a) {
    return map_elements(a, [](double v) { return std::tanh(v); }, "tanh");
}
inline Matrix sigmoid(const Matrix& a) { return map_elements(a, sigmoid_scalar, "sigmoid"); }
inline Matrix relu(const Matrix& a) {
    return map_elements(a, [](double v) { return v > 0.0 ? v : 0.0; }, "relu");
}
inline Matrix exp(const Matrix& a) {
    return map_elements(a, [](double v) { return std::exp(v); }, "exp");
}
inline Matrix sin(const Matrix& a) {
    return map_elements(a, [](double v) { return std::sin(v); }, "sin");
}
inline Matrix cos(const Matrix& a) {
    return map_elements(a, [](double v) { return std::cos(v); }, "cos");
}
inline Matrix sqrt(const Matrix& a) {
    return map_elements(a, [](double v) { return std::sqrt(v); }, "sqrt");
}

inline Matrix atan2(const Matrix& y, const Matrix& x) {
    require_same_shape(y, x, "atan2");
    Matrix out(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::atan2(y[i], x[i]);
    require_finite(out, "atan2");
    return out;
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double w = std::remainder(a, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    return w;
}

/// Wraps every entry of one row into (-pi, pi]; other rows pass through.
inline Matrix wrap_angle_row(const Matrix& a, std::size_t row) {
    if (row >= a.rows()) throw ShapeError("wrap_angle_row: row out of range");
    Matrix out = a;
    for (std::size_t c = 0; c < a.cols(); ++c) out(row, c) = wrap_angle(a(row, c));
    require_finite(out, "wrap_angle_row");
    return out;
}

/// Softmax across each row, max-subtracted.
inline Matrix softmax_rows(const Matrix& a) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double mx = a(r, 0);
        for (std::size_t c = 1; c < a.cols(); ++c) mx = std::max(mx, a(r, c));
        double total = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) {
            out(r, c) = std::exp(a(r, c) - mx);
            total += out(r, c);
        }
        for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) /= total;
    }
    require_finite(out, "softmax_rows");
    return out;
}

inline constexpr double kLayerNormEpsilon = 1e-5;

/// Normalized activations and inverse standard deviation kept for backward.
struct LayerNormCache {
    Matrix normalized;
    double inv_std = 0.0;
};

/// Layer normalization over all entries of a vector, with per-feature gain
/// and bias of the same shape.
inline Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                         LayerNormCache* cache = nullptr, double eps = kLayerNormEpsilon) {
    require_same_shape(x, gain, "layer_norm");
    require_same_shape(x, bias, "layer_norm");
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x.data()) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x.data()) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    Matrix normalized(x.rows(), x.cols());
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        normalized[i] = (x[i] - mean) * inv_std;
        out[i] = gain[i] * normalized[i] + bias[i];
    }
    require_finite(out, "layer_norm");
    if (cache != nullptr) {
        cache->normalized = std::move(normalized);
        cache->inv_std = inv_std;
    }
    return out;
}

inline Matrix concat_rows(const Matrix& top, const Matrix& bottom) {
    if (top.cols() != bottom.cols()) throw ShapeError("concat_rows: column counts differ");
    Matrix out(top.rows() + bottom.rows(), top.cols());
    std::copy(top.data().begin(), top.data().end(), out.data().begin());
    std::copy(bottom.data().begin(), bottom.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(top.size()));
    return out;
}

inline Matrix concat_cols(const Matrix& left, const Matrix& right) {
    if (left.rows() != right.rows()) throw ShapeError("concat_cols: row counts differ");
    Matrix out(left.rows(), left.cols() + right.cols());
    for (std::size_t r = 0; r < left.rows(); ++r) {
        for (std::size_t c = 0; c < left.cols(); ++c) out(r, c) = left(r, c);
        for (std::size_t c = 0; c < right.cols(); ++c) out(r, left.cols() + c) = right(r, c);
    }
    return out;
}

inline Matrix slice(const Matrix& a, std::size_t row0, std::size_t col0, std::size_t nrows,
                    std::size_t ncols) {
    if (row0 + nrows > a.rows() || col0 + ncols > a.cols()) {
        throw ShapeError("slice: block exceeds " + a.shape_string());
    }
    Matrix out(nrows, ncols);
    for (std::size_t r = 0; r < nrows; ++r)
        for (std::size_t c = 0; c < ncols; ++c) out(r, c) = a(row0 + r, col0 + c);
    return out;
}

inline Matrix sum_all(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    Matrix out(1, 1, s);
    require_finite(out, "sum_all");
    return out;
}

/// sum_i w_i d_i e_i^T over matching columns of D (n x N) and E (m x N).
inline Matrix weighted_outer(const Matrix& d, const Matrix& w, const Matrix& e) {
    const std::size_t n_pts = d.cols();
    if (e.cols() != n_pts || w.size() != n_pts) {
        throw ShapeError("weighted_outer: point counts differ");
    }
    Matrix out(d.rows(), e.rows());
    for (std::size_t i = 0; i < n_pts; ++i) {
        const double wi = w[i];
        for (std::size_t r = 0; r < d.rows(); ++r) {
            const double dr = wi * d(r, i);
            for (std::size_t c = 0; c < e.rows(); ++c) out(r, c) += dr * e(c, i);
        }
    }
    require_finite(out, "weighted_outer");
    return out;
}

/// (M + M^T) / 2
inline Matrix symmetrize(const Matrix& m) { return scale(add(m, transpose(m)), 0.5); }

// ---------------------------------------------------------------------------
// Cholesky and triangular solves
// ---------------------------------------------------------------------------

struct CholeskyResult {
    Matrix lower;
    double jitter = 0.0;
};

namespace detail {

// Plain Cholesky of the symmetric part of m plus jitter*I; false on a
// non-positive pivot.
inline bool try_cholesky(const Matrix& m, double jitter, Matrix& lower) {
    const std::size_t n = m.rows();
    lower = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = 0.5 * (m(j, j) + m(j, j)) + jitter;
        for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double ljj = std::sqrt(diag);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = 0.5 * (m(i, j) + m(j, i));
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

}  // namespace detail

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-9) {
    if (m.rows() != m.cols()) return false;
    double scale_ref = 0.0;
    for (double v : m.data()) scale_ref = std::max(scale_ref, std::abs(v));
    const double tol = rel_tol * std::max(scale_ref, 1e-300);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > tol) return false;
    return true;
}

/// Lower Cholesky factor of M + eps*I. eps starts at `jitter` and escalates
/// by 1e-9, 1e-6, 1e-3 times trace(M)/n before giving up.
inline CholeskyResult cholesky_spd(const Matrix& m, double jitter = 0.0) {
    if (m.rows() != m.cols()) throw ShapeError("cholesky_spd: matrix not square");
    if (!all_finite(m)) throw NumericalError("cholesky_spd: non-finite input");
    if (!is_symmetric(m)) throw ShapeError("cholesky_spd: matrix not symmetric");
    const double level = std::abs(trace(m)) / static_cast<double>(m.rows());
    const double ladder[] = {0.0, 1e-9 * level, 1e-6 * level, 1e-3 * level};
    CholeskyResult result;
    for (double step : ladder) {
        if (detail::try_cholesky(m, jitter + step, result.lower)) {
            result.jitter = jitter + step;
            return result;
        }
    }
    throw CovarianceCollapse("cholesky_spd: factorization failed after jitter ladder");
}

inline Matrix cholesky(const Matrix& m, double jitter = 0.0) {
    return cholesky_spd(m, jitter).lower;
}

/// Solves L X = B for lower-triangular L.
inline Matrix solve_lower(const Matrix& lower, const Matrix& b) {
    const std::size_t n = lower.rows();
    if (b.rows() != n) throw ShapeError("solve_lower: row mismatch");
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x(k, c);
            x(i, c) = s / lower(i, i);
        }
    }
    return x;
}

/// Solves L^T X = B for lower-triangular L.
inline Matrix solve_lower_transposed(const Matrix& lower, const Matrix& b) {
    const std::size_t n = lower.rows();
    if (b.rows() != n) throw ShapeError("solve_lower_transposed: row mismatch");
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x(k, c);
            x(ii, c) = s / lower(ii, ii);
        }
    }
    return x;
}

/// Solves (L L^T) X = B given the Cholesky factor.
inline Matrix cholesky_solve(const Matrix& lower, const Matrix& b) {
    return solve_lower_transposed(lower, solve_lower(lower, b));
}

/// X = A^{-1} B for symmetric positive-definite A, via its Cholesky factor.
inline Matrix spd_solve(const Matrix& a, const Matrix& b, CholeskyResult* factor = nullptr) {
    CholeskyResult chol = cholesky_spd(a);
    Matrix x = cholesky_solve(chol.lower, b);
    require_finite(x, "spd_solve");
    if (factor != nullptr) *factor = std::move(chol);
    return x;
}

/// Lower factor with L L^T = M for a symmetric PSD matrix; zero pivots
/// leave their column at zero.
inline Matrix psd_factor(const Matrix& m) {
    const std::size_t n = m.rows();
    Matrix lower(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = m(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
        if (diag <= 1e-300) continue;
        const double ljj = std::sqrt(diag);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return lower;
}

// ---------------------------------------------------------------------------
// Column maps: a vector function applied to every column, with its Jacobian.
// ---------------------------------------------------------------------------

struct ColumnMap {
    std::string name;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::function<void(const double* in, double* out)> value;
    /// Row-major out_dim x in_dim Jacobian.
    std::function<void(const double* in, double* jac)> jacobian;
};

inline Matrix col_map(const Matrix& x, const ColumnMap& f) {
    if (x.rows() != f.in_dim) throw ShapeError("col_map(" + f.name + "): input rows differ");
    Matrix out(f.out_dim, x.cols());
    std::vector<double> in(f.in_dim), res(f.out_dim);
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t r = 0; r < f.in_dim; ++r) in[r] = x(r, c);
        f.value(in.data(), res.data());
        for (std::size_t r = 0; r < f.out_dim; ++r) out(r, c) = res[r];
    }
    require_finite(out, "col_map");
    return out;
}

inline Matrix col_map(const Matrix& x, const std::shared_ptr<const ColumnMap>& f) {
    return col_map(x, *f);
}

// Operators for readable eager code.
inline Matrix operator+(const Matrix& a, const Matrix& b) { return add(a, b); }
inline Matrix operator-(const Matrix& a, const Matrix& b) { return sub(a, b); }
inline Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
inline Matrix operator*(double s, const Matrix& a) { return scale(a, s); }

/// The tape-free backend treats a Matrix as its own value.
inline const Matrix& value_of(const Matrix& m) noexcept { return m; }
inline Matrix detach(const Matrix& m) { return m; }
inline Matrix lift_like(const Matrix& /*ref*/, Matrix m) { return m; }

inline std::string to_string(const Matrix& m) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        os << (r == 0 ? "[" : ", [");
        for (std::size_t c = 0; c < m.cols(); ++c) os << (c == 0 ? "" : ", ") << m(r, c);
        os << "]";
    }
    os << "]";
    return os.str();
}

}  // namespace maukf
