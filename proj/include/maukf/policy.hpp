// Recurrent meta-policy that synthesizes sigma-point weights from the
// innovation history: innovation features -> GRU context -> two softmax
// heads, plus an affine decoder used by the auxiliary training loss.
#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/rng.hpp"
#include "maukf/tape.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

struct PolicyDims {
    std::size_t state = kStateDim;   // n_x
    std::size_t meas = kMeasDim;     // n_z
    std::size_t hidden = 32;         // d_h
    std::size_t context = 16;        // d_p

    std::size_t weights() const { return 2 * state + 1; }
    friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

template <class T>
struct PolicyParamsT {
    PolicyDims dims;
    // innovation features
    T w_in, b_in, ln_in_gain, ln_in_bias;
    // GRU
    T w_u, w_r, w_h, u_u, u_r, u_h, b_u, b_r, b_h;
    // context projection
    T w_proj, b_proj, ln_proj_gain, ln_proj_bias;
    // weight heads
    T w_head_mean, b_head_mean, w_head_cov, b_head_cov;
    // auxiliary innovation decoder
    T w_aux, b_aux;

    /// Visits every tensor with a stable name, in a fixed order.
    template <class F>
    void for_each(F&& f) {
        visit(*this, std::forward<F>(f));
    }
    template <class F>
    void for_each(F&& f) const {
        visit(*this, std::forward<F>(f));
    }

private:
    template <class Self, class F>
    static void visit(Self& p, F&& f) {
        f("w_in", p.w_in);
        f("b_in", p.b_in);
        f("ln_in_gain", p.ln_in_gain);
        f("ln_in_bias", p.ln_in_bias);
        f("w_u", p.w_u);
        f("w_r", p.w_r);
        f("w_h", p.w_h);
        f("u_u", p.u_u);
        f("u_r", p.u_r);
        f("u_h", p.u_h);
        f("b_u", p.b_u);
        f("b_r", p.b_r);
        f("b_h", p.b_h);
        f("w_proj", p.w_proj);
        f("b_proj", p.b_proj);
        f("ln_proj_gain", p.ln_proj_gain);
        f("ln_proj_bias", p.ln_proj_bias);
        f("w_head_mean", p.w_head_mean);
        f("b_head_mean", p.b_head_mean);
        f("w_head_cov", p.w_head_cov);
        f("b_head_cov", p.b_head_cov);
        f("w_aux", p.w_aux);
        f("b_aux", p.b_aux);
    }
};

using PolicyParams = PolicyParamsT<Matrix>;

/// Expected shape of each named tensor.
inline std::pair<std::size_t, std::size_t> tensor_shape(const PolicyDims& d, const std::string& name) {
    const std::size_t h = d.hidden, p = d.context, w = d.weights();
    if (name == "w_in") return {h, d.meas};
    if (name == "b_in" || name == "ln_in_gain" || name == "ln_in_bias") return {h, 1};
    if (name == "w_u" || name == "w_r" || name == "w_h" || name == "u_u" || name == "u_r" ||
        name == "u_h")
        return {h, h};
    if (name == "b_u" || name == "b_r" || name == "b_h") return {h, 1};
    if (name == "w_proj") return {p, h};
    if (name == "b_proj" || name == "ln_proj_gain" || name == "ln_proj_bias") return {p, 1};
    if (name == "w_head_mean" || name == "w_head_cov") return {w, p};
    if (name == "b_head_mean" || name == "b_head_cov") return {w, 1};
    if (name == "w_aux") return {d.meas, p};
    if (name == "b_aux") return {d.meas, 1};
    throw std::invalid_argument("unknown policy tensor: " + name);
}

inline void validate(const PolicyParams& p) {
    p.for_each([&](const std::string& name, const Matrix& m) {
        const auto [r, c] = tensor_shape(p.dims, name);
        if (m.rows() != r || m.cols() != c) {
            throw ShapeError("policy tensor " + name + " has shape " + m.shape_string());
        }
        if (!all_finite(m)) throw NumericalError("policy tensor " + name + " is not finite");
    });
}

inline std::size_t parameter_count(const PolicyParams& p) {
    std::size_t n = 0;
    p.for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
    return n;
}

namespace detail {

// Orthogonal matrix from modified Gram-Schmidt (two passes) on a Gaussian draw.
inline Matrix random_orthogonal(std::size_t n, Rng& rng) {
    Matrix a(n, n);
    for (double& v : a.data()) v = rng.normal();
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t k = 0; k < j; ++k) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += a(i, k) * a(i, j);
                for (std::size_t i = 0; i < n; ++i) a(i, j) -= dot * a(i, k);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) a(i, j) /= norm;
    }
    return a;
}

inline Matrix fan_in_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-bound, bound);
    return m;
}

}  // namespace detail

/**
 * Fresh parameters. Input, gate-input, projection and decoder matrices are
 * U(-1/sqrt(fan_in), 1/sqrt(fan_in)); recurrent matrices are orthogonal;
 * biases are zero and LayerNorm gains one. The weight heads start at zero,
 * so an untrained policy emits uniform weights 1/(2n+1).
 */
inline PolicyParams init_params(Rng& rng, const PolicyDims& dims = {}) {
    if (dims.state == 0 || dims.meas == 0 || dims.hidden == 0 || dims.context == 0) {
        throw std::invalid_argument("init_params: dimensions must be positive");
    }
    const std::size_t h = dims.hidden, p = dims.context, w = dims.weights();
    PolicyParams q;
    q.dims = dims;
    q.w_in = detail::fan_in_uniform(h, dims.meas, rng);
    q.b_in = Matrix(h, 1);
    q.ln_in_gain = Matrix(h, 1, 1.0);
    q.ln_in_bias = Matrix(h, 1);
    q.w_u = detail::fan_in_uniform(h, h, rng);
    q.w_r = detail::fan_in_uniform(h, h, rng);
    q.w_h = detail::fan_in_uniform(h, h, rng);
    q.u_u = detail::random_orthogonal(h, rng);
    q.u_r = detail::random_orthogonal(h, rng);
    q.u_h = detail::random_orthogonal(h, rng);
    q.b_u = Matrix(h, 1);
    q.b_r = Matrix(h, 1);
    q.b_h = Matrix(h, 1);
    q.w_proj = detail::fan_in_uniform(p, h, rng);
    q.b_proj = Matrix(p, 1);
    q.ln_proj_gain = Matrix(p, 1, 1.0);
    q.ln_proj_bias = Matrix(p, 1);
    q.w_head_mean = Matrix(w, p);
    q.b_head_mean = Matrix(w, 1);
    q.w_head_cov = Matrix(w, p);
    q.b_head_cov = Matrix(w, 1);
    q.w_aux = detail::fan_in_uniform(dims.meas, p, rng);
    q.b_aux = Matrix(dims.meas, 1);
    return q;
}

/// Places every tensor on the tape as a differentiable leaf.
inline PolicyParamsT<ad::Var> to_tape(ad::Tape& tape, const PolicyParams& p) {
    PolicyParamsT<ad::Var> out;
    out.dims = p.dims;
    // Parallel visit: both structs enumerate tensors in the same order.
    std::vector<const Matrix*> src;
    p.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.for_each([&](const std::string&, ad::Var& v) { v = tape.variable(*src[i++]); });
    return out;
}

/// Runtime state carried between steps: hidden vector and last weights.
template <class T>
struct PolicyStateT {
    T hidden;       // d_h x 1
    T prev_mean;    // W^(m)_{k-1}, (2n+1) x 1
    T prev_cov;     // W^(c)_{k-1}
};
using PolicyState = PolicyStateT<Matrix>;

/// h_0 = 0 and uniform previous weights.
inline PolicyState initial_policy_state(const PolicyDims& dims) {
    const UTWeights u = uniform_weights(dims.state, 3.0);
    return {Matrix(dims.hidden, 1), u.mean, u.cov};
}

// ---------------------------------------------------------------------------
// Forward pieces (generic over Matrix / ad::Var)
// ---------------------------------------------------------------------------

/// z - sum_i W_{i,k-1}^(m) Z^i with the bearing residual wrapped.
template <class T, class W>
T proxy_innovation(const Matrix& z, const MeasurementImages<T>& measured, const W& prev_mean) {
    T nu = sub(z, measurement_mean(measured, prev_mean));
    return wrap_angle_row(nu, kBearing);
}

template <class T, class W>
T proxy_innovation(const Matrix& z, const T& measured, const W& prev_mean, const MeasurementOptions& opt = {}) {
    return proxy_innovation(z, measurement_images(measured, opt), prev_mean);
}

/// e = ReLU(LayerNorm(W_in nu + b_in))
template <class T>
T encode(const T& nu, const PolicyParamsT<T>& p) {
    return relu(layer_norm(add(matmul(p.w_in, nu), p.b_in), p.ln_in_gain, p.ln_in_bias));
}

template <class T>
T gru_step(const T& e, const T& h_prev, const PolicyParamsT<T>& p) {
    T update = sigmoid(add(add(matmul(p.w_u, e), matmul(p.u_u, h_prev)), p.b_u));
    T reset = sigmoid(add(add(matmul(p.w_r, e), matmul(p.u_r, h_prev)), p.b_r));
    T candidate = tanh(add(add(matmul(p.w_h, e), matmul(p.u_h, hadamard(reset, h_prev))), p.b_h));
    T keep = sub(Matrix::ones(value_of(update).rows(), 1), update);
    return add(hadamard(keep, h_prev), hadamard(update, candidate));
}

/// Tape-free GRU step. Performs the same floating-point operations in the
/// same order as the generic version, without the temporaries.
inline Matrix gru_step(const Matrix& e, const Matrix& h_prev, const PolicyParams& p) {
    const std::size_t n = h_prev.rows(), m = e.rows();
    if (p.w_u.rows() != n || p.w_u.cols() != m || p.u_u.cols() != n || h_prev.cols() != 1 || e.cols() != 1) {
        throw ShapeError("gru_step: shape mismatch");
    }
    const double* pe = e.data().data();
    const double* ph = h_prev.data().data();
    std::vector<double> buf(6 * n);
    double* we = buf.data();
    double* uh = we + n;
    double* update = uh + n;
    double* reset_h = update + n;
    double* wh = reset_h + n;
    double* urh = wh + n;
    Matrix out(n, 1);
    detail::matvec(p.w_u.data().data(), n, m, pe, we);
    detail::matvec(p.u_u.data().data(), n, n, ph, uh);
    for (std::size_t i = 0; i < n; ++i) update[i] = sigmoid_scalar((we[i] + uh[i]) + p.b_u[i]);
    detail::matvec(p.w_r.data().data(), n, m, pe, we);
    detail::matvec(p.u_r.data().data(), n, n, ph, uh);
    for (std::size_t i = 0; i < n; ++i) reset_h[i] = sigmoid_scalar((we[i] + uh[i]) + p.b_r[i]) * ph[i];
    detail::matvec(p.w_h.data().data(), n, m, pe, wh);
    detail::matvec(p.u_h.data().data(), n, n, reset_h, urh);
    for (std::size_t i = 0; i < n; ++i) {
        const double cand = std::tanh((wh[i] + urh[i]) + p.b_h[i]);
        out[i] = (1.0 - update[i]) * ph[i] + update[i] * cand;
    }
    require_finite(out, "gru_step");
    return out;
}

/// c = ReLU(LayerNorm(W_proj h + b_proj))
template <class T>
T project_context(const T& h, const PolicyParamsT<T>& p) {
    return relu(layer_norm(add(matmul(p.w_proj, h), p.b_proj), p.ln_proj_gain, p.ln_proj_bias));
}

template <class T>
struct WeightPair {
    T mean;
    T cov;
};

/// Softmax over each head's logits, returned as columns.
template <class T>
WeightPair<T> weight_heads(const T& context, const PolicyParamsT<T>& p) {
    auto head = [&](const T& w, const T& b) {
        T logits = add(matmul(w, context), b);
        return transpose(softmax_rows(transpose(logits)));
    };
    return {head(p.w_head_mean, p.b_head_mean), head(p.w_head_cov, p.b_head_cov)};
}

namespace detail {

// relu(layer_norm(W x + b)) without temporaries; same arithmetic as the
// composed kernels.
inline Matrix affine_norm_relu(const Matrix& w, const Matrix& b, const Matrix& gain, const Matrix& bias,
                               const Matrix& x) {
    if (w.cols() != x.rows() || x.cols() != 1 || b.rows() != w.rows() || gain.rows() != w.rows() ||
        bias.rows() != w.rows()) {
        throw ShapeError("affine_norm_relu: shape mismatch");
    }
    const std::size_t n = w.rows();
    Matrix out(n, 1);
    double* y = out.data().data();
    matvec(w.data().data(), n, w.cols(), x.data().data(), y);
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + b[i];
    const auto nd = static_cast<double>(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += y[i];
    mean /= nd;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (y[i] - mean) * (y[i] - mean);
    var /= nd;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = gain[i] * ((y[i] - mean) * inv_std) + bias[i];
        y[i] = v > 0.0 ? v : 0.0;
    }
    require_finite(out, "affine_norm_relu");
    return out;
}

inline Matrix softmax_head(const Matrix& w, const Matrix& b, const Matrix& c) {
    if (w.cols() != c.rows() || b.rows() != w.rows()) throw ShapeError("softmax_head: shape mismatch");
    const std::size_t n = w.rows();
    Matrix out(n, 1);
    double* y = out.data().data();
    matvec(w.data().data(), n, w.cols(), c.data().data(), y);
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + b[i];
    double mx = y[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, y[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::exp(y[i] - mx);
        total += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= total;
    require_finite(out, "softmax_head");
    return out;
}

}  // namespace detail

inline Matrix encode(const Matrix& nu, const PolicyParams& p) {
    return detail::affine_norm_relu(p.w_in, p.b_in, p.ln_in_gain, p.ln_in_bias, nu);
}

inline Matrix project_context(const Matrix& h, const PolicyParams& p) {
    return detail::affine_norm_relu(p.w_proj, p.b_proj, p.ln_proj_gain, p.ln_proj_bias, h);
}

inline WeightPair<Matrix> weight_heads(const Matrix& context, const PolicyParams& p) {
    return {detail::softmax_head(p.w_head_mean, p.b_head_mean, context),
            detail::softmax_head(p.w_head_cov, p.b_head_cov, context)};
}

/// g(c) = W_g c + b_g
template <class T>
T aux_decode(const T& context, const PolicyParamsT<T>& p) {
    return add(matmul(p.w_aux, context), p.b_aux);
}

/// Convex weights from a hidden state, spread gamma.
inline UTWeights synthesize_weights(const Matrix& hidden, const PolicyParams& p, double gamma = 3.0) {
    WeightPair<Matrix> w = weight_heads(project_context(hidden, p), p);
    return {std::move(w.mean), std::move(w.cov), gamma};
}

}  // namespace maukf
