// Reverse-mode automatic differentiation over dense matrices.
//
// Every primitive evaluates eagerly through the same kernels as the
// tape-free path (matrix.hpp), so a taped run reproduces a tape-free run
// bit for bit. A Tape is owned by one thread; record one per episode.
#pragma once

#include <array>
#include <cassert>
#include <concepts>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "maukf/matrix.hpp"

namespace maukf::ad {

using NodeId = std::size_t;

enum class Op : std::uint8_t {
    variable,
    constant,
    add,
    sub,
    scale,
    matmul,
    transpose,
    hadamard,
    tanh,
    sigmoid,
    relu,
    exp,
    sin,
    cos,
    sqrt,
    atan2,
    wrap_row,
    softmax_rows,
    layer_norm,
    cholesky,
    spd_solve,
    weighted_outer,
    concat_rows,
    concat_cols,
    slice,
    sum,
    col_map,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::variable: return "variable";
        case Op::constant: return "constant";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::scale: return "scale";
        case Op::matmul: return "matmul";
        case Op::transpose: return "transpose";
        case Op::hadamard: return "hadamard";
        case Op::tanh: return "tanh";
        case Op::sigmoid: return "sigmoid";
        case Op::relu: return "relu";
        case Op::exp: return "exp";
        case Op::sin: return "sin";
        case Op::cos: return "cos";
        case Op::sqrt: return "sqrt";
        case Op::atan2: return "atan2";
        case Op::wrap_row: return "wrap_row";
        case Op::softmax_rows: return "softmax_rows";
        case Op::layer_norm: return "layer_norm";
        case Op::cholesky: return "cholesky";
        case Op::spd_solve: return "spd_solve";
        case Op::weighted_outer: return "weighted_outer";
        case Op::concat_rows: return "concat_rows";
        case Op::concat_cols: return "concat_cols";
        case Op::slice: return "slice";
        case Op::sum: return "sum";
        case Op::col_map: return "col_map";
    }
    return "?";
}

struct Node {
    Op op = Op::constant;
    std::array<NodeId, 3> in{};
    std::uint8_t arity = 0;
    bool needs_grad = false;
    Matrix value;
    // layer_norm: normalized activations; spd_solve: Cholesky factor of A.
    Matrix aux;
    // scale: factor; layer_norm: inverse std; cholesky/spd_solve: jitter used.
    double scalar = 0.0;
    // slice: row0, col0; wrap_row: row.
    std::array<std::size_t, 2> index{};
    std::shared_ptr<const ColumnMap> map;
};

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Adjoints keyed by node id; shapes match the requested nodes.
class Gradients {
public:
    const Matrix& at(NodeId id) const { return grads_.at(id); }
    const Matrix& at(const Var& v) const { return grads_.at(v.id); }
    bool contains(NodeId id) const { return grads_.contains(id); }
    std::size_t size() const { return grads_.size(); }
    void set(NodeId id, Matrix m) { grads_[id] = std::move(m); }

private:
    std::unordered_map<NodeId, Matrix> grads_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// A differentiable leaf (parameter).
    Var variable(Matrix value) {
        Node n;
        n.op = Op::variable;
        n.needs_grad = true;
        n.value = std::move(value);
        return push(std::move(n));
    }

    /// A leaf that receives no gradient.
    Var constant(Matrix value) {
        Node n;
        n.op = Op::constant;
        n.value = std::move(value);
        return push(std::move(n));
    }

    /// Appends a node whose value has already been computed. Inputs must be
    /// earlier nodes.
    Var push(Node node) {
        const NodeId id = nodes_.size();
        for (std::uint8_t i = 0; i < node.arity; ++i) {
            if (node.in[i] >= id) throw std::logic_error("Tape: input references a later node");
            node.needs_grad = node.needs_grad || nodes_[node.in[i]].needs_grad;
        }
        nodes_.push_back(std::move(node));
        return Var{this, id};
    }

    const Node& node(NodeId id) const { return nodes_.at(id); }
    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Reverse sweep from a scalar loss. Nodes never reached get a zero adjoint.
    Gradients backward(const Var& loss, std::span<const Var> wanted) const;

    /// Graphviz description of the recorded graph.
    std::string dump_dot() const;

private:
    std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// ---------------------------------------------------------------------------
// Recording helpers
// ---------------------------------------------------------------------------

template <class T>
concept VarLike = std::same_as<std::remove_cvref_t<T>, Var>;

template <class T>
concept Operand = VarLike<T> || std::same_as<std::remove_cvref_t<T>, Matrix>;

template <class A, class B>
concept MixedOperands = Operand<A> && Operand<B> && (VarLike<A> || VarLike<B>);

namespace detail {

inline Tape* tape_of(const Var& v) { return v.tape; }
inline Tape* tape_of(const Matrix&) { return nullptr; }

template <class A, class B>
Tape& common_tape(const A& a, const B& b) {
    Tape* t = tape_of(a);
    Tape* u = tape_of(b);
    if (t != nullptr && u != nullptr && t != u) throw std::logic_error("operands on different tapes");
    return *(t != nullptr ? t : u);
}

inline Var lift(Tape&, const Var& v) { return v; }
inline Var lift(Tape& t, const Matrix& m) { return t.constant(m); }

inline Var record(Tape& t, Op op, Matrix value, std::initializer_list<NodeId> inputs) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.arity = static_cast<std::uint8_t>(inputs.size());
    std::size_t i = 0;
    for (NodeId id : inputs) n.in[i++] = id;
    return t.push(std::move(n));
}

}  // namespace detail

template <class A, class B>
    requires MixedOperands<A, B>
Var add(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::add, maukf::add(x.value(), y.value()), {x.id, y.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var sub(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::sub, maukf::sub(x.value(), y.value()), {x.id, y.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var matmul(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::matmul, maukf::matmul(x.value(), y.value()), {x.id, y.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var hadamard(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::hadamard, maukf::hadamard(x.value(), y.value()), {x.id, y.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var atan2(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var y = detail::lift(t, a), x = detail::lift(t, b);
    return detail::record(t, Op::atan2, maukf::atan2(y.value(), x.value()), {y.id, x.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var concat_rows(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::concat_rows, maukf::concat_rows(x.value(), y.value()),
                          {x.id, y.id});
}

template <class A, class B>
    requires MixedOperands<A, B>
Var concat_cols(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    return detail::record(t, Op::concat_cols, maukf::concat_cols(x.value(), y.value()),
                          {x.id, y.id});
}

inline Var scale(const Var& a, double s) {
    Node n;
    n.op = Op::scale;
    n.value = maukf::scale(a.value(), s);
    n.scalar = s;
    n.arity = 1;
    n.in[0] = a.id;
    return a.tape->push(std::move(n));
}

inline Var transpose(const Var& a) {
    return detail::record(*a.tape, Op::transpose, maukf::transpose(a.value()), {a.id});
}

inline Var tanh(const Var& a) {
    return detail::record(*a.tape, Op::tanh, maukf::tanh(a.value()), {a.id});
}
inline Var sigmoid(const Var& a) {
    return detail::record(*a.tape, Op::sigmoid, maukf::sigmoid(a.value()), {a.id});
}
inline Var relu(const Var& a) {
    return detail::record(*a.tape, Op::relu, maukf::relu(a.value()), {a.id});
}
inline Var exp(const Var& a) {
    return detail::record(*a.tape, Op::exp, maukf::exp(a.value()), {a.id});
}
inline Var sin(const Var& a) {
    return detail::record(*a.tape, Op::sin, maukf::sin(a.value()), {a.id});
}
inline Var cos(const Var& a) {
    return detail::record(*a.tape, Op::cos, maukf::cos(a.value()), {a.id});
}
inline Var sqrt(const Var& a) {
    return detail::record(*a.tape, Op::sqrt, maukf::sqrt(a.value()), {a.id});
}
inline Var softmax_rows(const Var& a) {
    return detail::record(*a.tape, Op::softmax_rows, maukf::softmax_rows(a.value()), {a.id});
}
inline Var sum_all(const Var& a) {
    return detail::record(*a.tape, Op::sum, maukf::sum_all(a.value()), {a.id});
}

inline Var wrap_angle_row(const Var& a, std::size_t row) {
    Node n;
    n.op = Op::wrap_row;
    n.value = maukf::wrap_angle_row(a.value(), row);
    n.arity = 1;
    n.in[0] = a.id;
    n.index[0] = row;
    return a.tape->push(std::move(n));
}

inline Var slice(const Var& a, std::size_t row0, std::size_t col0, std::size_t nrows,
                 std::size_t ncols) {
    Node n;
    n.op = Op::slice;
    n.value = maukf::slice(a.value(), row0, col0, nrows, ncols);
    n.arity = 1;
    n.in[0] = a.id;
    n.index = {row0, col0};
    return a.tape->push(std::move(n));
}

inline Var layer_norm(const Var& x, const Var& gain, const Var& bias,
                      double eps = kLayerNormEpsilon) {
    Node n;
    n.op = Op::layer_norm;
    LayerNormCache cache;
    n.value = maukf::layer_norm(x.value(), gain.value(), bias.value(), &cache, eps);
    n.aux = std::move(cache.normalized);
    n.scalar = cache.inv_std;
    n.arity = 3;
    n.in = {x.id, gain.id, bias.id};
    return x.tape->push(std::move(n));
}

/// Lower factor of M + eps*I; eps from the jitter ladder is treated as a
/// constant of the differentiated function.
inline Var cholesky(const Var& m, double jitter = 0.0) {
    Node n;
    n.op = Op::cholesky;
    CholeskyResult res = maukf::cholesky_spd(m.value(), jitter);
    n.value = std::move(res.lower);
    n.scalar = res.jitter;
    n.arity = 1;
    n.in[0] = m.id;
    return m.tape->push(std::move(n));
}

/// X = A^{-1} B for SPD A.
template <class A, class B>
    requires MixedOperands<A, B>
Var spd_solve(const A& a, const B& b) {
    Tape& t = detail::common_tape(a, b);
    Var x = detail::lift(t, a), y = detail::lift(t, b);
    Node n;
    n.op = Op::spd_solve;
    CholeskyResult factor;
    n.value = maukf::spd_solve(x.value(), y.value(), &factor);
    n.aux = std::move(factor.lower);
    n.scalar = factor.jitter;
    n.arity = 2;
    n.in = {x.id, y.id, 0};
    return t.push(std::move(n));
}

template <class D, class W, class E>
    requires Operand<D> && Operand<W> && Operand<E> &&
             (VarLike<D> || VarLike<W> || VarLike<E>)
Var weighted_outer(const D& d, const W& w, const E& e) {
    Tape* t = detail::tape_of(d);
    if (t == nullptr) t = detail::tape_of(w);
    if (t == nullptr) t = detail::tape_of(e);
    Var vd = detail::lift(*t, d), vw = detail::lift(*t, w), ve = detail::lift(*t, e);
    return detail::record(*t, Op::weighted_outer,
                          maukf::weighted_outer(vd.value(), vw.value(), ve.value()),
                          {vd.id, vw.id, ve.id});
}

inline Var col_map(const Var& x, std::shared_ptr<const ColumnMap> f) {
    Node n;
    n.op = Op::col_map;
    n.value = maukf::col_map(x.value(), *f);
    n.map = std::move(f);
    n.arity = 1;
    n.in[0] = x.id;
    return x.tape->push(std::move(n));
}

inline Var symmetrize(const Var& m) { return scale(add(m, transpose(m)), 0.5); }

inline const Matrix& value_of(const Var& v) { return v.value(); }

/// Cuts the gradient path: same value, recorded as a constant.
inline Var detach(const Var& v) { return v.tape->constant(v.value()); }

/// Places a constant on the same tape as `ref`.
inline Var lift_like(const Var& ref, Matrix m) { return ref.tape->constant(std::move(m)); }

template <class A, class B>
    requires MixedOperands<A, B>
Var operator+(const A& a, const B& b) { return add(a, b); }
template <class A, class B>
    requires MixedOperands<A, B>
Var operator-(const A& a, const B& b) { return sub(a, b); }
template <class A, class B>
    requires MixedOperands<A, B>
Var operator*(const A& a, const B& b) { return matmul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

namespace detail {

inline void accumulate(Matrix& slot, const Matrix& g) {
    if (slot.empty()) {
        slot = g;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

// Sensitivity of M for L = chol(sym(M)): sym(L^{-T} Phi(L^T Lbar) L^{-1}),
// Phi taking the lower triangle with the diagonal halved.
inline Matrix cholesky_backward(const Matrix& lower, const Matrix& lbar) {
    const std::size_t n = lower.rows();
    Matrix phi = maukf::matmul(maukf::transpose(lower), lbar);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) phi(i, j) = 0.0;
        phi(i, i) *= 0.5;
    }
    Matrix left = maukf::solve_lower_transposed(lower, phi);                // L^{-T} Phi
    Matrix s = maukf::transpose(maukf::solve_lower_transposed(lower, maukf::transpose(left)));
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = 0.5 * (s(i, j) + s(j, i));
    return out;
}

}  // namespace detail

inline Gradients Tape::backward(const Var& loss, std::span<const Var> wanted) const {
    if (loss.tape != this) throw std::logic_error("backward: loss on another tape");
    const Node& ln = nodes_.at(loss.id);
    if (ln.value.rows() != 1 || ln.value.cols() != 1) {
        throw ShapeError("backward: loss must be 1x1, got " + ln.value.shape_string());
    }
    std::vector<Matrix> adj(loss.id + 1);
    adj[loss.id] = Matrix(1, 1, 1.0);

    using detail::accumulate;
    for (NodeId id = loss.id + 1; id-- > 0;) {
        const Node& n = nodes_[id];
        if (adj[id].empty() || !n.needs_grad) continue;
        const Matrix& g = adj[id];
        auto wants = [&](int k) { return nodes_[n.in[k]].needs_grad; };
        auto in_value = [&](int k) -> const Matrix& { return nodes_[n.in[k]].value; };
        assert(n.arity == 0 || n.in[0] < id);

        switch (n.op) {
            case Op::variable:
            case Op::constant:
                break;
            case Op::add:
                if (wants(0)) accumulate(adj[n.in[0]], g);
                if (wants(1)) accumulate(adj[n.in[1]], g);
                break;
            case Op::sub:
                if (wants(0)) accumulate(adj[n.in[0]], g);
                if (wants(1)) accumulate(adj[n.in[1]], maukf::scale(g, -1.0));
                break;
            case Op::scale:
                accumulate(adj[n.in[0]], maukf::scale(g, n.scalar));
                break;
            case Op::matmul:
                if (wants(0)) accumulate(adj[n.in[0]], maukf::matmul(g, maukf::transpose(in_value(1))));
                if (wants(1)) accumulate(adj[n.in[1]], maukf::matmul(maukf::transpose(in_value(0)), g));
                break;
            case Op::transpose:
                accumulate(adj[n.in[0]], maukf::transpose(g));
                break;
            case Op::hadamard:
                if (wants(0)) accumulate(adj[n.in[0]], maukf::hadamard(g, in_value(1)));
                if (wants(1)) accumulate(adj[n.in[1]], maukf::hadamard(g, in_value(0)));
                break;
            case Op::tanh: {
                Matrix d(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (1.0 - n.value[i] * n.value[i]);
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::sigmoid: {
                Matrix d(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * n.value[i] * (1.0 - n.value[i]);
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::relu: {
                Matrix d(g.rows(), g.cols());
                const Matrix& x = in_value(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = x[i] > 0.0 ? g[i] : 0.0;
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::exp:
                accumulate(adj[n.in[0]], maukf::hadamard(g, n.value));
                break;
            case Op::sin: {
                Matrix d(g.rows(), g.cols());
                const Matrix& x = in_value(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * std::cos(x[i]);
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::cos: {
                Matrix d(g.rows(), g.cols());
                const Matrix& x = in_value(0);
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] * std::sin(x[i]);
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::sqrt: {
                Matrix d(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * 0.5 / n.value[i];
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::atan2: {
                const Matrix& y = in_value(0);
                const Matrix& x = in_value(1);
                Matrix dy(g.rows(), g.cols()), dx(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double r2 = x[i] * x[i] + y[i] * y[i];
                    dy[i] = g[i] * x[i] / r2;
                    dx[i] = -g[i] * y[i] / r2;
                }
                if (wants(0)) accumulate(adj[n.in[0]], dy);
                if (wants(1)) accumulate(adj[n.in[1]], dx);
                break;
            }
            case Op::wrap_row:
                accumulate(adj[n.in[0]], g);
                break;
            case Op::softmax_rows: {
                const Matrix& y = n.value;
                Matrix d(g.rows(), g.cols());
                for (std::size_t r = 0; r < y.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                    for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) = y(r, c) * (g(r, c) - dot);
                }
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::layer_norm: {
                const Matrix& xhat = n.aux;
                const Matrix& gain = in_value(1);
                if (wants(1)) accumulate(adj[n.in[1]], maukf::hadamard(g, xhat));
                if (wants(2)) accumulate(adj[n.in[2]], g);
                if (wants(0)) {
                    const auto count = static_cast<double>(g.size());
                    Matrix gx(g.rows(), g.cols());
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        gx[i] = g[i] * gain[i];
                        mean_g += gx[i];
                        mean_gx += gx[i] * xhat[i];
                    }
                    mean_g /= count;
                    mean_gx /= count;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                        gx[i] = n.scalar * (gx[i] - mean_g - xhat[i] * mean_gx);
                    }
                    accumulate(adj[n.in[0]], gx);
                }
                break;
            }
            case Op::cholesky:
                accumulate(adj[n.in[0]], detail::cholesky_backward(n.value, g));
                break;
            case Op::spd_solve: {
                Matrix bbar = maukf::cholesky_solve(n.aux, g);
                if (wants(1)) accumulate(adj[n.in[1]], bbar);
                if (wants(0)) {
                    Matrix abar = maukf::matmul(bbar, maukf::transpose(n.value));
                    Matrix sym(abar.rows(), abar.cols());
                    for (std::size_t i = 0; i < abar.rows(); ++i)
                        for (std::size_t j = 0; j < abar.cols(); ++j)
                            sym(i, j) = -0.5 * (abar(i, j) + abar(j, i));
                    accumulate(adj[n.in[0]], sym);
                }
                break;
            }
            case Op::weighted_outer: {
                const Matrix& d = in_value(0);
                const Matrix& w = in_value(1);
                const Matrix& e = in_value(2);
                const std::size_t pts = d.cols();
                if (wants(0)) {
                    Matrix dd(d.rows(), pts);
                    for (std::size_t i = 0; i < pts; ++i)
                        for (std::size_t r = 0; r < d.rows(); ++r) {
                            double s = 0.0;
                            for (std::size_t c = 0; c < e.rows(); ++c) s += g(r, c) * e(c, i);
                            dd(r, i) = w[i] * s;
                        }
                    accumulate(adj[n.in[0]], dd);
                }
                if (wants(2)) {
                    Matrix de(e.rows(), pts);
                    for (std::size_t i = 0; i < pts; ++i)
                        for (std::size_t c = 0; c < e.rows(); ++c) {
                            double s = 0.0;
                            for (std::size_t r = 0; r < d.rows(); ++r) s += g(r, c) * d(r, i);
                            de(c, i) = w[i] * s;
                        }
                    accumulate(adj[n.in[2]], de);
                }
                if (wants(1)) {
                    Matrix dw(w.rows(), w.cols());
                    for (std::size_t i = 0; i < pts; ++i) {
                        double s = 0.0;
                        for (std::size_t r = 0; r < d.rows(); ++r)
                            for (std::size_t c = 0; c < e.rows(); ++c) s += d(r, i) * g(r, c) * e(c, i);
                        dw[i] = s;
                    }
                    accumulate(adj[n.in[1]], dw);
                }
                break;
            }
            case Op::concat_rows: {
                const std::size_t top = in_value(0).rows();
                if (wants(0)) accumulate(adj[n.in[0]], maukf::slice(g, 0, 0, top, g.cols()));
                if (wants(1)) accumulate(adj[n.in[1]], maukf::slice(g, top, 0, g.rows() - top, g.cols()));
                break;
            }
            case Op::concat_cols: {
                const std::size_t left = in_value(0).cols();
                if (wants(0)) accumulate(adj[n.in[0]], maukf::slice(g, 0, 0, g.rows(), left));
                if (wants(1)) accumulate(adj[n.in[1]], maukf::slice(g, 0, left, g.rows(), g.cols() - left));
                break;
            }
            case Op::slice: {
                const Matrix& x = in_value(0);
                Matrix d(x.rows(), x.cols());
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        d(n.index[0] + r, n.index[1] + c) = g(r, c);
                accumulate(adj[n.in[0]], d);
                break;
            }
            case Op::sum: {
                const Matrix& x = in_value(0);
                accumulate(adj[n.in[0]], Matrix(x.rows(), x.cols(), g[0]));
                break;
            }
            case Op::col_map: {
                const Matrix& x = in_value(0);
                const ColumnMap& f = *n.map;
                Matrix d(x.rows(), x.cols());
                std::vector<double> in(f.in_dim), jac(f.in_dim * f.out_dim);
                for (std::size_t c = 0; c < x.cols(); ++c) {
                    for (std::size_t r = 0; r < f.in_dim; ++r) in[r] = x(r, c);
                    f.jacobian(in.data(), jac.data());
                    for (std::size_t j = 0; j < f.in_dim; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < f.out_dim; ++i) s += jac[i * f.in_dim + j] * g(i, c);
                        d(j, c) = s;
                    }
                }
                accumulate(adj[n.in[0]], d);
                break;
            }
        }
    }

    Gradients out;
    for (const Var& w : wanted) {
        const Matrix& v = nodes_.at(w.id).value;
        if (w.id <= loss.id && !adj[w.id].empty()) {
            out.set(w.id, adj[w.id]);
        } else {
            out.set(w.id, Matrix(v.rows(), v.cols()));
        }
    }
    return out;
}

inline std::string Tape::dump_dot() const {
    std::ostringstream os;
    os << "digraph tape {\n";
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        os << "  n" << id << " [label=\"" << id << ": " << op_name(n.op) << " "
           << n.value.shape_string();
        if (n.op == Op::col_map && n.map) os << " " << n.map->name;
        if (n.needs_grad) os << " *";
        os << "\"];\n";
        for (std::uint8_t i = 0; i < n.arity; ++i) os << "  n" << n.in[i] << " -> n" << id << ";\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace maukf::ad
