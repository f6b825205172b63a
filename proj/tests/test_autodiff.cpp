#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "maukf/gradcheck.hpp"
#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/rng.hpp"
#include "maukf/tape.hpp"

using namespace maukf;
using ad::Tape;
using ad::Var;

namespace {

constexpr int kTrials = 100;
constexpr double kTol = 1e-5;

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

Matrix random_spd(Rng& rng, std::size_t n) {
    const Matrix a = random_matrix(rng, n, n);
    return symmetrize(add(matmul(a, transpose(a)), scale(Matrix::identity(n), 0.5)));
}

/**
 * Compares taped gradients of L = sum(f(inputs) .* C) with central
 * differences. Inputs flagged symmetric are perturbed in symmetric pairs,
 * matching the directional derivative along E_ij + E_ji.
 */
template <class F>
double gradient_error(F f, const std::vector<Matrix>& inputs, Rng& rng, std::vector<bool> symmetric = {}) {
    symmetric.resize(inputs.size(), false);
    const Matrix out = f(inputs);
    const Matrix weights = random_matrix(rng, out.rows(), out.cols());

    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.variable(m));
    const Var loss = sum_all(hadamard(f(vars), weights));
    const ad::Gradients g = tape.backward(loss, vars);

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto eval = [&](const Matrix& xi) {
            std::vector<Matrix> in = inputs;
            in[i] = xi;
            return sum_all(hadamard(f(in), weights))[0];
        };
        const Matrix& taped = g.at(vars[i]);
        if (!symmetric[i]) {
            worst = std::max(worst, max_relative_error(taped, central_difference(eval, inputs[i]), 1e-6));
            continue;
        }
        const std::size_t n = inputs[i].rows();
        const double h = 1e-6;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = r; c < n; ++c) {
                Matrix up = inputs[i], down = inputs[i];
                up(r, c) += h, down(r, c) -= h;
                if (r != c) up(c, r) += h, down(c, r) -= h;
                const double fd = (eval(up) - eval(down)) / (2 * h);
                const double ad_val = r == c ? taped(r, r) : taped(r, c) + taped(c, r);
                worst = std::max(worst, std::abs(fd - ad_val) / std::max({std::abs(fd), std::abs(ad_val), 1e-6}));
            }
    }
    return worst;
}

/// Runs `trials` random instances produced by `make` and returns the worst error.
template <class F, class Make>
double worst_over_trials(F f, Make make, std::vector<bool> symmetric = {}) {
    Rng rng(12345);
    double worst = 0.0;
    for (int t = 0; t < kTrials; ++t) worst = std::max(worst, gradient_error(f, make(rng), rng, symmetric));
    return worst;
}

#define UNARY(expr) [](const auto& v) { return expr; }

}  // namespace

TEST(AutodiffFd, Add) {
    EXPECT_LT(worst_over_trials(UNARY(add(v[0], v[1])),
                                [](Rng& r) { return std::vector{random_matrix(r, 3, 4), random_matrix(r, 3, 4)}; }),
              kTol);
}

TEST(AutodiffFd, Sub) {
    EXPECT_LT(worst_over_trials(UNARY(sub(v[0], v[1])),
                                [](Rng& r) { return std::vector{random_matrix(r, 2, 5), random_matrix(r, 2, 5)}; }),
              kTol);
}

TEST(AutodiffFd, Scale) {
    EXPECT_LT(worst_over_trials(UNARY(scale(v[0], -1.7)), [](Rng& r) { return std::vector{random_matrix(r, 4, 2)}; }),
              kTol);
}

TEST(AutodiffFd, Hadamard) {
    EXPECT_LT(worst_over_trials(UNARY(hadamard(v[0], v[1])),
                                [](Rng& r) { return std::vector{random_matrix(r, 3, 3), random_matrix(r, 3, 3)}; }),
              kTol);
}

TEST(AutodiffFd, Matmul) {
    EXPECT_LT(worst_over_trials(UNARY(matmul(v[0], v[1])),
                                [](Rng& r) { return std::vector{random_matrix(r, 4, 3), random_matrix(r, 3, 2)}; }),
              kTol);
    EXPECT_LT(worst_over_trials(UNARY(matmul(v[0], v[1])),
                                [](Rng& r) { return std::vector{random_matrix(r, 9, 7), random_matrix(r, 7, 1)}; }),
              kTol);
}

TEST(AutodiffFd, Transpose) {
    EXPECT_LT(worst_over_trials(UNARY(transpose(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 2, 5)}; }),
              kTol);
}

TEST(AutodiffFd, Tanh) {
    EXPECT_LT(worst_over_trials(UNARY(tanh(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 6, 1, -3, 3)}; }),
              kTol);
}

TEST(AutodiffFd, Sigmoid) {
    EXPECT_LT(worst_over_trials(UNARY(sigmoid(v[0])),
                                [](Rng& r) { return std::vector{random_matrix(r, 6, 1, -4, 4)}; }),
              kTol);
}

TEST(AutodiffFd, ReluAwayFromKink) {
    auto make = [](Rng& r) {
        Matrix m = random_matrix(r, 8, 1, 0.01, 2.0);
        for (double& v : m.data())
            if (r.uniform() < 0.5) v = -v;
        return std::vector{m};
    };
    EXPECT_LT(worst_over_trials(UNARY(relu(v[0])), make), kTol);
}

TEST(AutodiffFd, Exp) {
    EXPECT_LT(worst_over_trials(UNARY(exp(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 3, 2, -2, 2)}; }),
              kTol);
}

TEST(AutodiffFd, SinCos) {
    auto make = [](Rng& r) { return std::vector{random_matrix(r, 5, 1, -4, 4)}; };
    EXPECT_LT(worst_over_trials(UNARY(sin(v[0])), make), kTol);
    EXPECT_LT(worst_over_trials(UNARY(cos(v[0])), make), kTol);
}

TEST(AutodiffFd, Sqrt) {
    EXPECT_LT(worst_over_trials(UNARY(sqrt(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 4, 1, 0.2, 5)}; }),
              kTol);
}

TEST(AutodiffFd, Atan2) {
    auto make = [](Rng& r) {
        Matrix y = random_matrix(r, 4, 1), x = random_matrix(r, 4, 1);
        for (std::size_t i = 0; i < 4; ++i)
            if (std::hypot(x[i], y[i]) < 0.1) x[i] += 0.5;
        // Keep clear of the branch cut on the negative x axis.
        for (std::size_t i = 0; i < 4; ++i)
            if (x[i] < 0 && std::abs(y[i]) < 1e-3) y[i] = 0.1;
        return std::vector{y, x};
    };
    EXPECT_LT(worst_over_trials(UNARY(atan2(v[0], v[1])), make), kTol);
}

TEST(AutodiffFd, WrapAngleRow) {
    auto make = [](Rng& r) {
        Matrix m = random_matrix(r, 2, 3, -9, 9);
        for (double& v : m.data())
            if (std::abs(std::remainder(v - std::numbers::pi, 2 * std::numbers::pi)) < 1e-3) v += 0.01;
        return std::vector{m};
    };
    EXPECT_LT(worst_over_trials(UNARY(wrap_angle_row(v[0], 1)), make), kTol);
}

TEST(AutodiffFd, SoftmaxRows) {
    EXPECT_LT(worst_over_trials(UNARY(softmax_rows(v[0])),
                                [](Rng& r) { return std::vector{random_matrix(r, 2, 11, -3, 3)}; }),
              kTol);
}

TEST(AutodiffFd, LayerNorm) {
    auto make = [](Rng& r) {
        return std::vector{random_matrix(r, 16, 1, -2, 2), random_matrix(r, 16, 1), random_matrix(r, 16, 1)};
    };
    EXPECT_LT(worst_over_trials(UNARY(layer_norm(v[0], v[1], v[2])), make), kTol);
}

TEST(AutodiffFd, ConcatAndSlice) {
    auto make = [](Rng& r) { return std::vector{random_matrix(r, 2, 3), random_matrix(r, 1, 3)}; };
    EXPECT_LT(worst_over_trials(UNARY(concat_rows(v[0], v[1])), make), kTol);
    auto make_c = [](Rng& r) { return std::vector{random_matrix(r, 2, 3), random_matrix(r, 2, 2)}; };
    EXPECT_LT(worst_over_trials(UNARY(concat_cols(v[0], v[1])), make_c), kTol);
    EXPECT_LT(worst_over_trials(UNARY(slice(v[0], 1, 1, 2, 2)), [](Rng& r) { return std::vector{random_matrix(r, 3, 4)}; }),
              kTol);
}

TEST(AutodiffFd, SumAll) {
    EXPECT_LT(worst_over_trials(UNARY(sum_all(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 3, 3)}; }),
              kTol);
}

TEST(AutodiffFd, WeightedOuter) {
    auto make = [](Rng& r) {
        return std::vector{random_matrix(r, 5, 11), random_matrix(r, 11, 1), random_matrix(r, 2, 11)};
    };
    EXPECT_LT(worst_over_trials(UNARY(weighted_outer(v[0], v[1], v[2])), make), kTol);
}

TEST(AutodiffFd, CholeskySymmetricPerturbation) {
    EXPECT_LT(worst_over_trials(UNARY(cholesky(v[0])), [](Rng& r) { return std::vector{random_spd(r, 5)}; }, {true}),
              kTol);
}

TEST(AutodiffFd, SpdSolve) {
    auto make = [](Rng& r) { return std::vector{random_spd(r, 4), random_matrix(r, 4, 3)}; };
    EXPECT_LT(worst_over_trials(UNARY(spd_solve(v[0], v[1])), make, {true, false}), kTol);
}

TEST(AutodiffFd, Symmetrize) {
    EXPECT_LT(worst_over_trials(UNARY(symmetrize(v[0])), [](Rng& r) { return std::vector{random_matrix(r, 3, 3)}; }),
              kTol);
}

TEST(AutodiffFd, ColumnMapsUseTheirJacobians) {
    const auto radar = radar_map();
    const auto ct = transition_map(MotionModel::coordinated_turn, 0.1);
    // Unit-scale states keep the fixed FD step well conditioned.
    auto make_states = [](Rng& r) {
        Matrix x(kStateDim, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            x(kPx, c) = r.uniform(0.5, 5) * (r.uniform() < 0.5 ? -1 : 1);
            x(kVx, c) = r.uniform(-3, 3);
            x(kPy, c) = r.uniform(0.5, 5);
            x(kVy, c) = r.uniform(-3, 3);
            x(kOmega, c) = c == 0 ? r.uniform(-1e-5, 1e-5) : r.uniform(-0.5, 0.5);
        }
        return std::vector{x};
    };
    EXPECT_LT(worst_over_trials([&](const auto& v) { return col_map(v[0], radar); }, make_states), kTol);
    EXPECT_LT(worst_over_trials([&](const auto& v) { return col_map(v[0], ct); }, make_states), kTol);
}

TEST(Tape, ComposedExpressionAndUnusedInputs) {
    Rng rng(9);
    auto f = [](const auto& v) { return tanh(add(matmul(v[0], v[1]), v[2])); };
    for (int t = 0; t < 20; ++t) {
        const std::vector<Matrix> in{random_matrix(rng, 3, 3), random_matrix(rng, 3, 1), random_matrix(rng, 3, 1)};
        EXPECT_LT(gradient_error(f, in, rng), kTol);
    }
    Tape tape;
    const Var a = tape.variable(Matrix(2, 2, 1.0));
    const Var b = tape.variable(Matrix(1, 3, 1.0));
    const Var loss = sum_all(a);
    const std::vector<Var> wanted{a, b};
    const ad::Gradients g = tape.backward(loss, wanted);
    EXPECT_EQ(g.at(b), Matrix(1, 3, 0.0));
    EXPECT_EQ(g.at(a), Matrix(2, 2, 1.0));
}

TEST(Tape, DetachBlocksGradient) {
    Tape tape;
    const Var a = tape.variable(Matrix(1, 1, 2.0));
    const Var loss = hadamard(a, ad::detach(a));
    const std::vector<Var> wanted{a};
    EXPECT_DOUBLE_EQ(tape.backward(loss, wanted).at(a)[0], 2.0);
}

TEST(Tape, EagerAndTapedValuesAgree) {
    Rng rng(10);
    const Matrix x = random_matrix(rng, 4, 4);
    const Matrix spd = random_spd(rng, 4);
    Tape tape;
    const Var vx = tape.variable(x), vs = tape.variable(spd);
    EXPECT_EQ(softmax_rows(vx).value(), softmax_rows(x));
    EXPECT_EQ(cholesky(vs).value(), cholesky(spd));
    EXPECT_EQ(matmul(vx, vs).value(), matmul(x, spd));
}
