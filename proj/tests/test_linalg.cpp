#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "maukf/matrix.hpp"
#include "maukf/rng.hpp"

using namespace maukf;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

Matrix random_spd(Rng& rng, std::size_t n) {
    const Matrix a = random_matrix(rng, n, n);
    return add(matmul(a, transpose(a)), scale(Matrix::identity(n), 0.5));
}

/// Textbook triple loop, one accumulator.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

}  // namespace

TEST(Matrix, ConstructionAndShape) {
    const Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_EQ(m(1, 2), 6.0);
    EXPECT_THROW(Matrix(2, 2, {1.0, 2.0}), ShapeError);
    EXPECT_EQ(Matrix::identity(3)(1, 1), 1.0);
    EXPECT_EQ(Matrix::diagonal({2.0, 3.0})(1, 1), 3.0);
}

TEST(Matrix, ShapeMismatchThrows) {
    EXPECT_THROW(add(Matrix(2, 2), Matrix(2, 3)), ShapeError);
    EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
}

TEST(Matrix, MatmulMatchesNaiveLoop) {
    Rng rng(1);
    for (auto [m, k, n] : {std::tuple{1, 7, 1}, {5, 5, 5}, {3, 11, 1}, {33, 16, 1}, {4, 9, 6}, {7, 1, 3}}) {
        const Matrix a = random_matrix(rng, m, k), b = random_matrix(rng, k, n);
        EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
    }
}

TEST(Matrix, MatvecKernelAgreesWithDot) {
    Rng rng(2);
    for (std::size_t n : {1u, 3u, 4u, 7u, 32u, 33u}) {
        for (std::size_t k : {1u, 2u, 5u, 16u}) {
            const Matrix a = random_matrix(rng, n, k), x = random_matrix(rng, k, 1);
            Matrix y(n, 1);
            detail::matvec(a.data().data(), n, k, x.data().data(), y.data().data());
            for (std::size_t i = 0; i < n; ++i)
                EXPECT_EQ(y[i], detail::dot2(a.data().data() + i * k, x.data().data(), k));
        }
    }
}

TEST(Matrix, ElementwiseAndTranspose) {
    const Matrix a(2, 2, {1, -2, 3, -4});
    EXPECT_EQ(transpose(a)(0, 1), 3.0);
    EXPECT_EQ(relu(a)(0, 1), 0.0);
    EXPECT_EQ(hadamard(a, a)(1, 1), 16.0);
    EXPECT_DOUBLE_EQ(sigmoid(a)(0, 0), 1.0 / (1.0 + std::exp(-1.0)));
    EXPECT_EQ(sum_all(a)[0], -2.0);
}

TEST(Matrix, WrapAngle) {
    EXPECT_DOUBLE_EQ(wrap_angle(3 * std::numbers::pi / 2), -std::numbers::pi / 2);
    EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
    EXPECT_DOUBLE_EQ(wrap_angle(0.25), 0.25);
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = rng.uniform(-50.0, 50.0), w = wrap_angle(a);
        EXPECT_GT(w, -std::numbers::pi);
        EXPECT_LE(w, std::numbers::pi);
        EXPECT_NEAR(std::remainder(a - w, 2 * std::numbers::pi), 0.0, 1e-9);
    }
}

TEST(Matrix, SoftmaxIsStableAndNormalized) {
    const Matrix a(2, 3, {1000.0, 1001.0, 1002.0, -5.0, 0.0, 5.0});
    const Matrix s = softmax_rows(a);
    for (std::size_t r = 0; r < 2; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_TRUE(std::isfinite(s(r, c)));
            sum += s(r, c);
        }
        EXPECT_NEAR(sum, 1.0, 1e-15);
    }
    const double e = std::exp(1.0);
    EXPECT_NEAR(s(0, 2), e * e / (1 + e + e * e), 1e-15);
}

TEST(Matrix, LayerNormAgainstHandComputation) {
    const Matrix x = Matrix::column({1.0, 2.0, 4.0, 9.0});
    const Matrix g = Matrix::column({1.0, 2.0, 0.5, -1.0});
    const Matrix b = Matrix::column({0.0, 0.1, 0.2, 0.3});
    const double mean = 4.0, var = (9.0 + 4.0 + 0.0 + 25.0) / 4.0;
    const Matrix y = layer_norm(x, g, b);
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_NEAR(y[i], g[i] * (x[i] - mean) / std::sqrt(var + kLayerNormEpsilon) + b[i], 1e-14);
}

TEST(Cholesky, ReconstructsRandomSpd) {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const Matrix a = random_spd(rng, 5);
        const CholeskyResult c = cholesky_spd(a);
        EXPECT_EQ(c.jitter, 0.0);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i + 1; j < 5; ++j) EXPECT_EQ(c.lower(i, j), 0.0);
        EXPECT_LT(max_abs_diff(matmul(c.lower, transpose(c.lower)), a), 1e-12 * frobenius_norm(a));
    }
}

TEST(Cholesky, JitterLadderRescuesSemidefinite) {
    const Matrix v = Matrix::column({1.0, 2.0, 3.0});
    const Matrix rank1 = matmul(v, transpose(v));
    const CholeskyResult c = cholesky_spd(rank1);
    EXPECT_GT(c.jitter, 0.0);
    EXPECT_TRUE(all_finite(c.lower));
}

TEST(Cholesky, IndefiniteAndNonFiniteFail) {
    EXPECT_THROW(cholesky_spd(Matrix::diagonal({1.0, -1.0})), CovarianceCollapse);
    Matrix bad = Matrix::identity(2);
    bad(0, 0) = std::nan("");
    EXPECT_THROW(cholesky_spd(bad), NumericalError);
    EXPECT_THROW(cholesky_spd(Matrix(2, 2, {1.0, 0.5, 0.0, 1.0})), ShapeError);
}

TEST(Cholesky, SolvesAgainstResidual) {
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = random_spd(rng, 6);
        const Matrix b = random_matrix(rng, 6, 3);
        const Matrix x = spd_solve(a, b);
        EXPECT_LT(max_abs_diff(matmul(a, x), b), 1e-10);
        const Matrix l = cholesky(a);
        EXPECT_LT(max_abs_diff(matmul(l, solve_lower(l, b)), b), 1e-12);
        EXPECT_LT(max_abs_diff(matmul(transpose(l), solve_lower_transposed(l, b)), b), 1e-12);
    }
}

TEST(Cholesky, PsdFactorOfSingularMatrix) {
    Matrix q(3, 3);
    q(0, 0) = 4.0;
    q(0, 2) = q(2, 0) = 2.0;
    q(2, 2) = 1.0;
    const Matrix l = psd_factor(q);
    EXPECT_LT(max_abs_diff(matmul(l, transpose(l)), q), 1e-14);
}

TEST(Matrix, WeightedOuterMatchesSum) {
    Rng rng(6);
    const Matrix d = random_matrix(rng, 3, 4), e = random_matrix(rng, 2, 4), w = random_matrix(rng, 4, 1);
    Matrix ref(3, 2);
    for (std::size_t i = 0; i < 4; ++i) ref = add(ref, scale(matmul(d.col(i), transpose(e.col(i))), w[i]));
    EXPECT_LT(max_abs_diff(weighted_outer(d, w, e), ref), 1e-13);
}

TEST(Matrix, ConcatAndSlice) {
    const Matrix a(1, 2, {1, 2}), b(1, 2, {3, 4});
    const Matrix r = concat_rows(a, b);
    EXPECT_EQ(r(1, 0), 3.0);
    EXPECT_EQ(concat_cols(a, b)(0, 3), 4.0);
    EXPECT_EQ(slice(r, 1, 1, 1, 1)[0], 4.0);
    EXPECT_THROW(slice(r, 1, 1, 2, 1), ShapeError);
}
