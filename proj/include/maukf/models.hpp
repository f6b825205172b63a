// Coordinated-turn kinematics and the range-bearing radar, with analytic
// Jacobians for the differentiable filter.
#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <numbers>

#include "maukf/matrix.hpp"

namespace maukf {

inline constexpr std::size_t kStateDim = 5;
inline constexpr std::size_t kMeasDim = 2;
inline constexpr std::size_t kSigmaCount = 2 * kStateDim + 1;

/// [p_x, v_x, p_y, v_y, omega]
using State = std::array<double, kStateDim>;
/// [range, bearing]
using Measurement = std::array<double, kMeasDim>;

enum StateIndex : std::size_t { kPx = 0, kVx = 1, kPy = 2, kVy = 3, kOmega = 4 };
enum MeasIndex : std::size_t { kRange = 0, kBearing = 1 };

inline Matrix to_column(const State& x) { return Matrix::column(std::span<const double>(x)); }
inline Matrix to_column(const Measurement& z) { return Matrix::column(std::span<const double>(z)); }

inline State state_from_column(const Matrix& m, std::size_t col = 0) {
    State x{};
    for (std::size_t i = 0; i < kStateDim; ++i) x[i] = m(i, col);
    return x;
}

namespace detail {

// Below this |omega*dt| the turn coefficients use their Taylor series.
inline constexpr double kTurnSeriesThreshold = 1e-4;

// sin(th)/th, (1-cos th)/th and their derivatives in th.
struct TurnCoefficients {
    double sinc;     // sin(th)/th
    double cosc;     // (1-cos(th))/th
    double dsinc;    // d/dth sin(th)/th
    double dcosc;    // d/dth (1-cos(th))/th
};

inline TurnCoefficients turn_coefficients(double th) {
    if (std::abs(th) < kTurnSeriesThreshold) {
        const double t2 = th * th;
        return {1.0 - t2 / 6.0 + t2 * t2 / 120.0,
                th / 2.0 - th * t2 / 24.0 + th * t2 * t2 / 720.0,
                -th / 3.0 + th * t2 / 30.0,
                0.5 - t2 / 8.0 + t2 * t2 / 144.0};
    }
    const double s = std::sin(th), c = std::cos(th);
    return {s / th, (1.0 - c) / th, (th * c - s) / (th * th), (th * s - (1.0 - c)) / (th * th)};
}

inline void ct_apply(const double* x, double dt, double* out) {
    const double w = x[kOmega];
    const double th = w * dt;
    const TurnCoefficients k = turn_coefficients(th);
    const double s = std::sin(th), c = std::cos(th);
    const double a = dt * k.sinc;  // sin(w dt)/w
    const double b = dt * k.cosc;  // (1-cos(w dt))/w
    const double vx = x[kVx], vy = x[kVy];
    out[kPx] = x[kPx] + a * vx - b * vy;
    out[kVx] = c * vx - s * vy;
    out[kPy] = x[kPy] + b * vx + a * vy;
    out[kVy] = s * vx + c * vy;
    out[kOmega] = w;
}

inline void ct_jacobian(const double* x, double dt, double* jac) {
    const double w = x[kOmega];
    const double th = w * dt;
    const TurnCoefficients k = turn_coefficients(th);
    const double s = std::sin(th), c = std::cos(th);
    const double a = dt * k.sinc, b = dt * k.cosc;
    const double da = dt * dt * k.dsinc, db = dt * dt * k.dcosc;
    const double ds = dt * c, dc = -dt * s;
    const double vx = x[kVx], vy = x[kVy];
    const double rows[kStateDim][kStateDim] = {
        {1.0, a, 0.0, -b, da * vx - db * vy},
        {0.0, c, 0.0, -s, dc * vx - ds * vy},
        {0.0, b, 1.0, a, db * vx + da * vy},
        {0.0, s, 0.0, c, ds * vx + dc * vy},
        {0.0, 0.0, 0.0, 0.0, 1.0},
    };
    for (std::size_t i = 0; i < kStateDim; ++i)
        for (std::size_t j = 0; j < kStateDim; ++j) jac[i * kStateDim + j] = rows[i][j];
}

// Constant velocity with the turn rate pinned to zero.
inline void cv_apply(const double* x, double dt, double* out) {
    out[kPx] = x[kPx] + dt * x[kVx];
    out[kVx] = x[kVx];
    out[kPy] = x[kPy] + dt * x[kVy];
    out[kVy] = x[kVy];
    out[kOmega] = 0.0;
}

inline void cv_jacobian(const double*, double dt, double* jac) {
    for (std::size_t i = 0; i < kStateDim * kStateDim; ++i) jac[i] = 0.0;
    jac[kPx * kStateDim + kPx] = 1.0;
    jac[kPx * kStateDim + kVx] = dt;
    jac[kVx * kStateDim + kVx] = 1.0;
    jac[kPy * kStateDim + kPy] = 1.0;
    jac[kPy * kStateDim + kVy] = dt;
    jac[kVy * kStateDim + kVy] = 1.0;
}

inline void radar_apply(const double* x, double* out) {
    const double px = x[kPx], py = x[kPy];
    if (px == 0.0 && py == 0.0) throw NumericalError("radar_measure: target at sensor origin");
    out[kRange] = std::hypot(px, py);
    double b = std::atan2(py, px);
    if (b == -std::numbers::pi) b = std::numbers::pi;
    out[kBearing] = b;
}

inline void radar_jacobian(const double* x, double* jac) {
    const double px = x[kPx], py = x[kPy];
    const double r2 = px * px + py * py;
    if (r2 == 0.0) throw NumericalError("radar_measure: target at sensor origin");
    const double r = std::sqrt(r2);
    for (std::size_t i = 0; i < kMeasDim * kStateDim; ++i) jac[i] = 0.0;
    jac[kRange * kStateDim + kPx] = px / r;
    jac[kRange * kStateDim + kPy] = py / r;
    jac[kBearing * kStateDim + kPx] = -py / r2;
    jac[kBearing * kStateDim + kPy] = px / r2;
}

}  // namespace detail

/// Exact constant-turn-rate transition over dt; reduces to constant
/// velocity as omega -> 0.
inline State ct_transition(const State& x, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("ct_transition: dt must be positive");
    State out{};
    detail::ct_apply(x.data(), dt, out.data());
    return out;
}

inline State cv_transition(const State& x, double dt) {
    State out{};
    detail::cv_apply(x.data(), dt, out.data());
    return out;
}

/// Noiseless range and full-quadrant bearing in (-pi, pi].
inline Measurement radar_measure(const State& x) {
    Measurement z{};
    detail::radar_apply(x.data(), z.data());
    return z;
}

/// Position implied by a measurement; velocities and turn rate zero.
inline State state_from_measurement(const Measurement& z) {
    return {z[kRange] * std::cos(z[kBearing]), 0.0, z[kRange] * std::sin(z[kBearing]), 0.0, 0.0};
}

enum class MotionModel { coordinated_turn, constant_velocity };

inline std::shared_ptr<const ColumnMap> transition_map(MotionModel model, double dt) {
    auto m = std::make_shared<ColumnMap>();
    m->in_dim = kStateDim;
    m->out_dim = kStateDim;
    if (model == MotionModel::coordinated_turn) {
        m->name = "ct_transition";
        m->value = [dt](const double* in, double* out) { detail::ct_apply(in, dt, out); };
        m->jacobian = [dt](const double* in, double* jac) { detail::ct_jacobian(in, dt, jac); };
    } else {
        m->name = "cv_transition";
        m->value = [dt](const double* in, double* out) { detail::cv_apply(in, dt, out); };
        m->jacobian = [dt](const double* in, double* jac) { detail::cv_jacobian(in, dt, jac); };
    }
    return m;
}

inline std::shared_ptr<const ColumnMap> radar_map() {
    static const auto map = [] {
        auto m = std::make_shared<ColumnMap>();
        m->name = "radar_measure";
        m->in_dim = kStateDim;
        m->out_dim = kMeasDim;
        m->value = detail::radar_apply;
        m->jacobian = detail::radar_jacobian;
        return std::shared_ptr<const ColumnMap>(m);
    }();
    return map;
}

}  // namespace maukf
