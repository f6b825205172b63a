// Ground-truth and measurement generators for the two simulation regimes:
// stochastic coordinated turns (training) and sinusoidal weave (evaluation),
// both observed by a range-bearing radar with Gaussian-mixture glint.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/rng.hpp"

namespace maukf {

struct NoiseModel {
    Matrix R = Matrix::identity(kMeasDim);
    double glint_prob = 0.1;
    double glint_scale = 20.0;
    Matrix Q = Matrix::zeros(kStateDim, kStateDim);

    void validate() const {
        if (!(glint_prob >= 0.0 && glint_prob <= 1.0)) {
            throw std::invalid_argument("NoiseModel: glint probability outside [0,1]");
        }
        if (!(glint_scale >= 1.0)) throw std::invalid_argument("NoiseModel: glint scale below 1");
        if (R.rows() != kMeasDim || R.cols() != kMeasDim) throw ShapeError("NoiseModel: R must be 2x2");
        if (Q.rows() != kStateDim || Q.cols() != kStateDim) throw ShapeError("NoiseModel: Q must be 5x5");
        if (!is_symmetric(R) || !is_symmetric(Q)) throw std::invalid_argument("NoiseModel: R/Q not symmetric");
    }
};

/// R = diag(sigma_range^2, sigma_bearing^2).
inline Matrix radar_noise(double sigma_range, double sigma_bearing) {
    return Matrix::diagonal({sigma_range * sigma_range, sigma_bearing * sigma_bearing});
}

/// Continuous white-noise acceleration (sigma_accel on each axis) plus a
/// random-walk turn rate (sigma_turn per sqrt(s)), discretized over dt.
inline Matrix process_noise(double sigma_accel, double sigma_turn, double dt) {
    Matrix q(kStateDim, kStateDim);
    const double qa = sigma_accel * sigma_accel;
    const double d2 = dt * dt, d3 = d2 * dt;
    for (std::size_t p : {kPx, kPy}) {
        const std::size_t v = p + 1;
        q(p, p) = qa * d3 / 3.0;
        q(p, v) = q(v, p) = qa * d2 / 2.0;
        q(v, v) = qa * dt;
    }
    q(kOmega, kOmega) = sigma_turn * sigma_turn * dt;
    return q;
}

/// One draw of v ~ (1-eps) N(0, R) + eps N(0, eta R). Always consumes one
/// uniform then two normals. Sets *glint when the outlier component fires.
inline Measurement sample_glint_noise(const NoiseModel& model, Rng& rng, bool* glint = nullptr) {
    const bool outlier = rng.uniform() < model.glint_prob;
    const double n0 = rng.normal();
    const double n1 = rng.normal();
    const Matrix l = psd_factor(model.R);
    const double s = outlier ? std::sqrt(model.glint_scale) : 1.0;
    if (glint != nullptr) *glint = outlier;
    return {s * l(0, 0) * n0, s * (l(1, 0) * n0 + l(1, 1) * n1)};
}

enum class Regime { train_ct, eval_weave };

inline const char* regime_name(Regime r) {
    return r == Regime::train_ct ? "train-CT" : "eval-weave";
}

inline Regime parse_regime(const std::string& s) {
    if (s == "train-CT") return Regime::train_ct;
    if (s == "eval-weave") return Regime::eval_weave;
    throw std::invalid_argument("unknown regime: " + s);
}

struct WeaveParams {
    double accel_x = 0.0;  // A_x, m/s^2
    double accel_y = 0.0;  // A_y
    double freq_x = 0.0;   // omega_x, rad/s
    double freq_y = 0.0;   // omega_y
};

struct Episode {
    Regime regime = Regime::train_ct;
    double dt = 0.1;
    std::uint64_t seed = 0;
    std::vector<State> truth;              // x_0 .. x_T
    std::vector<Measurement> measurements; // z_1 .. z_T
    std::vector<bool> glint;               // outlier flag per measurement
    WeaveParams weave;                     // eval-weave only

    std::size_t steps() const { return measurements.size(); }
};

namespace detail {

// Training-regime initial condition: position U(-1000,1000)^2, speed
// U(10,30), heading U(0,2pi), turn rate U([-0.5,-0.1] U [0.1,0.5]).
inline State sample_initial_state(Rng& rng) {
    const double px = rng.uniform(-1000.0, 1000.0);
    const double py = rng.uniform(-1000.0, 1000.0);
    const double speed = rng.uniform(10.0, 30.0);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double omega = rng.uniform_symmetric_band(0.1, 0.5);
    return {px, speed * std::cos(heading), py, speed * std::sin(heading), omega};
}

inline Measurement noisy_measurement(const State& x, const NoiseModel& model, Rng& rng, bool* glint) {
    Measurement z = radar_measure(x);
    const Measurement v = sample_glint_noise(model, rng, glint);
    // A physical radar never reports a negative range.
    z[kRange] = std::max(0.0, z[kRange] + v[kRange]);
    z[kBearing] = wrap_angle(z[kBearing] + v[kBearing]);
    return z;
}

// Integrals over one step of length dt = th/omega for accelerations
// A sin(omega t) / A cos(omega t), expressed through functions of th only.
struct StepIntegrals {
    double s1;  // sin(th)/th
    double c1;  // (1-cos th)/th
    double c2;  // (1-cos th)/th^2
    double s2;  // (th - sin th)/th^2
};

inline StepIntegrals step_integrals(double th) {
    if (std::abs(th) < 0.1) {
        const double t2 = th * th, t4 = t2 * t2, t6 = t4 * t2, t8 = t4 * t4;
        return {1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0 + t8 / 362880.0,
                th * (0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0 + t8 / 3628800.0),
                0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0 + t8 / 3628800.0,
                th * (1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362880.0 + t8 / 39916800.0)};
    }
    const double s = std::sin(th), h = std::sin(0.5 * th);
    const double one_minus_cos = 2.0 * h * h;
    return {s / th, one_minus_cos / th, one_minus_cos / (th * th), (th - s) / (th * th)};
}

// Advances (p, v) over [t0, t0+dt] under a(t) = amp*sin(freq t) (use_cos
// false) or amp*cos(freq t) (use_cos true).
inline void integrate_axis(double& p, double& v, double amp, double freq, double t0, double dt,
                           bool use_cos) {
    const StepIntegrals k = step_integrals(freq * dt);
    const double sp = std::sin(freq * t0), cp = std::cos(freq * t0);
    double dv, dp2;
    if (!use_cos) {
        dv = dt * (sp * k.s1 + cp * k.c1);
        dp2 = dt * dt * (sp * k.c2 + cp * k.s2);
    } else {
        dv = dt * (cp * k.s1 - sp * k.c1);
        dp2 = dt * dt * (cp * k.c2 - sp * k.s2);
    }
    p += v * dt + amp * dp2;
    v += amp * dv;
}

inline double weave_turn_rate(const State& x, double ax, double ay) {
    const double v2 = x[kVx] * x[kVx] + x[kVy] * x[kVy];
    if (v2 == 0.0) return 0.0;
    return (x[kVx] * ay - x[kVy] * ax) / v2;
}

}  // namespace detail

/// Training regime: CT truth with N(0, Q) process noise, glint measurements.
inline Episode gen_train_episode(Rng& rng, std::size_t steps, double dt, const NoiseModel& model) {
    if (steps < 1) throw std::invalid_argument("gen_train_episode: steps must be >= 1");
    model.validate();
    Episode ep;
    ep.regime = Regime::train_ct;
    ep.dt = dt;
    ep.truth.reserve(steps + 1);
    ep.measurements.reserve(steps);
    const Matrix lq = psd_factor(model.Q);
    State x = detail::sample_initial_state(rng);
    ep.truth.push_back(x);
    for (std::size_t k = 1; k <= steps; ++k) {
        State next = ct_transition(x, dt);
        double n[kStateDim];
        for (double& v : n) v = rng.normal();
        for (std::size_t i = 0; i < kStateDim; ++i) {
            double w = 0.0;
            for (std::size_t j = 0; j <= i; ++j) w += lq(i, j) * n[j];
            next[i] += w;
        }
        x = next;
        ep.truth.push_back(x);
        bool glint = false;
        ep.measurements.push_back(detail::noisy_measurement(x, model, rng, &glint));
        ep.glint.push_back(glint);
    }
    return ep;
}

/// Exact truth for a given initial state and acceleration law, no noise.
inline std::vector<State> weave_truth(State x0, const WeaveParams& w, std::size_t steps, double dt) {
    std::vector<State> truth;
    truth.reserve(steps + 1);
    State x = x0;
    x[kOmega] = detail::weave_turn_rate(x, 0.0, w.accel_y);
    truth.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = static_cast<double>(k) * dt;
        detail::integrate_axis(x[kPx], x[kVx], w.accel_x, w.freq_x, t0, dt, false);
        detail::integrate_axis(x[kPy], x[kVy], w.accel_y, w.freq_y, t0, dt, true);
        const double t1 = static_cast<double>(k + 1) * dt;
        x[kOmega] = detail::weave_turn_rate(x, w.accel_x * std::sin(w.freq_x * t1),
                                            w.accel_y * std::cos(w.freq_y * t1));
        truth.push_back(x);
    }
    return truth;
}

/// Evaluation regime: training-distribution initial state, then
/// a(t) = [A_x sin(w_x t), A_y cos(w_y t)] with A ~ U([-20,-10] U [10,20]),
/// w ~ U(-2, 2). The caller's model carries the evaluation glint scale.
inline Episode gen_weave_episode(Rng& rng, std::size_t steps, double dt, const NoiseModel& model) {
    if (steps < 1) throw std::invalid_argument("gen_weave_episode: steps must be >= 1");
    model.validate();
    Episode ep;
    ep.regime = Regime::eval_weave;
    ep.dt = dt;
    const State x0 = detail::sample_initial_state(rng);
    ep.weave.accel_x = rng.uniform_symmetric_band(10.0, 20.0);
    ep.weave.accel_y = rng.uniform_symmetric_band(10.0, 20.0);
    ep.weave.freq_x = rng.uniform(-2.0, 2.0);
    ep.weave.freq_y = rng.uniform(-2.0, 2.0);
    ep.truth = weave_truth(x0, ep.weave, steps, dt);
    ep.measurements.reserve(steps);
    for (std::size_t k = 1; k <= steps; ++k) {
        bool glint = false;
        ep.measurements.push_back(detail::noisy_measurement(ep.truth[k], model, rng, &glint));
        ep.glint.push_back(glint);
    }
    return ep;
}

/// Regenerates one episode from its seed; bit-exact by construction.
inline Episode generate_episode(Regime regime, std::uint64_t seed, std::size_t steps, double dt,
                                const NoiseModel& model) {
    Rng rng(seed);
    Episode ep = regime == Regime::train_ct ? gen_train_episode(rng, steps, dt, model)
                                            : gen_weave_episode(rng, steps, dt, model);
    ep.seed = seed;
    return ep;
}

/// Episodes first_index .. first_index+count-1 of the stream rooted at base_seed.
inline std::vector<Episode> generate_dataset(Regime regime, std::uint64_t base_seed,
                                             std::size_t first_index, std::size_t count,
                                             std::size_t steps, double dt, const NoiseModel& model) {
    std::vector<Episode> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(generate_episode(regime, episode_seed(base_seed, first_index + i), steps, dt, model));
    }
    return out;
}

}  // namespace maukf
