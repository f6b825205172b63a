// Two-mode Interacting Multiple Model filter (constant velocity + coordinated
// turn), each mode a UKF over the same 5-dimensional state.
#pragma once

#include <array>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "maukf/dynamics.hpp"
#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

inline constexpr std::size_t kModeCount = 2;
enum ModeIndex : std::size_t { kModeCv = 0, kModeCt = 1 };

/// Log-likelihoods below this (the smallest normal double) count as underflow.
inline const double kLikelihoodFloor = std::log(DBL_MIN);

struct ImmConfig {
    std::array<UkfConfig, kModeCount> modes;
    Matrix transition = Matrix(2, 2, {0.95, 0.05, 0.05, 0.95});  // Pi, row-stochastic
    std::array<double, kModeCount> initial_probs{0.5, 0.5};

    void validate() const {
        if (transition.rows() != kModeCount || transition.cols() != kModeCount) {
            throw ShapeError("ImmConfig: transition must be 2x2");
        }
        for (std::size_t i = 0; i < kModeCount; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < kModeCount; ++j) {
                if (!(transition(i, j) >= 0.0)) throw std::invalid_argument("ImmConfig: negative transition");
                s += transition(i, j);
            }
            if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("ImmConfig: transition row sum != 1");
        }
        const double s = initial_probs[0] + initial_probs[1];
        if (initial_probs[0] < 0.0 || initial_probs[1] < 0.0 || std::abs(s - 1.0) > 1e-12) {
            throw std::invalid_argument("ImmConfig: initial mode probabilities off the simplex");
        }
    }
};

/// Symmetric 2x2 Markov matrix with the given diagonal.
inline Matrix stay_transition(double stay) {
    if (!(stay >= 0.0 && stay <= 1.0)) throw std::invalid_argument("stay probability outside [0,1]");
    return Matrix(2, 2, {stay, 1.0 - stay, 1.0 - stay, stay});
}

/**
 * CV mode: turn rate pinned to zero with a tiny turn-rate variance so the
 * mode covariance stays positive definite. CT mode: the full process noise.
 * Both modes share the sigma-point weights and the sensor noise.
 */
inline ImmConfig make_imm_config(const UTWeights& weights, const Matrix& r, double dt, double sigma_accel,
                                 double sigma_turn, double stay = 0.95, double cv_turn_sigma = 1e-4) {
    ImmConfig cfg;
    UkfConfig& cv = cfg.modes[kModeCv];
    cv.weights = weights;
    cv.R = r;
    cv.dt = dt;
    cv.motion = MotionModel::constant_velocity;
    cv.Q = process_noise(sigma_accel, cv_turn_sigma, dt);
    UkfConfig& ct = cfg.modes[kModeCt];
    ct = cv;
    ct.motion = MotionModel::coordinated_turn;
    ct.Q = process_noise(sigma_accel, sigma_turn, dt);
    cfg.transition = stay_transition(stay);
    return cfg;
}

struct ImmState {
    std::array<GaussianBelief, kModeCount> modes;
    std::array<double, kModeCount> probs{0.5, 0.5};  // mu
};

inline ImmState initial_imm_state(const GaussianBelief& belief0, const ImmConfig& cfg) {
    return {{belief0, belief0}, cfg.initial_probs};
}

/// Moment-matched Gaussian of a mixture; zero-weight terms are skipped.
inline GaussianBelief mix_beliefs(const std::array<GaussianBelief, kModeCount>& beliefs,
                                  const std::array<double, kModeCount>& w) {
    const std::size_t n = beliefs[0].mean.rows();
    Matrix mean(n, 1);
    for (std::size_t i = 0; i < kModeCount; ++i) {
        if (w[i] == 0.0) continue;
        mean = add(mean, scale(beliefs[i].mean, w[i]));
    }
    Matrix cov(n, n);
    for (std::size_t i = 0; i < kModeCount; ++i) {
        if (w[i] == 0.0) continue;
        const Matrix d = sub(beliefs[i].mean, mean);
        cov = add(cov, scale(add(beliefs[i].cov, matmul(d, transpose(d))), w[i]));
    }
    return {std::move(mean), std::move(cov)};
}

/// log N(nu; 0, S)
inline double gaussian_log_density(const Matrix& nu, const Matrix& s) {
    const Matrix l = cholesky(s);
    const Matrix y = solve_lower(l, nu);
    double maha = 0.0, logdet = 0.0;
    for (double v : y.data()) maha += v * v;
    for (std::size_t i = 0; i < l.rows(); ++i) logdet += 2.0 * std::log(l(i, i));
    return -0.5 * (maha + logdet + static_cast<double>(nu.rows()) * std::log(2.0 * std::numbers::pi));
}

struct ImmStepResult {
    ImmState state;
    GaussianBelief combined;
    std::array<double, kModeCount> log_likelihoods{};
    std::array<Measurement, kModeCount> innovations{};
    bool reset = false;  // all likelihoods underflowed; mu reset to uniform
};

inline ImmStepResult imm_step(const ImmState& s, const Measurement& z, const ImmConfig& cfg,
                              const std::array<std::shared_ptr<const ColumnMap>, kModeCount>& maps) {
    const Matrix& pi = cfg.transition;
    ImmStepResult out;

    // Mixing.
    std::array<double, kModeCount> predicted{};  // c_j = sum_i Pi_ij mu_i
    for (std::size_t j = 0; j < kModeCount; ++j) {
        for (std::size_t i = 0; i < kModeCount; ++i) predicted[j] += pi(i, j) * s.probs[i];
    }
    std::array<GaussianBelief, kModeCount> mixed;
    for (std::size_t j = 0; j < kModeCount; ++j) {
        if (predicted[j] == 0.0) {
            mixed[j] = s.modes[j];
            continue;
        }
        std::array<double, kModeCount> w{};
        for (std::size_t i = 0; i < kModeCount; ++i) w[i] = pi(i, j) * s.probs[i] / predicted[j];
        mixed[j] = mix_beliefs(s.modes, w);
    }

    // Mode-matched filtering.
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < kModeCount; ++j) {
        const UkfConfig& mc = cfg.modes[j];
        Prediction pred = predict(mixed[j], mc.weights, *maps[j], mc.Q);
        UpdateResult u = update(pred, pred.sigma, mc.weights, z, mc.R, mc.meas);
        out.state.modes[j] = std::move(u.posterior);
        out.log_likelihoods[j] = gaussian_log_density(u.innovation, u.innov_cov);
        out.innovations[j] = {u.innovation[0], u.innovation[1]};
        if (predicted[j] > 0.0) best = std::max(best, out.log_likelihoods[j]);
    }

    // Mode probabilities in the log domain.
    if (!(best >= kLikelihoodFloor)) {
        out.reset = true;
        out.state.probs.fill(1.0 / static_cast<double>(kModeCount));
    } else {
        std::array<double, kModeCount> logp{};
        double total = 0.0;
        for (std::size_t j = 0; j < kModeCount; ++j) {
            if (predicted[j] == 0.0) continue;
            logp[j] = out.log_likelihoods[j] + std::log(predicted[j]);
        }
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < kModeCount; ++j)
            if (predicted[j] > 0.0) top = std::max(top, logp[j]);
        for (std::size_t j = 0; j < kModeCount; ++j)
            if (predicted[j] > 0.0) total += std::exp(logp[j] - top);
        for (std::size_t j = 0; j < kModeCount; ++j) {
            out.state.probs[j] = predicted[j] > 0.0 ? std::exp(logp[j] - top) / total : 0.0;
        }
    }
    out.combined = mix_beliefs(out.state.modes, out.state.probs);
    return out;
}

inline std::array<std::shared_ptr<const ColumnMap>, kModeCount> imm_maps(const ImmConfig& cfg) {
    return {transition_map(cfg.modes[0].motion, cfg.modes[0].dt),
            transition_map(cfg.modes[1].motion, cfg.modes[1].dt)};
}

struct ImmTrack {
    Track track;
    std::vector<std::array<double, kModeCount>> mode_probs;  // mu_1 .. mu_T
    std::size_t resets = 0;
};

inline ImmTrack run_imm(const Episode& ep, const ImmConfig& cfg, const GaussianBelief& belief0) {
    if (ep.measurements.empty()) throw std::invalid_argument("run_imm: empty episode");
    cfg.validate();
    const auto maps = imm_maps(cfg);
    ImmTrack out;
    out.track.means.reserve(ep.steps());
    out.track.covs.reserve(ep.steps());
    out.mode_probs.reserve(ep.steps());
    ImmState state = initial_imm_state(belief0, cfg);
    for (std::size_t k = 0; k < ep.steps(); ++k) {
        ImmStepResult r;
        try {
            r = imm_step(state, ep.measurements[k], cfg, maps);
        } catch (const NumericalError& e) {
            throw FilterFailure(k + 1, e.what());
        }
        if (r.reset) ++out.resets;
        // Logged innovation: posterior-probability blend of the mode innovations.
        Measurement nu{};
        for (std::size_t j = 0; j < kModeCount; ++j) {
            for (std::size_t i = 0; i < kMeasDim; ++i) nu[i] += r.state.probs[j] * r.innovations[j][i];
        }
        out.track.innovations.push_back(nu);
        state = std::move(r.state);
        out.track.means.push_back(state_from_column(r.combined.mean));
        out.track.covs.push_back(std::move(r.combined.cov));
        out.mode_probs.push_back(state.probs);
    }
    return out;
}

}  // namespace maukf
