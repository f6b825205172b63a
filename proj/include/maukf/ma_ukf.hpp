// The meta-adaptive UKF step: sigma points at fixed spread, policy inference
// on the proxy innovation, then recombination and update with the new weights.
#pragma once

#include <array>
#include <vector>

#include "maukf/dynamics.hpp"
#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/policy.hpp"
#include "maukf/tape.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

struct MaUkfConfig {
    Matrix Q = Matrix::zeros(kStateDim, kStateDim);
    Matrix R = Matrix::identity(kMeasDim);
    double dt = 0.1;
    double gamma = 3.0;
    MeasurementOptions meas;
};

template <class T>
struct MaStepT {
    BeliefT<T> belief;
    PolicyStateT<T> policy;
    T proxy;      // nu~_k
    T context;    // c_k
    T innovation; // z_k - z_hat_k with the new weights
};
using MaStep = MaStepT<Matrix>;

/**
 * One recursion. `f` is the transition column map (shared so the taped path
 * can keep it alive). Returns x_hat_k, P_k, W_k and h_k, plus diagnostics.
 */
template <class T>
MaStepT<T> ma_step(const BeliefT<T>& belief, const PolicyStateT<T>& ps, const Matrix& z,
                   const PolicyParamsT<T>& params, const MaUkfConfig& cfg,
                   const std::shared_ptr<const ColumnMap>& f) {
    T points = sigma_points(belief.mean, belief.cov, cfg.gamma);
    T propagated = col_map(points, f);
    const MeasurementImages<T> measured = measurement_images(col_map(propagated, radar_map()), cfg.meas);

    T proxy = proxy_innovation(z, measured, ps.prev_mean);
    T hidden = gru_step(encode(proxy, params), ps.hidden, params);
    T context = project_context(hidden, params);
    WeightPair<T> w = weight_heads(context, params);

    PriorT<T> prior = recombine_prior(propagated, w.mean, w.cov, cfg.Q);
    UpdateT<T> u = kalman_update(prior, measured, w.mean, w.cov, z, cfg.R, cfg.meas);
    return {std::move(u.belief), {std::move(hidden), std::move(w.mean), std::move(w.cov)},
            std::move(proxy), std::move(context), std::move(u.innovation)};
}

struct MaLogOptions {
    bool weights = false;       // all 22 weights per step
    bool hidden_norms = false;  // ||h_k||
    bool proxies = false;       // nu~_k
};

struct MaTrack {
    Track track;
    std::vector<std::array<double, 2 * kSigmaCount>> weights;  // mean head then cov head
    std::vector<double> hidden_norms;
    std::vector<Measurement> proxies;
};

inline MaTrack run_ma_ukf(const Episode& ep, const PolicyParams& params, const GaussianBelief& belief0,
                          const MaUkfConfig& cfg, const MaLogOptions& log = {}) {
    if (ep.measurements.empty()) throw std::invalid_argument("run_ma_ukf: empty episode");
    if (params.dims.state != kStateDim || params.dims.meas != kMeasDim) {
        throw ShapeError("run_ma_ukf: policy dimensions do not match the tracking model");
    }
    const auto f = transition_map(MotionModel::coordinated_turn, cfg.dt);
    MaTrack out;
    out.track.means.reserve(ep.steps());
    out.track.covs.reserve(ep.steps());
    GaussianBelief belief = belief0;
    PolicyState ps = initial_policy_state(params.dims);
    for (std::size_t k = 0; k < ep.steps(); ++k) {
        MaStep s;
        try {
            s = ma_step(belief, ps, to_column(ep.measurements[k]), params, cfg, f);
            if (!all_finite(s.policy.prev_mean) || !all_finite(s.policy.prev_cov)) {
                throw NumericalError("non-finite policy output");
            }
        } catch (const NumericalError& e) {
            throw FilterFailure(k + 1, e.what());
        }
        belief = std::move(s.belief);
        ps = std::move(s.policy);
        out.track.means.push_back(state_from_column(belief.mean));
        out.track.covs.push_back(belief.cov);
        out.track.innovations.push_back({s.innovation[0], s.innovation[1]});
        if (log.weights) {
            std::array<double, 2 * kSigmaCount> row{};
            for (std::size_t i = 0; i < kSigmaCount; ++i) {
                row[i] = ps.prev_mean[i];
                row[kSigmaCount + i] = ps.prev_cov[i];
            }
            out.weights.push_back(row);
        }
        if (log.hidden_norms) out.hidden_norms.push_back(frobenius_norm(ps.hidden));
        if (log.proxies) out.proxies.push_back({s.proxy[0], s.proxy[1]});
    }
    return out;
}

}  // namespace maukf
