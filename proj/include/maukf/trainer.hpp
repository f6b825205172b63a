// End-to-end policy training: taped unroll of the MA-UKF over an episode,
// tracking + auxiliary reconstruction loss, reverse sweep, Adam.
#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "maukf/dynamics.hpp"
#include "maukf/ma_ukf.hpp"
#include "maukf/metrics.hpp"
#include "maukf/parallel.hpp"
#include "maukf/policy.hpp"
#include "maukf/rng.hpp"
#include "maukf/tape.hpp"

namespace maukf {

struct LossOptions {
    double lambda_aux = 0.1;
    /// Per-component weights on the squared state error; all ones is the raw norm.
    std::array<double, kStateDim> state_weights{1.0, 1.0, 1.0, 1.0, 1.0};
    /// Gradient truncation window in steps; 0 keeps the full unroll.
    std::size_t truncation = 0;
};

template <class T>
struct LossT {
    T total;       // state + lambda_aux * aux
    T state_term;  // sum_k ||x_k - x^_k||^2 (weighted)
    T aux_term;    // sum_k ||nu~_k - g(c_k)||^2
};

/// Unrolls the filter over the episode and accumulates the training loss.
template <class T>
LossT<T> episode_loss(const Episode& ep, const PolicyParamsT<T>& params, const GaussianBelief& belief0,
                      const MaUkfConfig& cfg, const LossOptions& opt) {
    if (ep.measurements.empty()) throw std::invalid_argument("episode_loss: empty episode");
    const T& anchor = params.w_in;
    const auto f = transition_map(MotionModel::coordinated_turn, cfg.dt);
    const PolicyState ps0 = initial_policy_state(params.dims);
    BeliefT<T> belief{lift_like(anchor, belief0.mean), lift_like(anchor, belief0.cov)};
    PolicyStateT<T> ps{lift_like(anchor, ps0.hidden), lift_like(anchor, ps0.prev_mean),
                       lift_like(anchor, ps0.prev_cov)};
    const Matrix weights_row(1, kStateDim, std::vector<double>(opt.state_weights.begin(), opt.state_weights.end()));

    T state_term = lift_like(anchor, Matrix(1, 1));
    T aux_term = lift_like(anchor, Matrix(1, 1));
    for (std::size_t k = 0; k < ep.steps(); ++k) {
        if (opt.truncation > 0 && k > 0 && k % opt.truncation == 0) {
            belief = {detach(belief.mean), detach(belief.cov)};
            ps = {detach(ps.hidden), detach(ps.prev_mean), detach(ps.prev_cov)};
        }
        MaStepT<T> s = ma_step(belief, ps, to_column(ep.measurements[k]), params, cfg, f);
        T err = sub(to_column(ep.truth[k + 1]), s.belief.mean);
        state_term = add(state_term, matmul(weights_row, hadamard(err, err)));
        T resid = sub(s.proxy, aux_decode(s.context, params));
        aux_term = add(aux_term, matmul(transpose(resid), resid));
        belief = std::move(s.belief);
        ps = std::move(s.policy);
    }
    T total = add(state_term, scale(aux_term, opt.lambda_aux));
    return {std::move(total), std::move(state_term), std::move(aux_term)};
}

struct EpisodeGradient {
    bool ok = false;
    double loss = 0.0;
    double state_term = 0.0;
    double aux_term = 0.0;
    std::vector<Matrix> grads;  // in PolicyParams::for_each order
    std::string error;
};

inline EpisodeGradient episode_gradient(const Episode& ep, const PolicyParams& params,
                                        const GaussianBelief& belief0, const MaUkfConfig& cfg,
                                        const LossOptions& opt) {
    EpisodeGradient out;
    try {
        ad::Tape tape;
        const PolicyParamsT<ad::Var> vars = to_tape(tape, params);
        const LossT<ad::Var> loss = episode_loss(ep, vars, belief0, cfg, opt);
        out.loss = value_of(loss.total)[0];
        out.state_term = value_of(loss.state_term)[0];
        out.aux_term = value_of(loss.aux_term)[0];
        std::vector<ad::Var> wanted;
        vars.for_each([&](const std::string&, const ad::Var& v) { wanted.push_back(v); });
        const ad::Gradients g = tape.backward(loss.total, wanted);
        out.grads.reserve(wanted.size());
        for (const ad::Var& v : wanted) {
            out.grads.push_back(g.at(v));
            if (!all_finite(out.grads.back())) throw NumericalError("non-finite gradient");
        }
        if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");
        out.ok = true;
    } catch (const NumericalError& e) {
        out.ok = false;
        out.grads.clear();
        out.error = e.what();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::uint64_t step = 0;
};

inline AdamState make_adam_state(const PolicyParams& p) {
    AdamState s;
    p.for_each([&](const std::string&, const Matrix& t) {
        s.m.emplace_back(t.rows(), t.cols());
        s.v.emplace_back(t.rows(), t.cols());
    });
    return s;
}

/// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(PolicyParams& params, const std::vector<Matrix>& grads, AdamState& s,
                      const AdamConfig& c) {
    if (s.m.empty()) s = make_adam_state(params);
    if (grads.size() != s.m.size()) throw ShapeError("adam_step: gradient count mismatch");
    ++s.step;
    const double t = static_cast<double>(s.step);
    const double corr1 = 1.0 - std::pow(c.beta1, t);
    const double corr2 = 1.0 - std::pow(c.beta2, t);
    std::size_t i = 0;
    params.for_each([&](const std::string& name, Matrix& theta) {
        const Matrix& g = grads[i];
        Matrix& m = s.m[i];
        Matrix& v = s.v[i];
        if (!g.same_shape(theta)) throw ShapeError("adam_step: gradient shape mismatch for " + name);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double mhat = m[j] / corr1;
            const double vhat = v[j] / corr2;
            theta[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
        ++i;
    });
}

inline double global_norm(const std::vector<Matrix>& grads) {
    double s = 0.0;
    for (const Matrix& g : grads)
        for (double v : g.data()) s += v * v;
    return std::sqrt(s);
}

/// g <- g * min(1, max_norm / ||g||). Returns the norm before clipping.
inline double clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
    const double norm = global_norm(grads);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (Matrix& g : grads)
            for (double& v : g.data()) v *= s;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::size_t episodes = 2000;  // train + validation
    std::size_t seq_len = 60;
    double lr = 1e-3;
    double lambda_aux = 0.1;
    std::size_t truncation = 0;
    double clip_norm = 10.0;
    std::uint64_t seed = 1;
    double val_fraction = 0.1;
    std::size_t checkpoint_every = 10;
    std::array<double, kStateDim> state_weights{1.0, 1.0, 1.0, 1.0, 1.0};
    /// Abort when more than this fraction of a batch yields non-finite results.
    double max_skip_fraction = 0.1;

    void validate() const {
        if (epochs == 0 || batch_size == 0 || episodes < 2 || seq_len == 0) {
            throw std::invalid_argument("TrainConfig: counts must be positive");
        }
        if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
            throw std::invalid_argument("TrainConfig: validation fraction must lie in (0,1)");
        }
        if (!(lr >= 0.0) || !(lambda_aux >= 0.0) || !(clip_norm >= 0.0)) {
            throw std::invalid_argument("TrainConfig: negative rate, weight or clip norm");
        }
    }

    LossOptions loss_options() const { return {lambda_aux, state_weights, truncation}; }
    std::size_t validation_count() const {
        const auto n = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(episodes)));
        return std::clamp<std::size_t>(n, 1, episodes - 1);
    }
};

struct TrainingAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochLog {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // mean per-episode loss over used episodes
    double val_armse = 0.0;      // mean capped ARMSE on the validation set
    double grad_norm = 0.0;      // mean pre-clip batch gradient norm
    std::size_t skipped = 0;     // episodes dropped for non-finite results
    double wall_seconds = 0.0;
};

struct TrainState {
    PolicyParams params;
    AdamState adam;
    std::size_t epoch = 0;  // completed epochs
    PolicyParams best;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::vector<EpochLog> history;
};

inline TrainState initial_train_state(const TrainConfig& cfg, const PolicyDims& dims = {}) {
    Rng rng(cfg.seed);
    TrainState s;
    s.params = init_params(rng, dims);
    s.adam = make_adam_state(s.params);
    s.best = s.params;
    return s;
}

/// Mean ARMSE of the policy; failed or diverged episodes count at the cap.
inline double validation_armse(const std::vector<Episode>& episodes, const PolicyParams& params,
                               const MaUkfConfig& cfg, const Matrix& p0, std::size_t threads = 1) {
    if (episodes.empty()) return 0.0;
    std::vector<double> scores(episodes.size());
    parallel_for(episodes.size(), threads, [&](std::size_t i) {
        try {
            const MaTrack t = run_ma_ukf(episodes[i], params, initial_belief(episodes[i], p0), cfg);
            scores[i] = diverged(t.track, episodes[i]) ? kDivergenceCap
                                                       : std::min(armse(t.track, episodes[i]), kDivergenceCap);
        } catch (const FilterFailure&) {
            scores[i] = kDivergenceCap;
        }
    });
    return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

/// Stateless per-epoch permutation of [0, n).
inline std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1)));
    rng.shuffle(order);
    return order;
}

using EpochCallback = std::function<void(const EpochLog&, const TrainState&)>;

/**
 * Runs epochs state.epoch+1 .. cfg.epochs. Each batch sums per-episode
 * gradients in batch order, clips the global norm and takes one Adam step.
 * The best validation parameters are kept in state.best.
 */
inline void train(const std::vector<Episode>& train_set, const std::vector<Episode>& val_set,
                  const TrainConfig& cfg, const MaUkfConfig& filter, const Matrix& p0, TrainState& state,
                  std::size_t threads = 1, const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    if (state.adam.m.empty()) state.adam = make_adam_state(state.params);
    const LossOptions loss_opt = cfg.loss_options();
    const AdamConfig adam{cfg.lr};
    if (state.epoch == 0 && state.history.empty()) {
        state.best = state.params;
        state.best_val = validation_armse(val_set, state.params, filter, p0, threads);
    }
    for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<std::size_t> order = epoch_order(cfg.seed, epoch, train_set.size());
        double loss_sum = 0.0, norm_sum = 0.0;
        std::size_t used = 0, skipped = 0, batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            std::vector<EpisodeGradient> results(count);
            parallel_for(count, threads, [&](std::size_t i) {
                const Episode& ep = train_set[order[start + i]];
                results[i] = episode_gradient(ep, state.params, initial_belief(ep, p0), filter, loss_opt);
            });
            std::vector<Matrix> total;
            std::size_t batch_skipped = 0;
            std::string last_error;
            for (EpisodeGradient& r : results) {
                if (!r.ok) {
                    ++batch_skipped;
                    last_error = r.error;
                    continue;
                }
                if (total.empty()) {
                    total = std::move(r.grads);
                } else {
                    for (std::size_t j = 0; j < total.size(); ++j) total[j] = add(total[j], r.grads[j]);
                }
                loss_sum += r.loss;
                ++used;
            }
            if (static_cast<double>(batch_skipped) > cfg.max_skip_fraction * static_cast<double>(count)) {
                throw TrainingAborted("epoch " + std::to_string(epoch + 1) + ": " + std::to_string(batch_skipped) +
                                      " of " + std::to_string(count) +
                                      " episodes in a batch were non-finite; last error: " + last_error);
            }
            skipped += batch_skipped;
            if (total.empty()) continue;
            norm_sum += clip_global_norm(total, cfg.clip_norm);
            ++batches;
            adam_step(state.params, total, state.adam, adam);
        }
        EpochLog log;
        log.epoch = epoch + 1;
        log.train_loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
        log.grad_norm = batches > 0 ? norm_sum / static_cast<double>(batches) : 0.0;
        log.skipped = skipped;
        log.val_armse = validation_armse(val_set, state.params, filter, p0, threads);
        log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        state.epoch = epoch + 1;
        if (log.val_armse < state.best_val) {
            state.best_val = log.val_armse;
            state.best = state.params;
            state.best_epoch = state.epoch;
        }
        state.history.push_back(log);
        if (on_epoch) on_epoch(log, state);
    }
}

}  // namespace maukf
