// Unscented Kalman filter recursion. The step functions are templates over
// the value type so the same code runs tape-free (Matrix) and taped (ad::Var).
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "maukf/dynamics.hpp"
#include "maukf/matrix.hpp"
#include "maukf/models.hpp"
#include "maukf/tape.hpp"

namespace maukf {

/// Mean/covariance weights as (2n+1) x 1 columns plus the sigma spread gamma.
struct UTWeights {
    Matrix mean;
    Matrix cov;
    double gamma = 3.0;

    std::size_t count() const { return mean.size(); }
};

/// Weights of the scaled unscented transform for (alpha, beta, kappa);
/// gamma = n + lambda with lambda = alpha^2 (n + kappa) - n.
inline UTWeights classic_weights(double alpha, double beta, double kappa, std::size_t n) {
    const auto nd = static_cast<double>(n);
    const double lambda = alpha * alpha * (nd + kappa) - nd;
    const double spread = nd + lambda;
    if (spread == 0.0) throw std::invalid_argument("classic_weights: n + lambda is zero");
    UTWeights w;
    w.gamma = spread;
    w.mean = Matrix(2 * n + 1, 1, 1.0 / (2.0 * spread));
    w.cov = w.mean;
    w.mean[0] = lambda / spread;
    w.cov[0] = lambda / spread + (1.0 - alpha * alpha + beta);
    return w;
}

inline UTWeights uniform_weights(std::size_t n, double gamma) {
    const std::size_t count = 2 * n + 1;
    UTWeights w;
    w.gamma = gamma;
    w.mean = Matrix(count, 1, 1.0 / static_cast<double>(count));
    w.cov = w.mean;
    return w;
}

inline double weight_sum(const Matrix& w) {
    double s = 0.0;
    for (double v : w.data()) s += v;
    return s;
}

/// Convex mode: every weight strictly positive, both heads summing to one.
inline bool is_convex(const UTWeights& w, double tol = 1e-12) {
    auto ok = [tol](const Matrix& m) {
        for (double v : m.data())
            if (!(v > 0.0)) return false;
        return std::abs(weight_sum(m) - 1.0) <= tol;
    };
    return ok(w.mean) && ok(w.cov);
}

template <class T>
struct BeliefT {
    T mean;  // n x 1
    T cov;   // n x n
};
using GaussianBelief = BeliefT<Matrix>;

template <class T>
struct SigmaSetT {
    T points;      // n x (2n+1)
    T propagated;  // images under the transition
    T measured;    // images of `propagated` under the sensor model
};
using SigmaSet = SigmaSetT<Matrix>;

struct MeasurementOptions {
    /// Recombine bearing images through their circular mean and wrap the
    /// bearing deviations; false gives plain arithmetic recombination.
    bool circular_bearing_mean = true;
    /// Wrap the bearing component of z - z_hat into (-pi, pi].
    bool wrap_innovation = true;
};

// ---------------------------------------------------------------------------
// Generic step pieces
// ---------------------------------------------------------------------------

/// [x, x + cols(chol(gamma P)), x - cols(chol(gamma P))]
template <class T>
T sigma_points(const T& mean, const T& cov, double gamma) {
    const std::size_t n = value_of(mean).rows();
    T root = cholesky(scale(cov, gamma));
    T base = matmul(mean, Matrix::ones(1, n));
    return concat_cols(concat_cols(mean, add(base, root)), sub(base, root));
}

/// Measurement images split for recombination: the range row and, in
/// circular mode, the sine and cosine of the bearing row.
template <class T>
struct MeasurementImages {
    T points;  // n_z x (2n+1)
    T range;
    T sin_bearing;
    T cos_bearing;
    bool circular = true;
};

template <class T>
MeasurementImages<T> measurement_images(const T& z_points, const MeasurementOptions& opt) {
    MeasurementImages<T> im;
    im.points = z_points;
    im.circular = opt.circular_bearing_mean;
    if (im.circular) {
        const std::size_t count = value_of(z_points).cols();
        T bearing = slice(z_points, kBearing, 0, 1, count);
        im.range = slice(z_points, kRange, 0, 1, count);
        im.sin_bearing = sin(bearing);
        im.cos_bearing = cos(bearing);
    }
    return im;
}

/// Weighted recombination of measurement images. The bearing row uses the
/// circular mean atan2(sum w sin b, sum w cos b) unless disabled.
template <class T, class W>
T measurement_mean(const MeasurementImages<T>& im, const W& w_mean) {
    if (!im.circular) return matmul(im.points, w_mean);
    T range_mean = matmul(im.range, w_mean);
    T bearing_mean = atan2(matmul(im.sin_bearing, w_mean), matmul(im.cos_bearing, w_mean));
    return concat_rows(range_mean, bearing_mean);
}

template <class T, class W>
T measurement_mean(const T& z_points, const W& w_mean, const MeasurementOptions& opt) {
    return measurement_mean(measurement_images(z_points, opt), w_mean);
}

template <class T>
T measurement_deviations(const T& z_points, const T& z_mean, const MeasurementOptions& opt) {
    const std::size_t count = value_of(z_points).cols();
    T dev = sub(z_points, matmul(z_mean, Matrix::ones(1, count)));
    if (opt.circular_bearing_mean) dev = wrap_angle_row(dev, kBearing);
    return dev;
}

template <class T>
T innovation(const Matrix& z, const T& z_mean, const MeasurementOptions& opt) {
    T nu = sub(z, z_mean);
    if (opt.wrap_innovation) nu = wrap_angle_row(nu, kBearing);
    return nu;
}

template <class T>
struct PriorT {
    BeliefT<T> belief;
    T deviations;  // propagated points minus the prior mean
};

/// Prior mean and covariance from propagated points, plus Q.
template <class T, class W>
PriorT<T> recombine_prior(const T& propagated, const W& w_mean, const W& w_cov, const Matrix& q) {
    const std::size_t count = value_of(propagated).cols();
    T mean = matmul(propagated, w_mean);
    T dev = sub(propagated, matmul(mean, Matrix::ones(1, count)));
    T cov = add(weighted_outer(dev, w_cov, dev), q);
    return {{mean, cov}, dev};
}

template <class T>
struct UpdateT {
    BeliefT<T> belief;
    T innovation;    // z - z_hat (bearing wrapped by default)
    T innov_cov;     // P_zz
    T meas_mean;     // z_hat
};

/// Gain, posterior mean and covariance; P is re-symmetrized.
template <class T, class W>
UpdateT<T> kalman_update(const PriorT<T>& prior, const MeasurementImages<T>& measured, const W& w_mean,
                         const W& w_cov, const Matrix& z, const Matrix& r, const MeasurementOptions& opt) {
    T z_mean = measurement_mean(measured, w_mean);
    T dz = measurement_deviations(measured.points, z_mean, opt);
    T pzz = add(weighted_outer(dz, w_cov, dz), r);
    T pxz = weighted_outer(prior.deviations, w_cov, dz);
    T gain = transpose(spd_solve(pzz, transpose(pxz)));
    T nu = innovation(z, z_mean, opt);
    T mean = add(prior.belief.mean, matmul(gain, nu));
    T cov = symmetrize(sub(prior.belief.cov, matmul(matmul(gain, pzz), transpose(gain))));
    return {{mean, cov}, nu, pzz, z_mean};
}

template <class T, class W>
UpdateT<T> kalman_update(const PriorT<T>& prior, const T& measured, const W& w_mean, const W& w_cov,
                         const Matrix& z, const Matrix& r, const MeasurementOptions& opt) {
    return kalman_update(prior, measurement_images(measured, opt), w_mean, w_cov, z, r, opt);
}

// ---------------------------------------------------------------------------
// Tape-free API
// ---------------------------------------------------------------------------

struct UkfConfig {
    UTWeights weights = classic_weights(1.0, 2.0, 3.0 - static_cast<double>(kStateDim), kStateDim);
    Matrix Q = Matrix::zeros(kStateDim, kStateDim);
    Matrix R = Matrix::identity(kMeasDim);
    double dt = 0.1;
    MotionModel motion = MotionModel::coordinated_turn;
    MeasurementOptions meas;
};

inline SigmaSet make_sigma(const GaussianBelief& belief, const UTWeights& w) {
    SigmaSet s;
    s.points = sigma_points(belief.mean, belief.cov, w.gamma);
    return s;
}

struct Prediction {
    GaussianBelief prior;
    SigmaSet sigma;
    Matrix deviations;
};

inline Prediction predict(const GaussianBelief& belief, const UTWeights& w, const ColumnMap& f,
                          const Matrix& q) {
    Prediction p;
    p.sigma = make_sigma(belief, w);
    p.sigma.propagated = col_map(p.sigma.points, f);
    PriorT<Matrix> prior = recombine_prior(p.sigma.propagated, w.mean, w.cov, q);
    p.prior = std::move(prior.belief);
    p.deviations = std::move(prior.deviations);
    return p;
}

struct UpdateResult {
    GaussianBelief posterior;
    Matrix innovation;
    Matrix innov_cov;
};

/// Fills sigma.measured and applies the measurement update.
inline UpdateResult update(const Prediction& pred, SigmaSet& sigma, const UTWeights& w,
                           const Measurement& z, const Matrix& r, const MeasurementOptions& opt = {}) {
    sigma.measured = col_map(sigma.propagated, *radar_map());
    PriorT<Matrix> prior{pred.prior, pred.deviations};
    UpdateT<Matrix> u = kalman_update(prior, sigma.measured, w.mean, w.cov, to_column(z), r, opt);
    return {std::move(u.belief), std::move(u.innovation), std::move(u.innov_cov)};
}

/// Signals a filter failure at a given 1-based step.
struct FilterFailure : NumericalError {
    FilterFailure(std::size_t step_index, const std::string& what)
        : NumericalError("step " + std::to_string(step_index) + ": " + what), step(step_index) {}
    std::size_t step;
};

struct Track {
    std::vector<State> means;            // x_hat_1 .. x_hat_T
    std::vector<Matrix> covs;            // P_1 .. P_T
    std::vector<Measurement> innovations;

    std::size_t size() const { return means.size(); }
};

/// P0 default: diag(100^2, 30^2, 100^2, 30^2, 0.5^2).
inline Matrix default_initial_cov() {
    return Matrix::diagonal({100.0 * 100.0, 30.0 * 30.0, 100.0 * 100.0, 30.0 * 30.0, 0.5 * 0.5});
}

/// Mean from the first measurement inverted through the sensor model.
inline GaussianBelief initial_belief(const Episode& ep, const Matrix& p0 = default_initial_cov()) {
    if (ep.measurements.empty()) throw std::invalid_argument("initial_belief: empty episode");
    return {to_column(state_from_measurement(ep.measurements.front())), p0};
}

inline Track run_ukf(const Episode& ep, const UkfConfig& cfg, const GaussianBelief& belief0) {
    if (ep.measurements.empty()) throw std::invalid_argument("run_ukf: empty episode");
    const auto f = transition_map(cfg.motion, cfg.dt);
    Track track;
    track.means.reserve(ep.steps());
    track.covs.reserve(ep.steps());
    track.innovations.reserve(ep.steps());
    GaussianBelief belief = belief0;
    for (std::size_t k = 0; k < ep.steps(); ++k) {
        try {
            Prediction pred = predict(belief, cfg.weights, *f, cfg.Q);
            UpdateResult u = update(pred, pred.sigma, cfg.weights, ep.measurements[k], cfg.R, cfg.meas);
            belief = std::move(u.posterior);
            track.innovations.push_back({u.innovation[0], u.innovation[1]});
        } catch (const NumericalError& e) {
            throw FilterFailure(k + 1, e.what());
        }
        track.means.push_back(state_from_column(belief.mean));
        track.covs.push_back(belief.cov);
    }
    return track;
}

}  // namespace maukf
