// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-9 gate the
// exit status; 10 is reported only. The slow ordering checks drive the
// command-line tool so they exercise the shipped pipeline end to end.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maukf/bench.hpp"
#include "maukf/config.hpp"
#include "maukf/gradcheck.hpp"
#include "maukf/io.hpp"
#include "maukf/trainer.hpp"

namespace fs = std::filesystem;
using namespace maukf;

namespace {

struct Outcome {
    int id;
    bool pass;
    std::string detail;
};

std::vector<Outcome> outcomes;

void record(int id, bool pass, const std::string& detail, bool gating = true) {
    outcomes.push_back({gating ? id : -id, pass, detail});
    std::printf("[%s] C%d%s %s\n", pass ? "PASS" : "FAIL", id, gating ? "" : " (non-gating)", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PolicyParams random_heads(std::uint64_t seed, double scale = 0.3) {
    Rng rng(seed);
    PolicyParams p = init_params(rng);
    for (Matrix* m : {&p.w_head_mean, &p.b_head_mean, &p.w_head_cov, &p.b_head_cov})
        for (double& v : m->data()) v = scale * rng.normal();
    for (double& v : p.b_aux.data()) v = rng.normal();
    return p;
}

// ---------------------------------------------------------------------------
// C1 gradients
// ---------------------------------------------------------------------------

void gradient_check(const ToolkitConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const MaUkfConfig mc = c.ma();
    const LossOptions opt;
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (std::uint64_t e = 0; e < 10; ++e) {
        const PolicyParams p = random_heads(1000 + e);
        const Regime r = e % 2 ? Regime::eval_weave : Regime::train_ct;
        const Episode ep = generate_episode(r, 7000 + e, 5, c.sim.dt, c.noise_model(r));
        const GaussianBelief b0 = initial_belief(ep, c.P0());
        const EpisodeGradient g = episode_gradient(ep, p, b0, mc, opt);
        if (!g.ok) {
            ok = false;
            worst_name = "episode " + std::to_string(e) + ": " + g.error;
            break;
        }
        std::size_t idx = 0;
        p.for_each([&](const std::string& name, const Matrix& tensor) {
            auto eval = [&](const Matrix& x) {
                PolicyParams q = p;
                q.for_each([&](const std::string& n, Matrix& m) {
                    if (n == name) m = x;
                });
                return episode_loss(ep, q, b0, mc, opt).total[0];
            };
            const double err = tensor_relative_error(g.grads[idx++], central_difference(eval, tensor, 1e-6));
            if (!(err <= worst)) {
                worst = err;
                worst_name = name;
            }
        });
    }
    ok = ok && worst < 1e-4;
    record(1, ok, "gradient check: worst per-tensor relative error " + fmt("%.3e", worst) + " (" + worst_name +
                      ") over 10 episodes, gate < 1e-4, " + fmt("%.1f s", seconds_since(t0)));
}

// ---------------------------------------------------------------------------
// C2 linear oracle
// ---------------------------------------------------------------------------

ColumnMap linear_map(const Matrix& a, std::string name) {
    ColumnMap m;
    m.name = std::move(name);
    m.in_dim = a.cols();
    m.out_dim = a.rows();
    m.value = [a](const double* in, double* out) {
        for (std::size_t r = 0; r < a.rows(); ++r) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(r, k) * in[k];
            out[r] = s;
        }
    };
    m.jacobian = [a](const double*, double* jac) {
        for (std::size_t i = 0; i < a.size(); ++i) jac[i] = a[i];
    };
    return m;
}

/// Closed-form Kalman filter step.
GaussianBelief kf_step(const GaussianBelief& b, const Matrix& f, const Matrix& h, const Matrix& q, const Matrix& r,
                       const Matrix& z) {
    const Matrix m = matmul(f, b.mean);
    const Matrix p = add(matmul(matmul(f, b.cov), transpose(f)), q);
    const Matrix s = add(matmul(matmul(h, p), transpose(h)), r);
    const Matrix k = matmul(matmul(p, transpose(h)), spd_solve(s, Matrix::identity(kMeasDim)));
    const Matrix mean = add(m, matmul(k, sub(z, matmul(h, m))));
    const Matrix ikh = sub(Matrix::identity(kStateDim), matmul(k, h));
    return {mean, symmetrize(matmul(ikh, p))};
}

/// Closed form when Q enters after propagation and the points are not redrawn.
GaussianBelief kf_step_without_redraw(const GaussianBelief& b, const Matrix& f, const Matrix& h, const Matrix& q,
                                      const Matrix& r, const Matrix& z) {
    const Matrix m = matmul(f, b.mean);
    const Matrix spread = matmul(matmul(f, b.cov), transpose(f));
    const Matrix s = add(matmul(matmul(h, spread), transpose(h)), r);
    const Matrix k = matmul(matmul(spread, transpose(h)), spd_solve(s, Matrix::identity(kMeasDim)));
    const Matrix mean = add(m, matmul(k, sub(z, matmul(h, m))));
    return {mean, symmetrize(sub(add(spread, q), matmul(matmul(k, s), transpose(k))))};
}

using OracleStep = std::function<GaussianBelief(const GaussianBelief&, const Matrix&, const Matrix&, const Matrix&,
                                                const Matrix&, const Matrix&)>;

double linear_run(const UTWeights& w, const Matrix& q, const OracleStep& oracle, std::uint64_t seed) {
    const double dt = 0.1;
    Matrix fa = Matrix::identity(kStateDim);
    fa(kPx, kVx) = dt;
    fa(kPy, kVy) = dt;
    Matrix ha(kMeasDim, kStateDim);
    ha(0, kPx) = 1.0;
    ha(1, kPy) = 1.0;
    const ColumnMap f = linear_map(fa, "cv"), h = linear_map(ha, "H");
    const Matrix r = Matrix::diagonal({4.0, 9.0});
    const MeasurementOptions arithmetic{false, false};
    Rng rng(seed);
    GaussianBelief u{Matrix::column({10, 1, -5, 2, 0.1}), Matrix::diagonal({25, 4, 25, 4, 0.01})};
    GaussianBelief k = u;
    State truth{10, 1, -5, 2, 0.1};
    double worst = 0.0;
    for (int step = 0; step < 100; ++step) {
        truth = cv_transition(truth, dt);
        const Matrix z = Matrix::column({truth[kPx] + 2 * rng.normal(), truth[kPy] + 3 * rng.normal()});
        const Prediction pred = predict(u, w, f, q);
        const Matrix measured = col_map(pred.sigma.propagated, h);
        u = kalman_update(PriorT<Matrix>{pred.prior, pred.deviations}, measured, w.mean, w.cov, z, r, arithmetic)
                .belief;
        k = oracle(k, fa, ha, q, r, z);
        worst = std::max({worst, max_abs_diff(u.mean, k.mean), max_abs_diff(u.cov, k.cov)});
    }
    return worst;
}

void linear_oracle() {
    const std::vector<UTWeights> configs{classic_weights(1.0, 2.0, -2.0, 5), classic_weights(0.1, 2.0, 0.0, 5),
                                         classic_weights(2.0, 0.0, 1.0, 5)};
    double textbook = 0.0, no_redraw = 0.0;
    for (std::size_t i = 0; i < configs.size(); ++i) {
        textbook = std::max(textbook, linear_run(configs[i], Matrix::zeros(kStateDim, kStateDim), kf_step, 3 + i));
        no_redraw = std::max(no_redraw,
                             linear_run(configs[i], process_noise(0.5, 0.05, 0.1), kf_step_without_redraw, 3 + i));
    }
    record(2, textbook < 1e-9 && no_redraw < 1e-9,
           "linear oracle over T=100: worst error vs Kalman filter (Q=0) " + fmt("%.2e", textbook) +
               ", vs no-redraw closed form (Q!=0) " + fmt("%.2e", no_redraw) + ", gate < 1e-9");
}

// ---------------------------------------------------------------------------
// C3 convexity and PSD
// ---------------------------------------------------------------------------

struct FailureCounts {
    std::size_t cholesky = 0;
    std::size_t other = 0;
    std::string first;
};

FailureCounts run_ma_batch(const ToolkitConfig& c, const PolicyParams& p, std::size_t count, std::uint64_t base) {
    FailureCounts out;
    const MaUkfConfig mc = c.ma();
    for (std::size_t i = 0; i < count; ++i) {
        const Regime r = i % 2 ? Regime::eval_weave : Regime::train_ct;
        const Episode ep = generate_episode(r, episode_seed(base, i), c.sim.steps, c.sim.dt, c.noise_model(r));
        try {
            run_ma_ukf(ep, p, initial_belief(ep, c.P0()), mc);
        } catch (const FilterFailure& e) {
            const std::string what = e.what();
            const bool chol = what.find("cholesky") != std::string::npos || what.find("Cholesky") != std::string::npos;
            (chol ? out.cholesky : out.other) += 1;
            if (out.first.empty()) out.first = what;
        }
    }
    return out;
}


void convexity_suite(const ToolkitConfig& c, const std::optional<PolicyParams>& trained) {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_sum = 0.0, min_entry = 1.0;
    Rng rng(31);
    for (int pol = 0; pol < 100; ++pol) {
        // Head scales from 0.1 to 10 push the softmax towards saturation.
        PolicyParams p = random_heads(5000 + pol, std::pow(10.0, -1.0 + 2.0 * pol / 99.0));
        Matrix h(p.dims.hidden, 1);
        for (int i = 0; i < 1000; ++i) {
            for (double& v : h.data()) v = rng.uniform(-1.0, 1.0);
            const UTWeights w = synthesize_weights(h, p, c.filter.gamma);
            worst_sum = std::max({worst_sum, std::abs(weight_sum(w.mean) - 1.0), std::abs(weight_sum(w.cov) - 1.0)});
            for (const Matrix* m : {&w.mean, &w.cov})
                for (double v : m->data()) min_entry = std::min(min_entry, v);
        }
    }
    const FailureCounts random = run_ma_batch(c, random_heads(41), 1000, 0xC3C3ULL);
    FailureCounts learned;
    if (trained) learned = run_ma_batch(c, *trained, 1000, 0xC3C4ULL);
    const std::size_t chol = random.cholesky + learned.cholesky;
    const std::size_t other = random.other + learned.other;
    std::string detail = "1e5 syntheses: worst |sum-1| " + fmt("%.2e", worst_sum) + ", min weight " +
                         fmt("%.2e", min_entry) + "; MA-UKF episodes: 1000 random-head" +
                         (trained ? " + 1000 trained-policy" : " (no trained policy yet)") +
                         ", Cholesky failures " + std::to_string(chol) + ", other failures " + std::to_string(other);
    if (other > 0) detail += " (first: " + (random.first.empty() ? learned.first : random.first) + ")";
    detail += fmt(", %.1f s", seconds_since(t0));
    record(3, worst_sum <= 1e-12 && min_entry > 0.0 && chol == 0, detail);
}

// ---------------------------------------------------------------------------
// C4 init equivalence
// ---------------------------------------------------------------------------

void init_equivalence(const ToolkitConfig& c) {
    Rng rng(1);
    const PolicyParams p = init_params(rng);
    const MaUkfConfig mc = c.ma();
    UkfConfig uc;
    uc.weights = uniform_weights(kStateDim, mc.gamma);
    uc.Q = mc.Q;
    uc.R = mc.R;
    uc.dt = mc.dt;
    uc.meas = mc.meas;
    std::size_t identical = 0, both_failed = 0;
    std::string mismatch;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const Regime r = i % 2 ? Regime::eval_weave : Regime::train_ct;
        const Episode ep = generate_episode(r, episode_seed(0xC4ULL, i), 60, c.sim.dt, c.noise_model(r));
        const GaussianBelief b0 = initial_belief(ep, c.P0());
        Track a, b;
        bool fa = false, fb = false;
        try {
            a = run_ma_ukf(ep, p, b0, mc).track;
        } catch (const FilterFailure&) {
            fa = true;
        }
        try {
            b = run_ukf(ep, uc, b0);
        } catch (const FilterFailure&) {
            fb = true;
        }
        if (fa || fb) {
            if (fa && fb) {
                ++both_failed;
                ++identical;
            } else if (mismatch.empty()) {
                mismatch = "episode " + std::to_string(i) + " failed in one filter only";
            }
            continue;
        }
        if (a.means == b.means && a.covs == b.covs && a.innovations == b.innovations) {
            ++identical;
        } else if (mismatch.empty()) {
            mismatch = "episode " + std::to_string(i) + " differs";
        }
    }
    record(4, identical == 100,
           std::to_string(identical) + "/100 episodes (T=60) bit-identical between zero-head MA-UKF and the "
           "uniform-weight gamma=3 UKF" + (both_failed ? " (" + std::to_string(both_failed) + " fail identically)" : "") +
               (mismatch.empty() ? "" : "; " + mismatch));
}

// ---------------------------------------------------------------------------
// C7 overhead
// ---------------------------------------------------------------------------

void overhead(const ToolkitConfig& c, const PolicyParams& p, const std::string& which) {
    using clock = std::chrono::steady_clock;
    const UkfConfig uc = c.nominal_ukf();
    const MaUkfConfig mc = c.ma();
    const auto f = transition_map(MotionModel::coordinated_turn, c.sim.dt);
    const std::size_t target = 10000;
    double ukf_ns = 0.0, ma_ns = 0.0;
    std::size_t n_ukf = 0, n_ma = 0;
    bool warm = false;
    for (std::uint64_t e = 0; n_ukf < target || n_ma < target; ++e) {
        const Episode ep = generate_episode(Regime::train_ct, episode_seed(0xC7ULL, e), c.sim.steps, c.sim.dt,
                                            c.noise_model(Regime::train_ct));
        const GaussianBelief b0 = initial_belief(ep, c.P0());
        GaussianBelief ub = b0;
        GaussianBelief mb = b0;
        PolicyState ps = initial_policy_state(p.dims);
        try {
            for (std::size_t k = 0; k < ep.steps(); ++k) {
                // Alternate the order so neither filter always runs on a warm cache.
                const bool ukf_first = k % 2 == 0;
                for (int pass = 0; pass < 2; ++pass) {
                    if ((pass == 0) == ukf_first) {
                        const auto t0 = clock::now();
                        Prediction pred = predict(ub, uc.weights, *f, uc.Q);
                        UpdateResult u = update(pred, pred.sigma, uc.weights, ep.measurements[k], uc.R, uc.meas);
                        ub = std::move(u.posterior);
                        const double ns = std::chrono::duration<double, std::nano>(clock::now() - t0).count();
                        if (warm && n_ukf < target) ukf_ns += ns, ++n_ukf;
                    } else {
                        const auto t0 = clock::now();
                        MaStep s = ma_step(mb, ps, to_column(ep.measurements[k]), p, mc, f);
                        mb = std::move(s.belief);
                        ps = std::move(s.policy);
                        const double ns = std::chrono::duration<double, std::nano>(clock::now() - t0).count();
                        if (warm && n_ma < target) ma_ns += ns, ++n_ma;
                    }
                }
            }
        } catch (const NumericalError&) {
            // Degenerate episode; its partial timings stay in the sample.
        }
        warm = true;
    }
    const double ukf_us = ukf_ns / n_ukf / 1e3, ma_us = ma_ns / n_ma / 1e3;
    const double ratio = ma_us / ukf_us;
    record(7, ratio <= 2.0,
           "mean step time over 1e4 interleaved steps: MA-UKF " + fmt("%.2f us", ma_us) + ", UKF " +
               fmt("%.2f us", ukf_us) + ", ratio " + fmt("%.3f", ratio) + " (gate <= 2, " + which + " policy)");
}

// ---------------------------------------------------------------------------
// C9 glint statistics
// ---------------------------------------------------------------------------

void glint_statistics(const ToolkitConfig& c) {
    double worst = 0.0, worst_corr = 0.0;
    for (double eta : {20.0, 40.0}) {
        NoiseModel m;
        m.R = c.R();
        m.glint_prob = 0.1;
        m.glint_scale = eta;
        Rng rng(eta == 20.0 ? 901 : 902);
        const int n = 1000000;
        long double s[2] = {0, 0}, ss[3] = {0, 0, 0};
        for (int i = 0; i < n; ++i) {
            const Measurement v = sample_glint_noise(m, rng);
            s[0] += v[0];
            s[1] += v[1];
            ss[0] += static_cast<long double>(v[0]) * v[0];
            ss[1] += static_cast<long double>(v[0]) * v[1];
            ss[2] += static_cast<long double>(v[1]) * v[1];
        }
        const long double m0 = s[0] / n, m1 = s[1] / n;
        const double c00 = static_cast<double>(ss[0] / n - m0 * m0);
        const double c01 = static_cast<double>(ss[1] / n - m0 * m1);
        const double c11 = static_cast<double>(ss[2] / n - m1 * m1);
        const double k = 1.0 - m.glint_prob + m.glint_prob * eta;
        worst = std::max({worst, std::abs(c00 / (k * m.R(0, 0)) - 1.0), std::abs(c11 / (k * m.R(1, 1)) - 1.0)});
        worst_corr = std::max(worst_corr, std::abs(c01) / std::sqrt(c00 * c11));
    }
    record(9, worst <= 0.02 && worst_corr <= 0.02,
           "1e6 glint draws for eta in {20, 40}: worst relative diagonal error " + fmt("%.4f", worst) +
               ", worst |correlation| " + fmt("%.4f", worst_corr) + " (gate 0.02)");
}

// ---------------------------------------------------------------------------
// C10 weight spikes at glint steps
// ---------------------------------------------------------------------------

void weight_spikes(const ToolkitConfig& c, const PolicyParams& p) {
    NoiseModel clean = c.noise_model(Regime::eval_weave);
    clean.glint_prob = 0.0;
    Episode ep = generate_episode(Regime::eval_weave, 0xC10ULL, c.sim.steps, c.sim.dt, clean);
    // Replace the measurement noise with an eta-scaled draw at known steps.
    NoiseModel burst = clean;
    burst.glint_prob = 1.0;
    burst.glint_scale = c.noise.glint_scale_eval;
    Rng rng(1010);
    std::vector<std::size_t> injected;
    for (std::size_t k = 6; k < ep.steps(); k += 6) {
        Measurement z = radar_measure(ep.truth[k + 1]);
        const Measurement v = sample_glint_noise(burst, rng);
        z[kRange] = std::max(0.0, z[kRange] + v[kRange]);
        z[kBearing] = wrap_angle(z[kBearing] + v[kBearing]);
        ep.measurements[k] = z;
        ep.glint[k] = true;
        injected.push_back(k);
    }
    MaTrack t;
    try {
        t = run_ma_ukf(ep, p, initial_belief(ep, c.P0()), c.ma(), {true, false, false});
    } catch (const FilterFailure& e) {
        record(10, false, std::string("weave episode failed: ") + e.what(), false);
        return;
    }
    // Per-step variance of a channel: squared change from the previous step.
    const std::size_t channels = 2 * kSigmaCount;
    std::vector<std::vector<double>> d(channels);
    for (std::size_t k = 1; k < t.weights.size(); ++k)
        for (std::size_t ch = 0; ch < channels; ++ch) {
            const double x = t.weights[k][ch] - t.weights[k - 1][ch];
            d[ch].push_back(x * x);
        }
    std::vector<double> median(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        std::vector<double> v = d[ch];
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        median[ch] = v[v.size() / 2];
    }
    std::size_t spikes = 0;
    for (std::size_t k : injected) {
        for (std::size_t ch = 0; ch < channels; ++ch) {
            if (d[ch][k - 1] > 0.0 && d[ch][k - 1] >= 10.0 * median[ch]) {
                ++spikes;
                break;
            }
        }
    }
    const double frac = static_cast<double>(spikes) / static_cast<double>(injected.size());
    record(10, frac >= 0.5,
           std::to_string(spikes) + "/" + std::to_string(injected.size()) +
               " injected glint steps show a weight channel with squared step change >= 10x its median (" +
               fmt("%.0f%%", 100 * frac) + ", threshold 50%)",
           false);
}

// ---------------------------------------------------------------------------
// Command-line pipeline: training, two benchmark runs, report comparisons
// ---------------------------------------------------------------------------

std::string quote(const fs::path& p) { return "\"" + p.string() + "\""; }

bool run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
    fs::create_directories(log.parent_path());
    const std::string cmd = quote(cli) + " " + args + " > " + quote(log) + " 2>&1";
    std::printf("  running: %s\n", cmd.c_str());
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    std::printf("  exit %d after %.1f s\n", rc, seconds_since(t0));
    std::fflush(stdout);
    return rc == 0;
}

struct ReportRow {
    std::size_t divergences = 0;
    double completed = 0.0;
    double capped = 0.0;
};

std::optional<ReportRow> find_row(const CsvTable& t, const std::string& regime, const std::string& method) {
    for (const auto& r : t.rows) {
        if (r.size() >= 8 && r[0] == regime && r[1] == method) {
            return ReportRow{std::stoul(r[3]), std::stod(r[4]), std::stod(r[6])};
        }
    }
    return std::nullopt;
}

std::string describe(const char* name, const ReportRow& r) {
    return std::string(name) + " " + fmt("%.3f", r.capped) + " (" + std::to_string(r.divergences) + " div, " +
           fmt("%.3f", r.completed) + " completed-only)";
}

void ordering(const CsvTable& t) {
    const auto ukf = find_row(t, regime_name(Regime::train_ct), "UKF"), tuned = find_row(t, regime_name(Regime::train_ct), "UKF*"),
               imm = find_row(t, regime_name(Regime::train_ct), "IMM-UKF");
    if (!ukf || !tuned || !imm) {
        record(5, false, "report.csv lacks train-regime rows for UKF, UKF* or IMM-UKF");
        return;
    }
    const bool a = tuned->capped < 0.5 * ukf->capped, b = imm->capped < ukf->capped;
    record(5, a && b,
           "train regime ARMSE (capped mean, m): " + describe("UKF", *ukf) + ", " + describe("UKF*", *tuned) + ", " +
               describe("IMM-UKF", *imm) + "; UKF*/UKF = " + fmt("%.3f", tuned->capped / ukf->capped) +
               " (gate < 0.5) " + (a ? "ok" : "missed") + ", IMM-UKF < UKF " + (b ? "ok" : "missed"));
}

void ma_ordering(const CsvTable& t) {
    const auto ma = find_row(t, regime_name(Regime::train_ct), "MA-UKF"), tuned = find_row(t, regime_name(Regime::train_ct), "UKF*");
    const auto wma = find_row(t, regime_name(Regime::eval_weave), "MA-UKF"), wtuned = find_row(t, regime_name(Regime::eval_weave), "UKF*");
    if (!ma || !tuned || !wma || !wtuned) {
        record(6, false, "report.csv lacks MA-UKF or UKF* rows (was the benchmark run without a policy?)");
        return;
    }
    const bool a = ma->capped < tuned->capped, b = wma->capped <= 1.1 * wtuned->capped;
    record(6, a && b,
           "train: " + describe("MA-UKF", *ma) + " vs " + describe("UKF*", *tuned) + ", margin " +
               fmt("%.1f%%", 100.0 * (1.0 - ma->capped / tuned->capped)) + " (gate > 0%, target >= 30%) " +
               (a ? "ok" : "missed") + "; weave: " + describe("MA-UKF", *wma) + " vs " + describe("UKF*", *wtuned) +
               ", ratio " + fmt("%.3f", wma->capped / wtuned->capped) + " (gate <= 1.1) " + (b ? "ok" : "missed"));
}

std::optional<PolicyParams> try_load_policy(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    try {
        return load_policy(read_json(path));
    } catch (const std::exception& e) {
        std::printf("  could not load %s: %s\n", path.string().c_str(), e.what());
        return std::nullopt;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::string cli;
    std::string work = "acceptance_work";
    std::string config;
    bool skip_pipeline = false;
    app.add_option("--cli", cli, "path to the maukf executable")->required();
    app.add_option("--work", work, "working directory for training and benchmark outputs");
    app.add_option("--config", config, "config file (built-in defaults otherwise)");
    app.add_flag("--skip-pipeline", skip_pipeline, "only run the in-process criteria");
    CLI11_PARSE(app, argc, argv);

    const ToolkitConfig c = config.empty() ? ToolkitConfig{} : load_config(config);
    const std::string cfg_arg = config.empty() ? "" : "--config " + quote(config) + " ";
    const fs::path w = fs::absolute(work);
    const fs::path desk = w / "desk";
    fs::create_directories(desk);

    gradient_check(c);
    linear_oracle();
    init_equivalence(c);
    glint_statistics(c);

    if (!skip_pipeline) {
        const bool resume = fs::exists(desk / "train_state.json");
        if (!run_cli(cli, cfg_arg + "--out " + quote(desk) + " train" + (resume ? " --resume" : ""),
                     desk / "train_console.log")) {
            std::printf("  training failed; see %s\n", (desk / "train_console.log").string().c_str());
        }
    }
    const std::optional<PolicyParams> trained = try_load_policy(desk / "policy.json");

    convexity_suite(c, trained);
    if (trained) {
        overhead(c, *trained, "trained");
    } else {
        overhead(c, random_heads(71), "random-head");
    }

    if (skip_pipeline) {
        for (int id : {5, 6, 8}) record(id, false, "skipped (--skip-pipeline)");
    } else {
        const std::string ckpt = trained ? " --ckpt " + quote(desk / "policy.json") : "";
        const bool ok_a = run_cli(cli, cfg_arg + "--out " + quote(w / "bench_a") + " bench" + ckpt,
                                  w / "bench_a" / "console.log");
        const bool ok_b = run_cli(cli, cfg_arg + "--out " + quote(w / "bench_b") + " bench --no-figures" + ckpt,
                                  w / "bench_b" / "console.log");
        if (ok_a) {
            const CsvTable t = parse_csv(read_file(w / "bench_a" / "report.csv"));
            ordering(t);
            ma_ordering(t);
        } else {
            record(5, false, "bench run failed");
            record(6, false, "bench run failed");
        }
        if (ok_a && ok_b) {
            const std::string a = read_file(w / "bench_a" / "report.csv"), b = read_file(w / "bench_b" / "report.csv");
            record(8, a == b,
                   "two bench runs (same seed and config): report.csv " +
                       std::string(a == b ? "byte-identical" : "differs") + " (" + std::to_string(a.size()) +
                       " bytes, FNV-1a " + hex64(fnv1a(a)) + ")");
        } else {
            record(8, false, "bench run failed");
        }
    }

    if (trained) {
        weight_spikes(c, *trained);
    } else {
        record(10, false, "no trained policy", false);
    }

    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) {
        return std::abs(a.id) < std::abs(b.id);
    });
    std::size_t failed = 0;
    std::printf("\nsummary:\n");
    for (const Outcome& o : outcomes) {
        std::printf("  C%-2d %s%s\n", std::abs(o.id), o.pass ? "PASS" : "FAIL", o.id < 0 ? " (non-gating)" : "");
        if (o.id > 0 && !o.pass) ++failed;
    }
    std::printf("%zu gating criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
