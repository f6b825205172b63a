// Monte Carlo benchmark harness: paired evaluation of the five filters,
// random-search tuning of the classical baselines, and summary statistics.
#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "maukf/config.hpp"
#include "maukf/imm.hpp"
#include "maukf/ma_ukf.hpp"
#include "maukf/metrics.hpp"
#include "maukf/parallel.hpp"
#include "maukf/rng.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

enum class Method { ukf, ukf_tuned, imm, imm_tuned, ma_ukf };

inline constexpr std::array<Method, 5> kAllMethods{Method::ukf, Method::ukf_tuned, Method::imm,
                                                   Method::imm_tuned, Method::ma_ukf};

/// Display name, as in the results table.
inline const char* method_name(Method m) {
    switch (m) {
        case Method::ukf: return "UKF";
        case Method::ukf_tuned: return "UKF*";
        case Method::imm: return "IMM-UKF";
        case Method::imm_tuned: return "IMM-UKF*";
        case Method::ma_ukf: return "MA-UKF";
    }
    return "?";
}

/// File-name form of the method.
inline const char* method_slug(Method m) {
    switch (m) {
        case Method::ukf: return "ukf";
        case Method::ukf_tuned: return "ukf_tuned";
        case Method::imm: return "imm";
        case Method::imm_tuned: return "imm_tuned";
        case Method::ma_ukf: return "ma_ukf";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Per-episode scoring
// ---------------------------------------------------------------------------

using TrackRunner = std::function<Track(const Episode&)>;

struct EpisodeScore {
    bool diverged = false;
    double armse = std::numeric_limits<double>::quiet_NaN();  // completed runs only
    double capped = kDivergenceCap;
    double seconds = 0.0;  // wall time of the run, completed runs only
};

/// Runs one episode; a FilterFailure or a position error above the cap is a divergence.
inline EpisodeScore score_episode(const Episode& ep, const TrackRunner& run) {
    EpisodeScore s;
    try {
        const auto t0 = std::chrono::steady_clock::now();
        const Track track = run(ep);
        const auto t1 = std::chrono::steady_clock::now();
        if (diverged(track, ep)) {
            s.diverged = true;
            return s;
        }
        s.armse = armse(track, ep);
        s.capped = std::min(s.armse, kDivergenceCap);
        s.seconds = std::chrono::duration<double>(t1 - t0).count();
    } catch (const FilterFailure&) {
        s.diverged = true;
    }
    return s;
}

inline std::vector<EpisodeScore> score_episodes(const std::vector<Episode>& episodes, const TrackRunner& run,
                                                std::size_t threads = 1) {
    std::vector<EpisodeScore> out(episodes.size());
    parallel_for(episodes.size(), threads, [&](std::size_t i) { out[i] = score_episode(episodes[i], run); });
    return out;
}

/// Mean capped ARMSE: the tuning objective.
inline double mean_capped(const std::vector<EpisodeScore>& scores) {
    if (scores.empty()) return 0.0;
    double s = 0.0;
    for (const EpisodeScore& e : scores) s += e.capped;
    return s / static_cast<double>(scores.size());
}

inline std::size_t divergence_count(const std::vector<EpisodeScore>& scores) {
    std::size_t n = 0;
    for (const EpisodeScore& e : scores) n += e.diverged ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------------------
// Filter set-up
// ---------------------------------------------------------------------------

struct UtParams {
    double alpha = 1.0;
    double beta = 2.0;
    double kappa = 3.0 - static_cast<double>(kStateDim);

    UTWeights weights() const { return classic_weights(alpha, beta, kappa, kStateDim); }
};

inline UtParams nominal_ut(const ToolkitConfig& c) { return {c.filter.alpha, c.filter.beta, c.filter.kappa}; }

/// Everything needed besides the config to run all five methods.
struct MethodSetup {
    UtParams ukf_tuned;
    UtParams imm_tuned;
    double imm_tuned_stay = 0.95;
    std::optional<PolicyParams> policy;  // MA-UKF is skipped when absent
};

inline MethodSetup default_setup(const ToolkitConfig& c) {
    return {nominal_ut(c), nominal_ut(c), c.imm.stay, std::nullopt};
}

inline TrackRunner ukf_runner(const ToolkitConfig& c, const UtParams& ut) {
    const UkfConfig cfg = c.ukf(ut.weights());
    const Matrix p0 = c.P0();
    return [cfg, p0](const Episode& ep) { return run_ukf(ep, cfg, initial_belief(ep, p0)); };
}

inline TrackRunner imm_runner(const ToolkitConfig& c, const UtParams& ut, double stay) {
    const ImmConfig cfg = c.imm_config(ut.weights(), stay);
    const Matrix p0 = c.P0();
    return [cfg, p0](const Episode& ep) { return run_imm(ep, cfg, initial_belief(ep, p0)).track; };
}

inline TrackRunner ma_runner(const ToolkitConfig& c, const PolicyParams& params) {
    const MaUkfConfig cfg = c.ma();
    const Matrix p0 = c.P0();
    return [cfg, p0, params](const Episode& ep) { return run_ma_ukf(ep, params, initial_belief(ep, p0), cfg).track; };
}

inline bool method_available(Method m, const MethodSetup& s) { return m != Method::ma_ukf || s.policy.has_value(); }

inline TrackRunner method_runner(Method m, const ToolkitConfig& c, const MethodSetup& s) {
    switch (m) {
        case Method::ukf: return ukf_runner(c, nominal_ut(c));
        case Method::ukf_tuned: return ukf_runner(c, s.ukf_tuned);
        case Method::imm: return imm_runner(c, nominal_ut(c), c.imm.stay);
        case Method::imm_tuned: return imm_runner(c, s.imm_tuned, s.imm_tuned_stay);
        case Method::ma_ukf:
            if (!s.policy) throw std::invalid_argument("MA-UKF needs a trained policy");
            return ma_runner(c, *s.policy);
    }
    throw std::invalid_argument("unknown method");
}

// ---------------------------------------------------------------------------
// Random-search tuning
// ---------------------------------------------------------------------------

struct TrialRecord {
    std::string method;  // "UKF*" or "IMM-UKF*"
    std::size_t trial = 0;  // 0 is the nominal incumbent
    UtParams ut;
    double stay = std::numeric_limits<double>::quiet_NaN();  // IMM only
    double score = 0.0;                                       // mean capped ARMSE
    std::size_t divergences = 0;
    bool best_so_far = false;
};

struct TuneResult {
    UtParams best;
    double best_stay = std::numeric_limits<double>::quiet_NaN();
    double best_score = 0.0;
    double nominal_score = 0.0;
    std::vector<TrialRecord> log;
};

inline UtParams sample_ut(Rng& rng, const BenchSettings& b) {
    UtParams p;
    p.alpha = rng.log_uniform(b.alpha_min, b.alpha_max);
    p.beta = rng.uniform(b.beta_min, b.beta_max);
    p.kappa = rng.uniform(b.kappa_min, b.kappa_max);
    return p;
}

namespace detail {

/// Trial 0 evaluates the nominal configuration; a sampled trial replaces the
/// incumbent only when strictly better.
template <class Sample, class Runner>
TuneResult random_search(const char* method, const std::vector<Episode>& tuning, std::size_t trials,
                         std::size_t threads, Sample&& sample, Runner&& runner, UtParams nominal,
                         double nominal_stay) {
    if (trials == 0) throw std::invalid_argument("tuning needs at least one trial");
    if (tuning.empty()) throw std::invalid_argument("tuning needs episodes");
    TuneResult r;
    auto evaluate = [&](std::size_t trial, const UtParams& ut, double stay) {
        const std::vector<EpisodeScore> scores = score_episodes(tuning, runner(ut, stay), threads);
        TrialRecord rec{method, trial, ut, stay, mean_capped(scores), divergence_count(scores), false};
        if (trial == 0 || rec.score < r.best_score) {
            r.best = ut;
            r.best_stay = stay;
            r.best_score = rec.score;
            rec.best_so_far = true;
        }
        r.log.push_back(rec);
    };
    evaluate(0, nominal, nominal_stay);
    r.nominal_score = r.best_score;
    for (std::size_t t = 1; t <= trials; ++t) {
        auto [ut, stay] = sample();
        evaluate(t, ut, stay);
    }
    return r;
}

}  // namespace detail

/// UKF*: (alpha, beta, kappa) by random search on the tuning episodes.
inline TuneResult tune_ukf(const ToolkitConfig& c, const std::vector<Episode>& tuning, std::size_t trials,
                           std::uint64_t seed, std::size_t threads = 1) {
    Rng rng(seed);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return detail::random_search(
        method_name(Method::ukf_tuned), tuning, trials, threads,
        [&] { return std::pair{sample_ut(rng, c.bench), nan}; },
        [&](const UtParams& ut, double) { return ukf_runner(c, ut); }, nominal_ut(c), nan);
}

/// IMM-UKF*: shared mode weights plus the stay probability of the transition matrix.
inline TuneResult tune_imm(const ToolkitConfig& c, const std::vector<Episode>& tuning, std::size_t trials,
                           std::uint64_t seed, std::size_t threads = 1) {
    Rng rng(seed);
    return detail::random_search(
        method_name(Method::imm_tuned), tuning, trials, threads,
        [&] {
            const UtParams ut = sample_ut(rng, c.bench);
            const double stay = rng.uniform(c.bench.stay_min, c.bench.stay_max);
            return std::pair{ut, stay};
        },
        [&](const UtParams& ut, double stay) { return imm_runner(c, ut, stay); }, nominal_ut(c), c.imm.stay);
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct MethodSummary {
    Method method = Method::ukf;
    Regime regime = Regime::train_ct;
    std::size_t episodes = 0;
    std::size_t divergences = 0;
    SampleStats completed;  // ARMSE over completed runs
    SampleStats capped;     // ARMSE with diverged runs at the cap
    double step_seconds = 0.0;
};

inline MethodSummary summarize(Method m, Regime regime, const std::vector<EpisodeScore>& scores,
                               std::size_t steps) {
    MethodSummary s;
    s.method = m;
    s.regime = regime;
    s.episodes = scores.size();
    std::vector<double> done, capped;
    double seconds = 0.0;
    for (const EpisodeScore& e : scores) {
        capped.push_back(e.capped);
        if (e.diverged) {
            ++s.divergences;
            continue;
        }
        done.push_back(e.armse);
        seconds += e.seconds;
    }
    s.completed = sample_stats(done);
    s.capped = sample_stats(capped);
    if (!done.empty() && steps > 0) s.step_seconds = seconds / static_cast<double>(done.size() * steps);
    return s;
}

struct BenchReport {
    std::vector<MethodSummary> rows;  // regime-major, then method order
    std::uint64_t train_hash = 0;
    std::uint64_t weave_hash = 0;
    std::uint64_t config_hash = 0;
    std::size_t steps = 0;
    MethodSetup setup;

    const MethodSummary* find(Method m, Regime r) const {
        for (const MethodSummary& s : rows)
            if (s.method == m && s.regime == r) return &s;
        return nullptr;
    }
};

/// Benchmark episodes of one regime from the config.
inline std::vector<Episode> bench_dataset(const ToolkitConfig& c, Regime r, std::size_t count) {
    const Stream s = r == Regime::train_ct ? Stream::bench_train : Stream::bench_weave;
    return generate_dataset(r, stream_seed(c.seed, s), 0, count, c.sim.steps, c.sim.dt, c.noise_model(r));
}

inline std::vector<Episode> tuning_dataset(const ToolkitConfig& c, std::size_t count) {
    return generate_dataset(Regime::train_ct, stream_seed(c.seed, Stream::tuning), 0, count, c.sim.steps,
                            c.sim.dt, c.noise_model(Regime::train_ct));
}

/// Training and validation episodes: one stream, validation on the last indices.
inline std::pair<std::vector<Episode>, std::vector<Episode>> training_split(const ToolkitConfig& c) {
    const std::size_t n_val = c.train.validation_count();
    const std::size_t n_train = c.train.episodes - n_val;
    const std::uint64_t base = stream_seed(c.seed, Stream::training);
    const NoiseModel model = c.noise_model(Regime::train_ct);
    return {generate_dataset(Regime::train_ct, base, 0, n_train, c.sim.steps, c.sim.dt, model),
            generate_dataset(Regime::train_ct, base, n_train, n_val, c.sim.steps, c.sim.dt, model)};
}

/// Evaluates every available method on both sets, paired by episode index.
inline BenchReport run_benchmark(const ToolkitConfig& c, const std::vector<Episode>& train_set,
                                 const std::vector<Episode>& weave_set, const MethodSetup& setup,
                                 std::size_t threads = 1) {
    BenchReport rep;
    rep.train_hash = dataset_hash(train_set);
    rep.weave_hash = dataset_hash(weave_set);
    rep.config_hash = config_hash(c);
    rep.steps = c.sim.steps;
    rep.setup = setup;
    for (Regime r : {Regime::train_ct, Regime::eval_weave}) {
        const std::vector<Episode>& set = r == Regime::train_ct ? train_set : weave_set;
        for (Method m : kAllMethods) {
            if (!method_available(m, setup)) continue;
            const std::vector<EpisodeScore> scores = score_episodes(set, method_runner(m, c, setup), threads);
            rep.rows.push_back(summarize(m, r, scores, c.sim.steps));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Sample tracks for the figures
// ---------------------------------------------------------------------------

struct SampleTracks {
    Episode episode;
    std::vector<std::pair<Method, Track>> tracks;  // methods that completed
    std::vector<std::array<double, 2 * kSigmaCount>> weights;  // MA-UKF weight log
};

inline SampleTracks sample_tracks(const ToolkitConfig& c, const MethodSetup& setup, const Episode& ep) {
    SampleTracks out;
    out.episode = ep;
    for (Method m : kAllMethods) {
        if (!method_available(m, setup)) continue;
        try {
            if (m == Method::ma_ukf) {
                MaTrack t = run_ma_ukf(ep, *setup.policy, initial_belief(ep, c.P0()), c.ma(), {.weights = true});
                out.weights = std::move(t.weights);
                out.tracks.emplace_back(m, std::move(t.track));
            } else {
                out.tracks.emplace_back(m, method_runner(m, c, setup)(ep));
            }
        } catch (const FilterFailure&) {
        }
    }
    return out;
}

}  // namespace maukf
