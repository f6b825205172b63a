// Experiment configuration: noise model, filters, training and benchmark
// settings, loaded from a JSON file with every field optional.
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "maukf/dynamics.hpp"
#include "maukf/imm.hpp"
#include "maukf/io.hpp"
#include "maukf/ma_ukf.hpp"
#include "maukf/trainer.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

/// Invalid or inconsistent configuration.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NoiseSettings {
    double sigma_range = 10.0;     // m
    double sigma_bearing = 0.01;   // rad
    double sigma_accel = 0.5;      // m/s^2
    double sigma_turn = 0.05;      // rad/s/sqrt(s)
    double glint_prob = 0.1;
    double glint_scale_train = 20.0;
    double glint_scale_eval = 40.0;
};

struct SimSettings {
    double dt = 0.1;
    std::size_t steps = 60;
};

struct FilterSettings {
    std::array<double, kStateDim> p0_diag{100.0 * 100.0, 30.0 * 30.0, 100.0 * 100.0, 30.0 * 30.0, 0.5 * 0.5};
    double alpha = 1.0;
    double beta = 2.0;
    double kappa = 3.0 - static_cast<double>(kStateDim);
    double gamma = 3.0;  // MA-UKF spread
    bool circular_bearing_mean = true;
    bool wrap_innovation = true;
};

struct ImmSettings {
    double stay = 0.95;
    double cv_turn_sigma = 1e-4;
};

struct BenchSettings {
    std::size_t episodes = 1000;         // per regime, held out
    std::size_t tuning_episodes = 200;   // train regime, disjoint seeds
    std::size_t trials = 100;
    double alpha_min = 1e-2, alpha_max = 30.0;
    double beta_min = 0.0, beta_max = 5.0;
    double kappa_min = -static_cast<double>(kStateDim) + 0.1, kappa_max = 5.0;
    double stay_min = 0.8, stay_max = 0.999;
    std::size_t sample_episode = 0;      // weave episode drawn in the figures
};

struct ToolkitConfig {
    std::uint64_t seed = 20240917;
    NoiseSettings noise;
    SimSettings sim;
    FilterSettings filter;
    ImmSettings imm;
    TrainConfig train;
    BenchSettings bench;

    void validate() const;

    NoiseModel noise_model(Regime regime) const {
        NoiseModel m;
        m.R = radar_noise(noise.sigma_range, noise.sigma_bearing);
        m.glint_prob = noise.glint_prob;
        m.glint_scale = regime == Regime::train_ct ? noise.glint_scale_train : noise.glint_scale_eval;
        m.Q = regime == Regime::train_ct ? process_noise(noise.sigma_accel, noise.sigma_turn, sim.dt)
                                         : Matrix::zeros(kStateDim, kStateDim);
        return m;
    }
    Matrix R() const { return radar_noise(noise.sigma_range, noise.sigma_bearing); }
    Matrix Q() const { return process_noise(noise.sigma_accel, noise.sigma_turn, sim.dt); }
    Matrix P0() const { return Matrix::diagonal(filter.p0_diag); }
    MeasurementOptions meas() const { return {filter.circular_bearing_mean, filter.wrap_innovation}; }

    UkfConfig ukf(const UTWeights& w) const {
        UkfConfig c;
        c.weights = w;
        c.Q = Q();
        c.R = R();
        c.dt = sim.dt;
        c.meas = meas();
        return c;
    }
    UkfConfig nominal_ukf() const { return ukf(classic_weights(filter.alpha, filter.beta, filter.kappa, kStateDim)); }

    ImmConfig imm_config(const UTWeights& w, double stay) const {
        ImmConfig c = make_imm_config(w, R(), sim.dt, noise.sigma_accel, noise.sigma_turn, stay, imm.cv_turn_sigma);
        for (UkfConfig& m : c.modes) m.meas = meas();
        return c;
    }

    MaUkfConfig ma() const {
        MaUkfConfig c;
        c.Q = Q();
        c.R = R();
        c.dt = sim.dt;
        c.gamma = filter.gamma;
        c.meas = meas();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Seeds for the disjoint episode streams
// ---------------------------------------------------------------------------

enum class Stream { training, tuning, bench_train, bench_weave };

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Base seed of one stream; episode i of it uses base ^ i. Bases are forced
/// to have zero low 32 bits so streams of under 2^32 episodes never overlap.
inline std::uint64_t stream_seed(std::uint64_t master, Stream s) {
    return mix64(master ^ mix64(static_cast<std::uint64_t>(s) + 1)) & ~0xFFFFFFFFULL;
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

inline void check_keys(const json& j, const char* section, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw ConfigError(std::string("config section '") + section + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* allowed : keys) known = known || k == allowed;
        if (!known) throw ConfigError(std::string("unknown config field '") + section + "." + k + "'");
    }
}

}  // namespace detail

inline json to_json(const ToolkitConfig& c) {
    const TrainConfig& t = c.train;
    const BenchSettings& b = c.bench;
    return {
        {"seed", c.seed},
        {"noise",
         {{"sigma_range", c.noise.sigma_range},
          {"sigma_bearing", c.noise.sigma_bearing},
          {"sigma_accel", c.noise.sigma_accel},
          {"sigma_turn", c.noise.sigma_turn},
          {"glint_prob", c.noise.glint_prob},
          {"glint_scale_train", c.noise.glint_scale_train},
          {"glint_scale_eval", c.noise.glint_scale_eval}}},
        {"sim", {{"dt", c.sim.dt}, {"steps", c.sim.steps}}},
        {"filter",
         {{"p0_diag", c.filter.p0_diag},
          {"alpha", c.filter.alpha},
          {"beta", c.filter.beta},
          {"kappa", c.filter.kappa},
          {"gamma", c.filter.gamma},
          {"circular_bearing_mean", c.filter.circular_bearing_mean},
          {"wrap_innovation", c.filter.wrap_innovation}}},
        {"imm", {{"stay", c.imm.stay}, {"cv_turn_sigma", c.imm.cv_turn_sigma}}},
        {"train",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"episodes", t.episodes},
          {"lr", t.lr},
          {"lambda_aux", t.lambda_aux},
          {"truncation", t.truncation},
          {"clip_norm", t.clip_norm},
          {"seed", t.seed},
          {"val_fraction", t.val_fraction},
          {"checkpoint_every", t.checkpoint_every},
          {"state_weights", t.state_weights},
          {"max_skip_fraction", t.max_skip_fraction}}},
        {"bench",
         {{"episodes", b.episodes},
          {"tuning_episodes", b.tuning_episodes},
          {"trials", b.trials},
          {"alpha_range", {b.alpha_min, b.alpha_max}},
          {"beta_range", {b.beta_min, b.beta_max}},
          {"kappa_range", {b.kappa_min, b.kappa_max}},
          {"stay_range", {b.stay_min, b.stay_max}},
          {"sample_episode", b.sample_episode}}},
    };
}

inline ToolkitConfig config_from_json(const json& j) {
    using detail::check_keys;
    using detail::read_opt;
    ToolkitConfig c;
    check_keys(j, "<root>", {"seed", "noise", "sim", "filter", "imm", "train", "bench"});
    read_opt(j, "seed", c.seed);
    if (j.contains("noise")) {
        const json& n = j.at("noise");
        check_keys(n, "noise", {"sigma_range", "sigma_bearing", "sigma_accel", "sigma_turn", "glint_prob",
                                "glint_scale_train", "glint_scale_eval"});
        read_opt(n, "sigma_range", c.noise.sigma_range);
        read_opt(n, "sigma_bearing", c.noise.sigma_bearing);
        read_opt(n, "sigma_accel", c.noise.sigma_accel);
        read_opt(n, "sigma_turn", c.noise.sigma_turn);
        read_opt(n, "glint_prob", c.noise.glint_prob);
        read_opt(n, "glint_scale_train", c.noise.glint_scale_train);
        read_opt(n, "glint_scale_eval", c.noise.glint_scale_eval);
    }
    if (j.contains("sim")) {
        const json& s = j.at("sim");
        check_keys(s, "sim", {"dt", "steps"});
        read_opt(s, "dt", c.sim.dt);
        read_opt(s, "steps", c.sim.steps);
    }
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        check_keys(f, "filter", {"p0_diag", "alpha", "beta", "kappa", "gamma", "circular_bearing_mean",
                                 "wrap_innovation"});
        read_opt(f, "p0_diag", c.filter.p0_diag);
        read_opt(f, "alpha", c.filter.alpha);
        read_opt(f, "beta", c.filter.beta);
        read_opt(f, "kappa", c.filter.kappa);
        read_opt(f, "gamma", c.filter.gamma);
        read_opt(f, "circular_bearing_mean", c.filter.circular_bearing_mean);
        read_opt(f, "wrap_innovation", c.filter.wrap_innovation);
    }
    if (j.contains("imm")) {
        const json& m = j.at("imm");
        check_keys(m, "imm", {"stay", "cv_turn_sigma"});
        read_opt(m, "stay", c.imm.stay);
        read_opt(m, "cv_turn_sigma", c.imm.cv_turn_sigma);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train", {"epochs", "batch_size", "episodes", "lr", "lambda_aux", "truncation",
                                "clip_norm", "seed", "val_fraction", "checkpoint_every", "state_weights",
                                "max_skip_fraction"});
        read_opt(t, "epochs", c.train.epochs);
        read_opt(t, "batch_size", c.train.batch_size);
        read_opt(t, "episodes", c.train.episodes);
        read_opt(t, "lr", c.train.lr);
        read_opt(t, "lambda_aux", c.train.lambda_aux);
        read_opt(t, "truncation", c.train.truncation);
        read_opt(t, "clip_norm", c.train.clip_norm);
        read_opt(t, "seed", c.train.seed);
        read_opt(t, "val_fraction", c.train.val_fraction);
        read_opt(t, "checkpoint_every", c.train.checkpoint_every);
        read_opt(t, "state_weights", c.train.state_weights);
        read_opt(t, "max_skip_fraction", c.train.max_skip_fraction);
    }
    if (j.contains("bench")) {
        const json& b = j.at("bench");
        check_keys(b, "bench", {"episodes", "tuning_episodes", "trials", "alpha_range", "beta_range",
                                "kappa_range", "stay_range", "sample_episode"});
        read_opt(b, "episodes", c.bench.episodes);
        read_opt(b, "tuning_episodes", c.bench.tuning_episodes);
        read_opt(b, "trials", c.bench.trials);
        auto range = [&](const char* key, double& lo, double& hi) {
            std::array<double, 2> r{lo, hi};
            read_opt(b, key, r);
            lo = r[0];
            hi = r[1];
        };
        range("alpha_range", c.bench.alpha_min, c.bench.alpha_max);
        range("beta_range", c.bench.beta_min, c.bench.beta_max);
        range("kappa_range", c.bench.kappa_min, c.bench.kappa_max);
        range("stay_range", c.bench.stay_min, c.bench.stay_max);
        read_opt(b, "sample_episode", c.bench.sample_episode);
    }
    c.train.seq_len = c.sim.steps;
    c.validate();
    return c;
}

inline void ToolkitConfig::validate() const {
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
    };
    positive(noise.sigma_range, "noise.sigma_range");
    positive(noise.sigma_bearing, "noise.sigma_bearing");
    positive(noise.sigma_accel, "noise.sigma_accel");
    positive(noise.sigma_turn, "noise.sigma_turn");
    if (!(noise.glint_prob >= 0.0 && noise.glint_prob <= 1.0)) throw ConfigError("noise.glint_prob outside [0,1]");
    if (!(noise.glint_scale_train >= 1.0) || !(noise.glint_scale_eval >= 1.0)) {
        throw ConfigError("noise glint scales must be >= 1");
    }
    positive(sim.dt, "sim.dt");
    if (sim.steps == 0) throw ConfigError("sim.steps must be positive");
    for (double v : filter.p0_diag) positive(v, "filter.p0_diag entries");
    positive(filter.gamma, "filter.gamma");
    const double lambda = filter.alpha * filter.alpha * (kStateDim + filter.kappa) - kStateDim;
    if (kStateDim + lambda == 0.0) throw ConfigError("filter: n + lambda is zero");
    if (!(imm.stay >= 0.0 && imm.stay <= 1.0)) throw ConfigError("imm.stay outside [0,1]");
    positive(imm.cv_turn_sigma, "imm.cv_turn_sigma");
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (bench.episodes == 0 || bench.tuning_episodes == 0 || bench.trials == 0) {
        throw ConfigError("bench counts must be positive");
    }
    if (!(bench.alpha_min > 0.0 && bench.alpha_min <= bench.alpha_max)) throw ConfigError("bench.alpha_range invalid");
    if (!(bench.beta_min <= bench.beta_max) || !(bench.kappa_min <= bench.kappa_max)) {
        throw ConfigError("bench beta/kappa range invalid");
    }
    if (!(bench.stay_min >= 0.0 && bench.stay_min <= bench.stay_max && bench.stay_max <= 1.0)) {
        throw ConfigError("bench.stay_range invalid");
    }
}

inline ToolkitConfig load_config(const std::filesystem::path& path) {
    return config_from_json(read_json(path));
}

/// FNV-1a of the canonical JSON dump.
inline std::uint64_t config_hash(const ToolkitConfig& c) { return fnv1a(to_json(c).dump()); }

}  // namespace maukf
