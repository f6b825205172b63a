// Serialization: checkpoints (bit-exact hex tensors), episodes, CSV exports.
#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "maukf/dynamics.hpp"
#include "maukf/imm.hpp"
#include "maukf/ma_ukf.hpp"
#include "maukf/matrix.hpp"
#include "maukf/metrics.hpp"
#include "maukf/policy.hpp"
#include "maukf/trainer.hpp"

namespace maukf {

using json = nlohmann::json;

/// File could not be read or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_double(double v, std::uint64_t h) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xffU;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// IEEE-754 bit patterns, 16 hex digits per value, concatenated.
inline std::string encode_doubles(std::span<const double> values) {
    std::string out;
    out.reserve(values.size() * 16);
    for (double v : values) out += hex64(std::bit_cast<std::uint64_t>(v));
    return out;
}

inline std::vector<double> decode_doubles(const std::string& hex) {
    if (hex.size() % 16 != 0) throw IoError("tensor data: length is not a multiple of 16 hex digits");
    std::vector<double> out(hex.size() / 16);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t bits = 0;
        const char* first = hex.data() + 16 * i;
        const auto [ptr, ec] = std::from_chars(first, first + 16, bits, 16);
        if (ec != std::errc() || ptr != first + 16) throw IoError("tensor data: invalid hex digits");
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

inline json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_doubles(m.data())}};
}

inline Matrix matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    std::vector<double> data = decode_doubles(j.at("data").get<std::string>());
    if (data.size() != rows * cols) throw IoError("tensor data: length does not match its shape");
    return {rows, cols, std::move(data)};
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

/// Shortest round-trip decimal form.
inline std::string fmt_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline json dims_to_json(const PolicyDims& d) {
    return {{"n_x", d.state}, {"n_z", d.meas}, {"d_h", d.hidden}, {"d_p", d.context}};
}

inline PolicyDims dims_from_json(const json& j) {
    return {j.at("n_x").get<std::size_t>(), j.at("n_z").get<std::size_t>(), j.at("d_h").get<std::size_t>(),
            j.at("d_p").get<std::size_t>()};
}

inline json params_to_json(const PolicyParams& p) {
    json tensors = json::array();
    p.for_each([&](const std::string& name, const Matrix& m) {
        json t = matrix_to_json(m);
        t["name"] = name;
        tensors.push_back(std::move(t));
    });
    return tensors;
}

inline PolicyParams params_from_json(const json& tensors, const PolicyDims& dims) {
    PolicyParams p;
    p.dims = dims;
    std::size_t found = 0;
    p.for_each([&](const std::string& name, Matrix& m) {
        for (const json& t : tensors) {
            if (t.at("name").get<std::string>() == name) {
                m = matrix_from_json(t);
                ++found;
                return;
            }
        }
        throw IoError("checkpoint is missing tensor " + name);
    });
    if (found != tensors.size()) throw IoError("checkpoint has unexpected tensors");
    validate(p);
    return p;
}

inline json history_to_json(const std::vector<EpochLog>& history) {
    json rows = json::array();
    for (const EpochLog& e : history) {
        rows.push_back({{"epoch", e.epoch},
                        {"train_loss", encode_doubles(std::span<const double>(&e.train_loss, 1))},
                        {"val_armse", encode_doubles(std::span<const double>(&e.val_armse, 1))},
                        {"grad_norm", encode_doubles(std::span<const double>(&e.grad_norm, 1))},
                        {"skipped", e.skipped},
                        {"wall_seconds", e.wall_seconds}});
    }
    return rows;
}

inline std::vector<EpochLog> history_from_json(const json& rows) {
    std::vector<EpochLog> out;
    for (const json& r : rows) {
        EpochLog e;
        e.epoch = r.at("epoch").get<std::size_t>();
        e.train_loss = decode_doubles(r.at("train_loss").get<std::string>()).at(0);
        e.val_armse = decode_doubles(r.at("val_armse").get<std::string>()).at(0);
        e.grad_norm = decode_doubles(r.at("grad_norm").get<std::string>()).at(0);
        e.skipped = r.at("skipped").get<std::size_t>();
        e.wall_seconds = r.at("wall_seconds").get<double>();
        out.push_back(e);
    }
    return out;
}

/// Policy-only checkpoint (what inference needs).
inline json policy_checkpoint(const PolicyParams& p, std::uint64_t seed, std::size_t epoch, double val_armse) {
    return {{"format", "maukf-checkpoint"},
            {"version", kCheckpointVersion},
            {"dims", dims_to_json(p.dims)},
            {"seed", seed},
            {"epoch", epoch},
            {"val_armse", val_armse},
            {"tensors", params_to_json(p)}};
}

/// Full training state: current parameters, Adam moments, best parameters
/// and the epoch history, enough to resume bit-exactly.
inline json training_checkpoint(const TrainState& s, std::uint64_t seed) {
    json j = policy_checkpoint(s.params, seed, s.epoch,
                               s.history.empty() ? s.best_val : s.history.back().val_armse);
    json m = json::array(), v = json::array();
    for (const Matrix& x : s.adam.m) m.push_back(matrix_to_json(x));
    for (const Matrix& x : s.adam.v) v.push_back(matrix_to_json(x));
    j["optimizer"] = {{"step", s.adam.step}, {"m", m}, {"v", v}};
    j["best"] = {{"epoch", s.best_epoch},
                 {"val_armse", encode_doubles(std::span<const double>(&s.best_val, 1))},
                 {"tensors", params_to_json(s.best)}};
    j["history"] = history_to_json(s.history);
    return j;
}

inline void check_checkpoint_header(const json& j) {
    if (j.value("format", "") != "maukf-checkpoint") throw IoError("not a checkpoint file");
    if (j.value("version", 0) != kCheckpointVersion) throw IoError("unsupported checkpoint version");
}

inline PolicyParams load_policy(const json& j) {
    check_checkpoint_header(j);
    return params_from_json(j.at("tensors"), dims_from_json(j.at("dims")));
}

inline TrainState load_training_state(const json& j) {
    check_checkpoint_header(j);
    if (!j.contains("optimizer")) throw IoError("checkpoint has no optimizer state; cannot resume");
    TrainState s;
    const PolicyDims dims = dims_from_json(j.at("dims"));
    s.params = params_from_json(j.at("tensors"), dims);
    s.epoch = j.at("epoch").get<std::size_t>();
    const json& opt = j.at("optimizer");
    s.adam.step = opt.at("step").get<std::uint64_t>();
    for (const json& x : opt.at("m")) s.adam.m.push_back(matrix_from_json(x));
    for (const json& x : opt.at("v")) s.adam.v.push_back(matrix_from_json(x));
    const json& best = j.at("best");
    s.best_epoch = best.at("epoch").get<std::size_t>();
    s.best_val = decode_doubles(best.at("val_armse").get<std::string>()).at(0);
    s.best = params_from_json(best.at("tensors"), dims);
    s.history = history_from_json(j.at("history"));
    return s;
}

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

inline json episode_to_json(const Episode& ep) {
    json truth = json::array(), meas = json::array(), glint = json::array();
    for (const State& x : ep.truth) truth.push_back(encode_doubles(x));
    for (const Measurement& z : ep.measurements) meas.push_back(encode_doubles(z));
    for (bool g : ep.glint) glint.push_back(g ? 1 : 0);
    json j = {{"regime", regime_name(ep.regime)},
              {"seed", ep.seed},
              {"dt", ep.dt},
              {"truth", truth},
              {"measurements", meas},
              {"glint", glint}};
    if (ep.regime == Regime::eval_weave) {
        j["weave"] = {{"A_x", ep.weave.accel_x}, {"A_y", ep.weave.accel_y},
                      {"omega_x", ep.weave.freq_x}, {"omega_y", ep.weave.freq_y}};
    }
    return j;
}

inline Episode episode_from_json(const json& j) {
    Episode ep;
    ep.regime = parse_regime(j.at("regime").get<std::string>());
    ep.seed = j.at("seed").get<std::uint64_t>();
    ep.dt = j.at("dt").get<double>();
    for (const json& row : j.at("truth")) {
        const auto v = decode_doubles(row.get<std::string>());
        if (v.size() != kStateDim) throw IoError("episode: bad truth row");
        State x{};
        std::copy(v.begin(), v.end(), x.begin());
        ep.truth.push_back(x);
    }
    for (const json& row : j.at("measurements")) {
        const auto v = decode_doubles(row.get<std::string>());
        if (v.size() != kMeasDim) throw IoError("episode: bad measurement row");
        ep.measurements.push_back({v[0], v[1]});
    }
    for (const json& g : j.at("glint")) ep.glint.push_back(g.get<int>() != 0);
    if (j.contains("weave")) {
        const json& w = j.at("weave");
        ep.weave = {w.at("A_x").get<double>(), w.at("A_y").get<double>(), w.at("omega_x").get<double>(),
                    w.at("omega_y").get<double>()};
    }
    if (ep.truth.size() != ep.measurements.size() + 1) throw IoError("episode: truth/measurement lengths");
    return ep;
}

/// One row per step: k, truth x_k (5 cols), z_k (2 cols), glint flag.
inline std::string episode_csv(const Episode& ep) {
    std::ostringstream out;
    out << "k,px,vx,py,vy,omega,range,bearing,glint\n";
    for (std::size_t k = 1; k <= ep.steps(); ++k) {
        out << k;
        for (double v : ep.truth[k]) out << ',' << fmt_double(v);
        for (double v : ep.measurements[k - 1]) out << ',' << fmt_double(v);
        out << ',' << (ep.glint[k - 1] ? 1 : 0) << '\n';
    }
    return out.str();
}

/// Content hash over every bit of truth and measurements.
inline std::uint64_t dataset_hash(const std::vector<Episode>& episodes) {
    std::uint64_t h = fnv1a("maukf-dataset");
    for (const Episode& ep : episodes) {
        h = fnv1a(regime_name(ep.regime), h);
        h = fnv1a_double(static_cast<double>(ep.seed), h);
        for (const State& x : ep.truth)
            for (double v : x) h = fnv1a_double(v, h);
        for (const Measurement& z : ep.measurements)
            for (double v : z) h = fnv1a_double(v, h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Track / log CSVs
// ---------------------------------------------------------------------------

/// k, x_hat (5), diag(P) (5), nu (2), position error, then any extra columns.
inline std::string track_csv(const Track& track, const Episode& ep,
                             const std::vector<std::array<double, kModeCount>>* mode_probs = nullptr) {
    const std::vector<double> err = position_errors(track, ep);
    std::ostringstream out;
    out << "k,px,vx,py,vy,omega,P_px,P_vx,P_py,P_vy,P_omega,nu_range,nu_bearing,pos_err";
    if (mode_probs != nullptr) out << ",mu_cv,mu_ct";
    out << '\n';
    for (std::size_t k = 0; k < track.size(); ++k) {
        out << k + 1;
        for (double v : track.means[k]) out << ',' << fmt_double(v);
        for (std::size_t i = 0; i < kStateDim; ++i) out << ',' << fmt_double(track.covs[k](i, i));
        for (double v : track.innovations[k]) out << ',' << fmt_double(v);
        out << ',' << fmt_double(err[k]);
        if (mode_probs != nullptr) {
            for (double v : (*mode_probs)[k]) out << ',' << fmt_double(v);
        }
        out << '\n';
    }
    return out.str();
}

/// k, W0..W10 mean head, W0..W10 covariance head.
inline std::string weight_log_csv(const std::vector<std::array<double, 2 * kSigmaCount>>& log) {
    std::ostringstream out;
    out << 'k';
    for (std::size_t i = 0; i < kSigmaCount; ++i) out << ",Wm" << i;
    for (std::size_t i = 0; i < kSigmaCount; ++i) out << ",Wc" << i;
    out << '\n';
    for (std::size_t k = 0; k < log.size(); ++k) {
        out << k + 1;
        for (double v : log[k]) out << ',' << fmt_double(v);
        out << '\n';
    }
    return out.str();
}

inline std::string training_log_csv(const std::vector<EpochLog>& history) {
    std::ostringstream out;
    out << "epoch,train_loss,val_armse,grad_norm,skipped,wall_seconds\n";
    for (const EpochLog& e : history) {
        out << e.epoch << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.val_armse) << ','
            << fmt_double(e.grad_norm) << ',' << e.skipped << ',' << fmt_double(e.wall_seconds) << '\n';
    }
    return out.str();
}

/// Minimal CSV reader: header plus rows of comma-separated fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

}  // namespace maukf
