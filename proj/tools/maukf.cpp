// maukf command-line tool: dataset generation, training, tuning, benchmark
// and report emission.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "maukf/bench.hpp"
#include "maukf/config.hpp"
#include "maukf/io.hpp"
#include "maukf/report.hpp"
#include "maukf/trainer.hpp"

namespace fs = std::filesystem;
using namespace maukf;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDivergence = 2, kIoError = 3 };

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::size_t threads = default_threads();
    std::optional<std::size_t> episodes;
};

ToolkitConfig load(const GlobalOptions& g) {
    ToolkitConfig c = g.config.empty() ? ToolkitConfig{} : load_config(g.config);
    if (g.seed) c.seed = *g.seed;
    c.train.seq_len = c.sim.steps;
    c.validate();
    return c;
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

void write_split(const fs::path& dir, const std::string& name, const std::vector<Episode>& eps,
                 std::uint64_t cfg_hash, bool csv) {
    json files = json::array();
    for (std::size_t i = 0; i < eps.size(); ++i) {
        char base[32];
        std::snprintf(base, sizeof base, "episode_%05zu", i);
        write_file(dir / name / (std::string(base) + ".json"), episode_to_json(eps[i]).dump());
        if (csv) write_file(dir / name / (std::string(base) + ".csv"), episode_csv(eps[i]));
        files.push_back(std::string(base) + ".json");
    }
    json manifest = {{"split", name},
                     {"regime", eps.empty() ? "" : regime_name(eps.front().regime)},
                     {"episodes", eps.size()},
                     {"config_hash", hex64(cfg_hash)},
                     {"dataset_hash", hex64(dataset_hash(eps))},
                     {"files", files}};
    write_file(dir / name / "manifest.json", manifest.dump(2) + "\n");
    log("wrote " + std::to_string(eps.size()) + " episodes to " + (dir / name).string() + " (hash " +
        hex64(dataset_hash(eps)) + ")");
}

int cmd_gen(const GlobalOptions& g, bool csv) {
    ToolkitConfig c = load(g);
    const std::uint64_t h = config_hash(c);
    const fs::path out = g.out;
    auto [train, val] = training_split(c);
    write_split(out, "train", train, h, csv);
    write_split(out, "val", val, h, csv);
    write_split(out, "tune", tuning_dataset(c, c.bench.tuning_episodes), h, csv);
    const std::size_t n = g.episodes.value_or(c.bench.episodes);
    write_split(out, "bench_train", bench_dataset(c, Regime::train_ct, n), h, csv);
    write_split(out, "bench_weave", bench_dataset(c, Regime::eval_weave, n), h, csv);
    write_file(out / "config.json", to_json(c).dump(2) + "\n");
    return kOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const GlobalOptions& g, const std::string& resume_from, bool resume) {
    ToolkitConfig c = load(g);
    if (g.episodes) c.train.episodes = *g.episodes;
    c.validate();
    const fs::path out = g.out;
    auto [train_set, val_set] = training_split(c);
    log("training on " + std::to_string(train_set.size()) + " episodes, validating on " +
        std::to_string(val_set.size()) + " (train hash " + hex64(dataset_hash(train_set)) + ")");

    TrainState state;
    const fs::path state_path = resume_from.empty() ? out / "train_state.json" : fs::path(resume_from);
    if (resume || !resume_from.empty()) {
        state = load_training_state(read_json(state_path));
        log("resuming from " + state_path.string() + " at epoch " + std::to_string(state.epoch));
    } else {
        state = initial_train_state(c.train);
    }

    auto save = [&](const TrainState& s) {
        write_file(out / "train_state.json", training_checkpoint(s, c.train.seed).dump());
        write_file(out / "policy.json", policy_checkpoint(s.best, c.train.seed, s.best_epoch, s.best_val).dump());
        write_file(out / "training_log.csv", training_log_csv(s.history));
    };
    write_file(out / "config.json", to_json(c).dump(2) + "\n");

    train(train_set, val_set, c.train, c.ma(), c.P0(), state, g.threads, [&](const EpochLog& e, const TrainState& s) {
        char line[200];
        std::snprintf(line, sizeof line, "epoch %4zu  loss %.4e  val %.3f m  |g| %.3e  skipped %zu  %.1fs", e.epoch,
                      e.train_loss, e.val_armse, e.grad_norm, e.skipped, e.wall_seconds);
        log(line);
        if (c.train.checkpoint_every > 0 && e.epoch % c.train.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_epoch%04zu_val%.3f.json", e.epoch, e.val_armse);
            write_file(out / "checkpoints" / name, training_checkpoint(s, c.train.seed).dump());
            save(s);
        }
    });
    save(state);
    log("best validation ARMSE " + fmt_double(state.best_val) + " m at epoch " + std::to_string(state.best_epoch));
    return kOk;
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

json tuned_to_json(const TuneResult& u, const TuneResult& i) {
    auto ut = [](const UtParams& p) { return json{{"alpha", p.alpha}, {"beta", p.beta}, {"kappa", p.kappa}}; };
    return {{"ukf", ut(u.best)},
            {"ukf_score", u.best_score},
            {"ukf_nominal_score", u.nominal_score},
            {"imm", ut(i.best)},
            {"imm_stay", i.best_stay},
            {"imm_score", i.best_score},
            {"imm_nominal_score", i.nominal_score}};
}

void apply_tuned(const json& j, MethodSetup& s) {
    auto ut = [](const json& x) {
        return UtParams{x.at("alpha").get<double>(), x.at("beta").get<double>(), x.at("kappa").get<double>()};
    };
    s.ukf_tuned = ut(j.at("ukf"));
    s.imm_tuned = ut(j.at("imm"));
    s.imm_tuned_stay = j.at("imm_stay").get<double>();
}

std::pair<TuneResult, TuneResult> run_tuning(const ToolkitConfig& c, std::size_t threads) {
    const std::vector<Episode> tuning = tuning_dataset(c, c.bench.tuning_episodes);
    const std::uint64_t s = stream_seed(c.seed, Stream::tuning);
    log("tuning UKF* over " + std::to_string(c.bench.trials) + " trials on " + std::to_string(tuning.size()) +
        " episodes");
    TuneResult u = tune_ukf(c, tuning, c.bench.trials, mix64(s + 1), threads);
    log("tuning IMM-UKF*");
    TuneResult i = tune_imm(c, tuning, c.bench.trials, mix64(s + 2), threads);
    return {std::move(u), std::move(i)};
}

std::string combined_trial_log(const TuneResult& u, const TuneResult& i) {
    std::vector<TrialRecord> all = u.log;
    all.insert(all.end(), i.log.begin(), i.log.end());
    return trial_log_csv(all);
}

int cmd_tune(const GlobalOptions& g) {
    ToolkitConfig c = load(g);
    if (g.episodes) c.bench.tuning_episodes = *g.episodes;
    c.validate();
    auto [u, i] = run_tuning(c, g.threads);
    const fs::path out = g.out;
    write_file(out / "tuned.json", tuned_to_json(u, i).dump(2) + "\n");
    write_file(out / "trial_log.csv", combined_trial_log(u, i));
    log("UKF* score " + fmt_double(u.best_score) + " (nominal " + fmt_double(u.nominal_score) + "), IMM-UKF* " +
        fmt_double(i.best_score) + " (nominal " + fmt_double(i.nominal_score) + ")");
    return kOk;
}

// ---------------------------------------------------------------------------
// bench / report
// ---------------------------------------------------------------------------

void write_figures(const fs::path& out, const ToolkitConfig& c, const MethodSetup& setup) {
    const std::size_t idx = c.bench.sample_episode;
    const Episode ep = generate_episode(Regime::eval_weave, episode_seed(stream_seed(c.seed, Stream::bench_weave), idx),
                                        c.sim.steps, c.sim.dt, c.noise_model(Regime::eval_weave));
    const SampleTracks s = sample_tracks(c, setup, ep);
    for (const auto& [m, track] : s.tracks) {
        write_file(out / ("trajectory_" + std::string(method_slug(m)) + ".svg"),
                   trajectory_svg(ep, track, std::string(method_name(m)) + ", weave episode " + std::to_string(idx)));
        write_file(out / "tracks" / ("track_" + std::string(method_slug(m)) + ".csv"), track_csv(track, ep));
    }
    if (!s.weights.empty()) {
        write_file(out / "weights.svg", weights_svg(s.weights, ep.glint));
        write_file(out / "tracks" / "weights.csv", weight_log_csv(s.weights));
    }
    write_file(out / "tracks" / "episode.csv", episode_csv(ep));
}

MethodSetup setup_from_files(const ToolkitConfig& c, const std::string& tuned, const std::string& ckpt) {
    MethodSetup s = default_setup(c);
    if (!tuned.empty()) apply_tuned(read_json(tuned), s);
    if (!ckpt.empty()) s.policy = load_policy(read_json(ckpt));
    return s;
}

int cmd_bench(const GlobalOptions& g, const std::string& tuned, const std::string& ckpt, bool figures) {
    ToolkitConfig c = load(g);
    if (g.episodes) c.bench.episodes = *g.episodes;
    c.validate();
    const fs::path out = g.out;
    MethodSetup setup = setup_from_files(c, tuned, ckpt);
    if (tuned.empty()) {
        auto [u, i] = run_tuning(c, g.threads);
        write_file(out / "tuned.json", tuned_to_json(u, i).dump(2) + "\n");
        write_file(out / "trial_log.csv", combined_trial_log(u, i));
        apply_tuned(tuned_to_json(u, i), setup);
    }
    if (!setup.policy) log("no --ckpt given; MA-UKF is skipped");
    const auto train_set = bench_dataset(c, Regime::train_ct, c.bench.episodes);
    const auto weave_set = bench_dataset(c, Regime::eval_weave, c.bench.episodes);
    log("benchmarking on " + std::to_string(c.bench.episodes) + " episodes per regime");
    const BenchReport rep = run_benchmark(c, train_set, weave_set, setup, g.threads);
    write_file(out / "report.csv", report_csv(rep));
    write_file(out / "report.txt", report_txt(rep));
    write_file(out / "report.json", report_manifest(rep, c).dump(2) + "\n");
    if (figures) write_figures(out, c, setup);
    std::cout << report_txt(rep);
    return kOk;
}

int cmd_report(const GlobalOptions& g, const std::string& tuned, const std::string& ckpt) {
    ToolkitConfig c = load(g);
    const fs::path out = g.out;
    const CsvTable t = parse_csv(read_file(out / "report.csv"));
    if (t.header.size() < 8) throw IoError("report.csv: unexpected header");
    std::printf("%-11s %-10s %8s %5s %22s %22s\n", "regime", "method", "episodes", "div", "ARMSE completed",
                "ARMSE capped");
    for (const auto& r : t.rows) {
        if (r.size() < 8) throw IoError("report.csv: short row");
        const std::string completed = detail::fixed(std::stod(r[4]), 2) + " +- " + detail::fixed(std::stod(r[5]), 2);
        const std::string capped = detail::fixed(std::stod(r[6]), 2) + " +- " + detail::fixed(std::stod(r[7]), 2);
        std::printf("%-11s %-10s %8s %5s %22s %22s\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str(),
                    completed.c_str(), capped.c_str());
    }
    const std::string tuned_path = tuned.empty() && fs::exists(out / "tuned.json") ? (out / "tuned.json").string() : tuned;
    write_figures(out, c, setup_from_files(c, tuned_path, ckpt));
    return kOk;
}

// ---------------------------------------------------------------------------
// inspect-ckpt
// ---------------------------------------------------------------------------

int cmd_inspect(const std::string& path) {
    const json j = read_json(path);
    const PolicyParams p = load_policy(j);
    std::printf("file        %s\n", path.c_str());
    std::printf("version     %d\n", j.at("version").get<int>());
    std::printf("kind        %s\n", j.contains("optimizer") ? "training state" : "policy");
    std::printf("dims        n_x=%zu n_z=%zu d_h=%zu d_p=%zu\n", p.dims.state, p.dims.meas, p.dims.hidden,
                p.dims.context);
    std::printf("seed        %llu\n", static_cast<unsigned long long>(j.at("seed").get<std::uint64_t>()));
    std::printf("epoch       %zu\n", j.at("epoch").get<std::size_t>());
    std::printf("val ARMSE   %s m\n", fmt_double(j.at("val_armse").get<double>()).c_str());
    std::printf("parameters  %zu\n", parameter_count(p));
    p.for_each([](const char* name, const Matrix& m) {
        std::printf("  %-14s %3zu x %-3zu  |.|_F = %.6g\n", name, m.rows(), m.cols(), frobenius_norm(m));
    });
    if (j.contains("optimizer")) {
        std::printf("adam step   %llu\n",
                    static_cast<unsigned long long>(j.at("optimizer").at("step").get<std::uint64_t>()));
        std::printf("history     %zu epochs\n", j.at("history").size());
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meta-adaptive UKF toolkit"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--episodes", g.episodes, "episode count override for the verb")->check(CLI::PositiveNumber);

    bool csv = false;
    auto* gen = app.add_subcommand("gen", "generate the training, tuning and benchmark datasets");
    gen->add_flag("--csv", csv, "also write flat CSV exports");

    std::string ckpt, tuned;
    bool resume = false, no_figures = false;
    auto* tr = app.add_subcommand("train", "train the MA-UKF policy");
    tr->add_flag("--resume", resume, "continue from <out>/train_state.json");
    tr->add_option("--ckpt", ckpt, "training checkpoint to resume from");

    auto* tune = app.add_subcommand("tune", "random-search UKF* and IMM-UKF*");

    auto* bench = app.add_subcommand("bench", "Monte Carlo benchmark of all filters");
    bench->add_option("--ckpt", ckpt, "policy checkpoint for the MA-UKF");
    bench->add_option("--tuned", tuned, "tuned.json from `tune` (otherwise tuning runs first)");
    bench->add_flag("--no-figures", no_figures, "skip the SVG figures");

    auto* report = app.add_subcommand("report", "print report.csv from --out and redraw the figures");
    report->add_option("--ckpt", ckpt, "policy checkpoint for the MA-UKF");
    report->add_option("--tuned", tuned, "tuned.json");

    auto* inspect = app.add_subcommand("inspect-ckpt", "summarize a checkpoint");
    inspect->add_option("--ckpt", ckpt, "checkpoint file")->required();

    for (CLI::App* sub : {gen, tr, tune, bench, report, inspect}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*gen) return cmd_gen(g, csv);
        if (*tr) return cmd_train(g, ckpt, resume);
        if (*tune) return cmd_tune(g);
        if (*bench) return cmd_bench(g, tuned, ckpt, !no_figures);
        if (*report) return cmd_report(g, tuned, ckpt);
        if (*inspect) return cmd_inspect(ckpt);
    } catch (const ConfigError& e) {
        log(std::string("config error: ") + e.what());
        return kConfigError;
    } catch (const TrainingAborted& e) {
        log(std::string("training aborted: ") + e.what());
        return kDivergence;
    } catch (const FilterFailure& e) {
        log(std::string("filter diverged: ") + e.what());
        return kDivergence;
    } catch (const IoError& e) {
        log(std::string("I/O error: ") + e.what());
        return kIoError;
    } catch (const json::exception& e) {
        log(std::string("malformed file: ") + e.what());
        return kIoError;
    } catch (const std::invalid_argument& e) {
        log(std::string("invalid argument: ") + e.what());
        return kConfigError;
    }
    return kConfigError;
}
