// Benchmark outputs: CSV and text tables, the trial log, and SVG figures.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "maukf/bench.hpp"
#include "maukf/io.hpp"

namespace maukf {

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Machine-readable summary. Holds no timing so reruns are byte-identical.
inline std::string report_csv(const BenchReport& rep) {
    std::ostringstream out;
    out << "regime,method,episodes,divergences,armse_mean,armse_std,armse_capped_mean,armse_capped_std,"
           "dataset_hash,config_hash\n";
    for (const MethodSummary& s : rep.rows) {
        const std::uint64_t h = s.regime == Regime::train_ct ? rep.train_hash : rep.weave_hash;
        out << regime_name(s.regime) << ',' << method_name(s.method) << ',' << s.episodes << ','
            << s.divergences << ',' << fmt_double(s.completed.mean) << ',' << fmt_double(s.completed.std) << ','
            << fmt_double(s.capped.mean) << ',' << fmt_double(s.capped.std) << ',' << hex64(h) << ','
            << hex64(rep.config_hash) << '\n';
    }
    return out.str();
}

/// Run metadata: config snapshot, dataset hashes and the tuned parameters.
inline json report_manifest(const BenchReport& rep, const ToolkitConfig& c) {
    auto ut = [](const UtParams& p) { return json{{"alpha", p.alpha}, {"beta", p.beta}, {"kappa", p.kappa}}; };
    auto count = [&](Regime r) {
        for (const MethodSummary& s : rep.rows)
            if (s.regime == r) return s.episodes;
        return std::size_t{0};
    };
    json j = {{"config", to_json(c)},
              {"config_hash", hex64(rep.config_hash)},
              {"datasets",
               {{"train-CT", {{"episodes", count(Regime::train_ct)}, {"hash", hex64(rep.train_hash)}}},
                {"eval-weave", {{"episodes", count(Regime::eval_weave)}, {"hash", hex64(rep.weave_hash)}}}}},
              {"ukf_tuned", ut(rep.setup.ukf_tuned)},
              {"imm_tuned", ut(rep.setup.imm_tuned)},
              {"imm_tuned_stay", rep.setup.imm_tuned_stay},
              {"ma_ukf", rep.setup.policy.has_value()}};
    return j;
}

/// Human-readable table: one row per method, both regimes side by side.
inline std::string report_txt(const BenchReport& rep) {
    using detail::fixed;
    std::ostringstream out;
    out << "Monte Carlo benchmark, ARMSE in metres (mean +- std across episodes)\n";
    out << "completed = diverged runs excluded; capped = diverged runs scored at "
        << fixed(kDivergenceCap, 0) << " m\n\n";
    char line[256];
    std::snprintf(line, sizeof line, "%-10s | %-22s %-22s %5s | %-22s %-22s %5s | %10s\n", "Method",
                  "train-CT completed", "train-CT capped", "div", "weave completed", "weave capped", "div",
                  "step [us]");
    out << line << std::string(std::string(line).size() - 1, '-') << '\n';
    auto cell = [](const MethodSummary* s, bool capped) -> std::string {
        if (s == nullptr) return "n/a";
        const SampleStats& st = capped ? s->capped : s->completed;
        if (st.count == 0) return "n/a";
        return fixed(st.mean, 2) + " +- " + fixed(st.std, 2);
    };
    for (Method m : kAllMethods) {
        const MethodSummary* a = rep.find(m, Regime::train_ct);
        const MethodSummary* b = rep.find(m, Regime::eval_weave);
        if (a == nullptr && b == nullptr) continue;
        double step = 0.0;
        int n = 0;
        for (const MethodSummary* s : {a, b}) {
            if (s != nullptr && s->step_seconds > 0.0) {
                step += s->step_seconds;
                ++n;
            }
        }
        std::snprintf(line, sizeof line, "%-10s | %-22s %-22s %5s | %-22s %-22s %5s | %10s\n", method_name(m),
                      cell(a, false).c_str(), cell(a, true).c_str(),
                      a ? std::to_string(a->divergences).c_str() : "-", cell(b, false).c_str(),
                      cell(b, true).c_str(), b ? std::to_string(b->divergences).c_str() : "-",
                      n ? fixed(1e6 * step / n, 2).c_str() : "n/a");
        out << line;
    }
    const MethodSetup& s = rep.setup;
    out << "\nUKF*      alpha=" << fixed(s.ukf_tuned.alpha, 4) << " beta=" << fixed(s.ukf_tuned.beta, 4)
        << " kappa=" << fixed(s.ukf_tuned.kappa, 4) << '\n';
    out << "IMM-UKF*  alpha=" << fixed(s.imm_tuned.alpha, 4) << " beta=" << fixed(s.imm_tuned.beta, 4)
        << " kappa=" << fixed(s.imm_tuned.kappa, 4) << " stay=" << fixed(s.imm_tuned_stay, 4) << '\n';
    if (!s.policy) out << "MA-UKF    not evaluated (no checkpoint)\n";
    out << "\ndataset hashes: train-CT " << hex64(rep.train_hash) << ", weave " << hex64(rep.weave_hash)
        << "; config " << hex64(rep.config_hash) << '\n';
    return out.str();
}

inline std::string trial_log_csv(const std::vector<TrialRecord>& log) {
    std::ostringstream out;
    out << "method,trial,alpha,beta,kappa,stay,score,divergences,best_so_far\n";
    for (const TrialRecord& t : log) {
        out << t.method << ',' << t.trial << ',' << fmt_double(t.ut.alpha) << ',' << fmt_double(t.ut.beta) << ','
            << fmt_double(t.ut.kappa) << ',' << (std::isnan(t.stay) ? std::string() : fmt_double(t.stay)) << ','
            << fmt_double(t.score) << ',' << t.divergences << ',' << (t.best_so_far ? 1 : 0) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// SVG figures
// ---------------------------------------------------------------------------

/// Maps data coordinates into a plot box; y grows upwards.
struct PlotFrame {
    double x0, x1, y0, y1;          // data range
    double left, top, width, height;  // pixel box

    double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
    double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

namespace detail {

inline void pad_range(double& lo, double& hi) {
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
}

inline std::string polyline(const PlotFrame& f, const std::vector<std::pair<double, double>>& pts,
                            const std::string& color, double stroke, const std::string& extra = {}) {
    std::ostringstream out;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke << "\"" << extra
        << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) out << ' ';
        out << fixed(f.px(pts[i].first), 2) << ',' << fixed(f.py(pts[i].second), 2);
    }
    out << "\"/>\n";
    return out.str();
}

inline std::string frame_box(const PlotFrame& f, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream out;
    out << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width << "\" height=\"" << f.height
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << f.left + f.width / 2 << "\" y=\"" << f.top + f.height + 32
        << "\" text-anchor=\"middle\" font-size=\"12\">" << svg_escape(xlabel) << "</text>\n";
    out << "<text x=\"" << f.left - 48 << "\" y=\"" << f.top + f.height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " << f.left - 48 << ' '
        << f.top + f.height / 2 << ")\">" << svg_escape(ylabel) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        out << "<text x=\"" << fixed(f.px(xv), 1) << "\" y=\"" << f.top + f.height + 15
            << "\" text-anchor=\"middle\" font-size=\"10\">" << fixed(xv, 1) << "</text>\n";
        out << "<text x=\"" << f.left - 5 << "\" y=\"" << fixed(f.py(yv) + 3, 1)
            << "\" text-anchor=\"end\" font-size=\"10\">" << fixed(yv, std::abs(f.y1 - f.y0) < 5 ? 2 : 0)
            << "</text>\n";
    }
    return out.str();
}

}  // namespace detail

/// Truth, measurements (as x-y points) and one method's estimate.
inline std::string trajectory_svg(const Episode& ep, const Track& track, const std::string& title) {
    std::vector<std::pair<double, double>> truth, est, meas;
    for (const State& x : ep.truth) truth.emplace_back(x[kPx], x[kPy]);
    for (const State& x : track.means) est.emplace_back(x[kPx], x[kPy]);
    for (const Measurement& z : ep.measurements) meas.emplace_back(z[0] * std::cos(z[1]), z[0] * std::sin(z[1]));
    // Frame on truth and estimate; glint measurements may fall far outside.
    double x0 = truth.front().first, x1 = x0, y0 = truth.front().second, y1 = y0;
    for (const auto* set : {&truth, &est}) {
        for (const auto& [x, y] : *set) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    }
    detail::pad_range(x0, x1);
    detail::pad_range(y0, y1);
    const PlotFrame f{x0, x1, y0, y1, 70, 40, 560, 420};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"700\" height=\"520\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"350\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::svg_escape(title)
        << "</text>\n";
    out << detail::frame_box(f, "x [m]", "y [m]");
    out << "<g fill=\"#999\">\n";
    for (const auto& [x, y] : meas) {
        if (x < x0 || x > x1 || y < y0 || y > y1) continue;
        out << "<circle cx=\"" << detail::fixed(f.px(x), 2) << "\" cy=\"" << detail::fixed(f.py(y), 2)
            << "\" r=\"1.5\"/>\n";
    }
    out << "</g>\n";
    out << detail::polyline(f, truth, "#000", 2.0);
    out << detail::polyline(f, est, "#d62728", 1.5, " stroke-dasharray=\"5,3\"");
    out << "<text x=\"80\" y=\"58\" font-size=\"11\">black: truth, red dashed: estimate, grey: measurements</text>\n";
    out << "</svg>\n";
    return out.str();
}

/// Two panels: mean-head weights over time, covariance-head weights over time.
/// Each polyline has exactly one vertex per weight-log row.
inline std::string weights_svg(const std::vector<std::array<double, 2 * kSigmaCount>>& log,
                               const std::vector<bool>& glint = {}) {
    static const char* palette[kSigmaCount] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                               "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"640\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"380\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">Sigma-point weights per step</text>\n";
    const double n = static_cast<double>(std::max<std::size_t>(log.size(), 2));
    for (int head = 0; head < 2; ++head) {
        double lo = 1.0, hi = 0.0;
        for (const auto& row : log)
            for (std::size_t i = 0; i < kSigmaCount; ++i) {
                lo = std::min(lo, row[head * kSigmaCount + i]);
                hi = std::max(hi, row[head * kSigmaCount + i]);
            }
        if (log.empty()) lo = 0.0, hi = 1.0;
        detail::pad_range(lo, hi);
        const PlotFrame f{1.0, n, lo, hi, 80, 45.0 + head * 295.0, 640, 230};
        out << detail::frame_box(f, "step k", head == 0 ? "mean weight" : "covariance weight");
        for (std::size_t k = 0; k < glint.size() && k < log.size(); ++k) {
            if (!glint[k]) continue;
            const double x = f.px(static_cast<double>(k + 1));
            out << "<line x1=\"" << detail::fixed(x, 2) << "\" y1=\"" << f.top << "\" x2=\"" << detail::fixed(x, 2)
                << "\" y2=\"" << f.top + f.height << "\" stroke=\"#f4b6b6\"/>\n";
        }
        for (std::size_t i = 0; i < kSigmaCount; ++i) {
            std::vector<std::pair<double, double>> pts;
            pts.reserve(log.size());
            for (std::size_t k = 0; k < log.size(); ++k)
                pts.emplace_back(static_cast<double>(k + 1), log[k][head * kSigmaCount + i]);
            out << detail::polyline(f, pts, palette[i], 1.2,
                                    " class=\"w" + std::string(head == 0 ? "m" : "c") + std::to_string(i) + "\"");
        }
    }
    out << "<text x=\"80\" y=\"630\" font-size=\"11\">one line per sigma point (0 = centre, black = 10); "
           "shaded verticals mark glint steps</text>\n";
    out << "</svg>\n";
    return out.str();
}

}  // namespace maukf
