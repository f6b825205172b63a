#pragma once

#include <cmath>
#include <vector>

#include "maukf/dynamics.hpp"
#include "maukf/models.hpp"
#include "maukf/ukf.hpp"

namespace maukf {

/// Position error beyond which a run counts as diverged; also the ARMSE cap.
inline constexpr double kDivergenceCap = 1e4;

/// Euclidean position error of each estimate against truth x_1..x_T.
inline std::vector<double> position_errors(const Track& track, const Episode& ep) {
    if (track.size() != ep.steps() || ep.truth.size() != ep.steps() + 1) {
        throw ShapeError("position_errors: track and episode lengths differ");
    }
    std::vector<double> out(track.size());
    for (std::size_t k = 0; k < track.size(); ++k) {
        const State& x = ep.truth[k + 1];
        const State& e = track.means[k];
        out[k] = std::hypot(x[kPx] - e[kPx], x[kPy] - e[kPy]);
    }
    return out;
}

/// sqrt((1/T) sum_k ((p_x - p^_x)^2 + (p_y - p^_y)^2))
inline double armse(const Track& track, const Episode& ep) {
    if (track.size() != ep.steps() || ep.truth.size() != ep.steps() + 1) {
        throw ShapeError("armse: track and episode lengths differ");
    }
    if (track.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < track.size(); ++k) {
        const State& x = ep.truth[k + 1];
        const State& e = track.means[k];
        const double dx = x[kPx] - e[kPx], dy = x[kPy] - e[kPy];
        s += dx * dx + dy * dy;
    }
    return std::sqrt(s / static_cast<double>(track.size()));
}

/// True when any position error exceeds the divergence threshold.
inline bool diverged(const Track& track, const Episode& ep) {
    for (double e : position_errors(track, ep))
        if (!(e <= kDivergenceCap)) return true;
    return false;
}

struct SampleStats {
    std::size_t count = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n-1)
};

inline SampleStats sample_stats(const std::vector<double>& v) {
    SampleStats s;
    s.count = v.size();
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

}  // namespace maukf
