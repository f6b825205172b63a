#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace maukf {

/**
 * @brief Deterministic random stream used by every generator in the toolkit.
 *
 * Engine: std::mt19937_64 (its output sequence is fixed by the C++ standard).
 * Uniforms take the top 53 bits: u = (x >> 11) * 2^-53, in [0, 1).
 * Normals use the basic Box-Muller transform on (1 - u1, u2); both outputs
 * of a pair are consumed, the second one cached for the next call.
 * No std:: distribution is used, since their algorithms are
 * implementation-defined.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform on [-hi, -lo] U [lo, hi]: sign first, then magnitude.
    double uniform_symmetric_band(double lo, double hi) {
        const double sign = uniform() < 0.5 ? -1.0 : 1.0;
        return sign * uniform(lo, hi);
    }

    /// Log-uniform on [lo, hi].
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Index in [0, n), by multiply-shift on the top 32 bits.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>((engine_() >> 32) * static_cast<std::uint64_t>(n) >> 32);
    }

    /// Fisher-Yates shuffle driven by index().
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Per-episode stream seed: base seed XOR episode index.
inline std::uint64_t episode_seed(std::uint64_t base_seed, std::uint64_t index) {
    return base_seed ^ index;
}

}  // namespace maukf
