#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ofvio {

// std::mt19937_64 is bit-exact across platforms; the std:: distributions are not,
// so the transforms below are spelled out.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return (engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n > 0.
    uint64_t uniform_index(uint64_t n) {
        // rejection keeps the distribution exact for any n
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
    }

    /// Standard normal via Box-Muller (deterministic given the seed).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 hash; used for seedable lattice noise.
inline uint64_t hash_u64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return hash_u64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

/// Deterministic lattice value in [0,1) at integer coordinates.
inline double lattice_value(uint64_t seed, int64_t ix, int64_t iy) {
    uint64_t h = hash_combine(seed, hash_combine(static_cast<uint64_t>(ix) * 0x8da6b343ull,
                                                 static_cast<uint64_t>(iy) * 0xd8163841ull));
    return (h >> 11) * (1.0 / 9007199254740992.0);
}

/// Smooth seedable 2-D value noise in [0,1), cosine-interpolated lattice noise.
inline double value_noise(uint64_t seed, double x, double y) {
    const int64_t ix = static_cast<int64_t>(std::floor(x));
    const int64_t iy = static_cast<int64_t>(std::floor(y));
    const double fx = x - static_cast<double>(ix);
    const double fy = y - static_cast<double>(iy);
    const double sx = 0.5 * (1.0 - std::cos(M_PI * fx));
    const double sy = 0.5 * (1.0 - std::cos(M_PI * fy));
    const double v00 = lattice_value(seed, ix, iy);
    const double v10 = lattice_value(seed, ix + 1, iy);
    const double v01 = lattice_value(seed, ix, iy + 1);
    const double v11 = lattice_value(seed, ix + 1, iy + 1);
    const double a = v00 + (v10 - v00) * sx;
    const double b = v01 + (v11 - v01) * sx;
    return a + (b - a) * sy;
}

}  // namespace ofvio
