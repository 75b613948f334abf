#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cavicrys/units.hpp"

namespace cavicrys {

/// splitmix64 step; used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` of a base seed. Distinct indices give
/// decorrelated generators; the mapping is fixed for reproducibility.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t s = base ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
    splitmix64(s);
    return splitmix64(s);
}

/// Deterministic double-precision variates on top of mt19937_64.
/// The uniform/gaussian mappings are spelled out here instead of using
/// std::*_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [-1, 1).
    double uniform_pm1() { return 2.0 * uniform() - 1.0; }

    /// Standard normal via Box-Muller; caches the second variate.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]; keeps log() finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        have_spare_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace cavicrys
