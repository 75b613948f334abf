#pragma once

namespace cavicrys {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// All rates (kappa, gamma, G, detunings) are angular HWHM rates in rad/s.
// User-facing output mirrors the "(2pi) X MHz" convention of the literature.
inline constexpr double mhz_over_2pi(double rate_rad_per_s) {
    return rate_rad_per_s / two_pi / 1e6;
}

inline constexpr double rate_from_mhz(double mhz) {
    return two_pi * 1e6 * mhz;
}

}  // namespace cavicrys
