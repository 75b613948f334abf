#pragma once

#include <cmath>
#include <string>

#include "cavicrys/errors.hpp"
#include "cavicrys/units.hpp"

namespace cavicrys {

/// Highest Hermite order the recurrence is vetted for.
inline constexpr int max_hermite_order = 20;

/// Transverse Hermite-Gaussian order (m along x, n along y).
struct ModeIndex {
    int m = 0;
    int n = 0;

    /// Order of the axial Gouy phase term, m + n + 1.
    int gouy_order() const { return m + n + 1; }

    /// Two-digit label, e.g. "10" for TEM10.
    std::string label() const { return std::to_string(m) + std::to_string(n); }

    friend bool operator==(ModeIndex a, ModeIndex b) { return a.m == b.m && a.n == b.n; }
};

inline void validate_mode(ModeIndex mode) {
    if (mode.m < 0 || mode.n < 0)
        throw ValidationError("mode indices must be non-negative");
    if (mode.m > max_hermite_order || mode.n > max_hermite_order)
        throw UnsupportedOrderError("mode order above supported cap " +
                                    std::to_string(max_hermite_order));
}

/// Geometry of the cavity field: wavelength, waist and the quantities
/// derived from them. Lengths in meters, wavenumber in rad/m.
class BeamGeometry {
public:
    /// Derives z_R = pi w0^2 / lambda and k = 2 pi / lambda.
    BeamGeometry(double wavelength, double waist)
        : wavelength_(wavelength),
          waist_(waist),
          rayleigh_range_(pi * waist * waist / wavelength),
          wavenumber_(two_pi / wavelength) {
        if (!(wavelength > 0.0) || !(waist > 0.0))
            throw ValidationError("beam wavelength and waist must be positive");
    }

    /// Accepts a caller-supplied Rayleigh range only if it matches the
    /// derived value within 1%; the derived value is what gets stored.
    BeamGeometry(double wavelength, double waist, double rayleigh_range)
        : BeamGeometry(wavelength, waist) {
        double derived = rayleigh_range_;
        if (!(rayleigh_range > 0.0) ||
            std::abs(rayleigh_range - derived) > 0.01 * derived)
            throw ValidationError("supplied Rayleigh range deviates more than 1% from pi*w0^2/lambda");
    }

    double wavelength() const { return wavelength_; }
    double waist() const { return waist_; }
    double rayleigh_range() const { return rayleigh_range_; }
    double wavenumber() const { return wavenumber_; }

private:
    double wavelength_;
    double waist_;
    double rayleigh_range_;
    double wavenumber_;
};

/// Beam radius w(z) = w0 sqrt(1 + z^2/z_R^2). Even in z, >= w0.
inline double waist_at(const BeamGeometry& geom, double z) {
    double t = z / geom.rayleigh_range();
    return geom.waist() * std::sqrt(1.0 + t * t);
}

/// Inverse wavefront curvature radius 1/r(z) = z / (z^2 + z_R^2).
/// The reciprocal form is finite everywhere, including the waist where
/// the printed r(z) = z + z_R^2/z diverges. Odd in z.
inline double curvature_at(const BeamGeometry& geom, double z) {
    double zr = geom.rayleigh_range();
    return z / (z * z + zr * zr);
}

/// Physicists' Hermite polynomial H_l(t) by the forward recurrence
/// H_{l+1} = 2t H_l - 2l H_{l-1}.
inline double hermite_poly(int l, double t) {
    if (l < 0) throw ValidationError("hermite order must be non-negative");
    if (l > max_hermite_order)
        throw UnsupportedOrderError("hermite order " + std::to_string(l) +
                                    " above supported cap " + std::to_string(max_hermite_order));
    double h0 = 1.0;
    if (l == 0) return h0;
    double h1 = 2.0 * t;
    for (int j = 1; j < l; ++j) {
        double h2 = 2.0 * t * h1 - 2.0 * j * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

/// Equal-power weight 1/(2^l l!): divides out the Hermite norm
/// integral H_l^2 exp(-t^2) = 2^l l! sqrt(pi) so every transverse order
/// carries the same power as the fundamental.
inline double hermite_power_norm(int l) {
    if (l < 0) throw ValidationError("hermite order must be non-negative");
    if (l > max_hermite_order)
        throw UnsupportedOrderError("hermite order above supported cap");
    double w = 1.0;
    for (int j = 1; j <= l; ++j) w /= 2.0 * j;
    return w;
}

/// 1D mode function Psi_l(u, z) = sqrt(w0/w) H_l(u sqrt2 / w) exp(-u^2/w^2).
/// This is the bare (unnormalized-Hermite) form; its square integrates to
/// (w0/sqrt2) 2^l l! sqrt(pi) independent of z.
inline double mode_amplitude(const BeamGeometry& geom, int l, double u, double z) {
    double w = waist_at(geom, z);
    double s = u / w;
    return std::sqrt(geom.waist() / w) * hermite_poly(l, s * std::sqrt(2.0)) *
           std::exp(-s * s);
}

/// Squared mode function with the equal-power weight folded in:
/// Psi_l^2 / (2^l l!). Peak value 1 for l=0 at the waist center; the
/// transverse integral is order-independent, which is what makes the
/// collective couplings of different TEM modes converge for wide crystals.
inline double mode_intensity(const BeamGeometry& geom, int l, double u, double z) {
    double a = mode_amplitude(geom, l, u, z);
    return a * a * hermite_power_norm(l);
}

/// Axial phase of the standing wave at cavity-frame (x, y, z):
///   k z - (m+n+1) atan(z/z_R) + k (x^2+y^2) / (2 r(z)).
inline double standing_wave_phase(const BeamGeometry& geom, ModeIndex mode,
                                  double x, double y, double z) {
    double gouy = mode.gouy_order() * std::atan(z / geom.rayleigh_range());
    double transverse = geom.wavenumber() * (x * x + y * y) * curvature_at(geom, z) / 2.0;
    return geom.wavenumber() * z - gouy + transverse;
}

}  // namespace cavicrys
