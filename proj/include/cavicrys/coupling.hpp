#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "cavicrys/beam_optics.hpp"
#include "cavicrys/crystal.hpp"
#include "cavicrys/errors.hpp"
#include "cavicrys/quadrature.hpp"
#include "cavicrys/units.hpp"

namespace cavicrys {

enum class CouplingMethod { PhaseAveraged, Oscillatory, MonteCarlo };

inline std::string to_string(CouplingMethod m) {
    switch (m) {
        case CouplingMethod::PhaseAveraged: return "averaged";
        case CouplingMethod::Oscillatory: return "oscillatory";
        case CouplingMethod::MonteCarlo: return "mc";
    }
    return "?";
}

struct CouplingConfig {
    double single_ion_g = 1.0;  ///< anti-node coupling of one ion, rad/s
    CouplingMethod method = CouplingMethod::PhaseAveraged;
    double rel_tolerance = 1e-4;
    long long mc_samples = 1'000'000;
    std::uint64_t mc_seed = 1;
    int max_cells = 60000;  ///< transverse quadrature cell budget
};

inline void validate_coupling_config(const CouplingConfig& cfg) {
    if (!(cfg.single_ion_g > 0.0))
        throw ValidationError("single-ion coupling g must be positive");
    if (!(cfg.rel_tolerance > 0.0) || cfg.rel_tolerance > 0.1)
        throw ValidationError("coupling rel_tolerance must lie in (0, 0.1]");
    if (cfg.mc_samples < 1000)
        throw ValidationError("mc_samples must be >= 1000");
}

struct CouplingResult {
    double g_squared = 0.0;      ///< G_mn^2, rad^2/s^2
    double g_rate = 0.0;         ///< G_mn = sqrt(G_mn^2), rad/s
    double est_rel_error = 0.0;  ///< quadrature estimate or MC standard error
    CouplingMethod method_used = CouplingMethod::PhaseAveraged;
    long long evaluations = 0;   ///< integrand/envelope evaluations spent
};

/// Local coupling density at cavity-frame (x, y, z): the product of
/// equal-power transverse mode intensities and sin^2 of the standing-wave
/// phase. G^2 = g^2 rho * Integral of this over the (displaced) crystal.
inline double coupling_integrand(const BeamGeometry& geom, ModeIndex mode, double x,
                                 double y, double z) {
    double s = std::sin(standing_wave_phase(geom, mode, x, y, z));
    return mode_intensity(geom, mode.m, x, z) * mode_intensity(geom, mode.n, y, z) * s * s;
}

namespace detail {

/// Fused per-point evaluation used by the integration hot paths.
/// Identical maths to coupling_integrand, with the shared w(z) factors
/// computed once (checked against the reference in the test suite).
struct ModePointEval {
    double w0, inv_zr, k;
    int m, n, gouy;
    double norm;  // hermite_power_norm(m) * hermite_power_norm(n)

    ModePointEval(const BeamGeometry& geom, ModeIndex mode)
        : w0(geom.waist()),
          inv_zr(1.0 / geom.rayleigh_range()),
          k(geom.wavenumber()),
          m(mode.m),
          n(mode.n),
          gouy(mode.gouy_order()),
          norm(hermite_power_norm(mode.m) * hermite_power_norm(mode.n)) {}

    static double hermite(int l, double t) {
        if (l == 0) return 1.0;
        double h0 = 1.0, h1 = 2.0 * t;
        for (int j = 1; j < l; ++j) {
            double h2 = 2.0 * t * h1 - 2.0 * j * h0;
            h0 = h1;
            h1 = h2;
        }
        return h1;
    }

    /// Psi_m^2(x,z) Psi_n^2(y,z) with the equal-power weights.
    double envelope(double x, double y, double z) const {
        double t = z * inv_zr;
        double omt = 1.0 + t * t;
        double w2 = w0 * w0 * omt;
        double inv_w = 1.0 / (w0 * std::sqrt(omt));
        double hm = hermite(m, x * inv_w * std::sqrt(2.0));
        double hn = hermite(n, y * inv_w * std::sqrt(2.0));
        return (1.0 / omt) * hm * hm * hn * hn *
               std::exp(-2.0 * (x * x + y * y) / w2) * norm;
    }

    /// Slowly varying part of the phase (Gouy + wavefront curvature).
    double slow_phase(double rho2, double z) const {
        double t = z * inv_zr;
        return -gouy * std::atan(t) +
               0.5 * k * rho2 * t * inv_zr / (1.0 + t * t);
    }

    /// d/dz of slow_phase.
    double slow_phase_deriv(double rho2, double z) const {
        double t = z * inv_zr;
        double omt = 1.0 + t * t;
        return -gouy * inv_zr / omt +
               0.5 * k * rho2 * inv_zr * inv_zr * (1.0 - t * t) / (omt * omt);
    }

    double integrand(double x, double y, double z) const {
        double rho2 = x * x + y * y;
        double s = std::sin(k * z + slow_phase(rho2, z));
        return envelope(x, y, z) * s * s;
    }
};

/// sin^2 chord integral along z for fixed transverse point, resolving the
/// standing wave analytically on slabs no longer than lambda/16. Within a
/// slab the slow phase is linearized; the envelope and the slab kernel
/// sin(beta h)/(2 beta) are interpolated linearly across 64-slab blocks
/// (relative error < 1e-7 for z_R >> L geometries, far below the
/// transverse tolerance). The integrand is even in z, so only [0, zmax]
/// is walked and the result doubled.
inline double chord_oscillatory(const ModePointEval& ev, double x, double y,
                                double zmax, double slab_max, long long& evals) {
    if (!(zmax > 0.0)) return 0.0;
    double rho2 = x * x + y * y;
    long long ns = static_cast<long long>(std::ceil(zmax / slab_max));
    if (ns < 1) ns = 1;
    double h = zmax / static_cast<double>(ns);
    constexpr long long block = 64;
    double sum = 0.0;
    for (long long j0 = 0; j0 < ns; j0 += block) {
        long long jn = std::min(j0 + block, ns);
        long long nb = jn - j0;
        double za = (static_cast<double>(j0) + 0.5) * h;
        double zb = (static_cast<double>(jn - 1) + 0.5) * h;
        double ea = ev.envelope(x, y, za);
        double eb = (nb > 1) ? ev.envelope(x, y, zb) : ea;
        double beta_a = ev.k + ev.slow_phase_deriv(rho2, za);
        double beta_b = ev.k + ev.slow_phase_deriv(rho2, zb);
        double qa = std::sin(beta_a * h) / (2.0 * beta_a);
        double qb = std::sin(beta_b * h) / (2.0 * beta_b);
        evals += (nb > 1) ? 2 : 1;

        double psi = 2.0 * (ev.k * za + ev.slow_phase(rho2, za));
        double zmid = 0.5 * (za + zb);
        double dpsi = 2.0 * h * (ev.k + ev.slow_phase_deriv(rho2, zmid));
        double cd = std::cos(dpsi), sd = std::sin(dpsi);
        double u = std::cos(psi), v = std::sin(psi);
        double inv_span = (nb > 1) ? 1.0 / static_cast<double>(nb - 1) : 0.0;
        for (long long t = 0; t < nb; ++t) {
            double frac = static_cast<double>(t) * inv_span;
            double env = ea + (eb - ea) * frac;
            double q = qa + (qb - qa) * frac;
            sum += env * (0.5 * h - u * q);
            double un = u * cd - v * sd;
            v = u * sd + v * cd;
            u = un;
        }
    }
    return 2.0 * sum;
}

}  // namespace detail

/// Collective coupling rate of Eq.-(2) form, by the configured method.
///
/// The transverse plane is parametrized around the crystal axis as
/// (xi, eta) = R sin(a) (cos(th), sin(th)) with chord half-length
/// L cos(a); the substitution removes the sqrt edge of the spheroid so
/// the adaptive 2D rule sees a smooth integrand. The mode functions and
/// the standing-wave phase are evaluated at the cavity-frame point
/// (x0 + xi, y0 + eta, z).
inline CouplingResult compute_coupling(const BeamGeometry& geom, ModeIndex mode,
                                       const CrystalSpec& spec,
                                       const CouplingConfig& cfg) {
    validate_mode(mode);
    validate_crystal(spec);
    validate_coupling_config(cfg);
    if (spec.radius < 1e-9 || spec.half_length < 1e-9)
        throw ValidationError("crystal dimensions below 1 nm are not accepted");

    const double g2rho = cfg.single_ion_g * cfg.single_ion_g * spec.density;
    CouplingResult out;
    out.method_used = cfg.method;

    if (cfg.method == CouplingMethod::MonteCarlo) {
        detail::ModePointEval ev(geom, mode);
        UniformSpheroidSampler sampler(spec, cfg.mc_seed);
        const long long n = cfg.mc_samples;
        double sum = 0.0, comp = 0.0, sum_sq = 0.0;
        for (long long i = 0; i < n; ++i) {
            Point3 p = sampler.next();
            double f = ev.integrand(p.x, p.y, p.z);
            double yk = f - comp;  // Kahan update
            double tk = sum + yk;
            comp = (tk - sum) - yk;
            sum = tk;
            sum_sq += f * f;
        }
        double mean = sum / static_cast<double>(n);
        double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
        double se_mean = std::sqrt(var / static_cast<double>(n));
        double vol = volume(spec);
        out.g_squared = g2rho * vol * mean;
        out.g_rate = std::sqrt(out.g_squared);
        out.est_rel_error =
            (out.g_squared > 0.0) ? g2rho * vol * se_mean / out.g_squared : 0.0;
        out.evaluations = n;
        return out;
    }

    detail::ModePointEval ev(geom, mode);
    const double slab_max = geom.wavelength() / 16.0;
    const bool oscillatory = cfg.method == CouplingMethod::Oscillatory;
    long long chord_evals = 0;

    auto transverse = [&](double alpha, double theta) {
        double sa = std::sin(alpha), ca = std::cos(alpha);
        double xi = spec.radius * sa * std::cos(theta);
        double eta = spec.radius * sa * std::sin(theta);
        double x = spec.offset_x + xi;
        double y = spec.offset_y + eta;
        double zmax = spec.half_length * ca;
        double jac = spec.radius * spec.radius * sa * ca;
        double chord;
        if (oscillatory) {
            chord = detail::chord_oscillatory(ev, x, y, zmax, slab_max, chord_evals);
        } else {
            // sin^2 -> 1/2; envelope even in z, so the half-chord integral
            // equals the full phase-averaged one
            chord = quad::gauss_legendre_16(
                [&](double z) { return ev.envelope(x, y, z); }, 0.0, zmax);
            chord_evals += 16;
        }
        return jac * chord;
    };

    quad::Result q = quad::adaptive_2d(transverse, 0.0, 0.5 * pi, 0.0, two_pi,
                                       cfg.rel_tolerance, cfg.max_cells);
    double g_squared = g2rho * q.value;
    double rel = (q.value != 0.0) ? q.abs_error / std::abs(q.value) : 0.0;
    if (!q.converged)
        throw AccuracyError("transverse quadrature did not reach tolerance " +
                                std::to_string(cfg.rel_tolerance),
                            g_squared, rel);
    out.g_squared = g_squared;
    out.g_rate = std::sqrt(g_squared);
    out.est_rel_error = rel;
    out.evaluations = chord_evals;
    return out;
}

/// g_squared relative to a reference result (e.g. on-axis TEM00).
inline double normalized_coupling(const BeamGeometry& geom, ModeIndex mode,
                                  const CrystalSpec& spec, const CouplingConfig& cfg,
                                  const CouplingResult& reference) {
    if (!(reference.g_squared > 0.0))
        throw DomainError("normalization reference coupling is zero");
    return compute_coupling(geom, mode, spec, cfg).g_squared / reference.g_squared;
}

/// Single-ion g such that the computed collective rate equals target_rate.
inline double calibrate_single_ion_g(const BeamGeometry& geom, ModeIndex mode,
                                     const CrystalSpec& spec, CouplingConfig cfg,
                                     double target_rate) {
    if (!(target_rate > 0.0)) throw ValidationError("target rate must be positive");
    cfg.single_ion_g = 1.0;
    CouplingResult unit = compute_coupling(geom, mode, spec, cfg);
    if (!(unit.g_squared > 0.0))
        throw DomainError("coupling vanishes; cannot calibrate g");
    return target_rate / std::sqrt(unit.g_squared);
}

/// R -> infinity limit of G^2 at fixed L: g^2 rho pi w0^2 L / 2.
/// Mode-independent thanks to the equal-power weights; upper bound for the
/// phase-averaged coupling at any finite radius.
inline double large_radius_limit(const BeamGeometry& geom, const CrystalSpec& spec,
                                 double single_ion_g) {
    return single_ion_g * single_ion_g * spec.density * pi * geom.waist() *
           geom.waist() * spec.half_length / 2.0;
}

}  // namespace cavicrys
