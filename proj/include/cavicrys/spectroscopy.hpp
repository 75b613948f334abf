#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cavicrys/errors.hpp"
#include "cavicrys/levmar.hpp"
#include "cavicrys/rng.hpp"
#include "cavicrys/units.hpp"

namespace cavicrys {

/// Cavity and transition rates. All angular HWHM rates in rad/s.
/// Defaults are the 866 nm apparatus: kappa = (2pi) 2.15 MHz,
/// gamma = (2pi) 11.2 MHz.
struct ProbePhysics {
    double kappa = two_pi * 2.15e6;  ///< cavity half-linewidth
    double gamma = two_pi * 11.2e6;  ///< dipole decay rate
    double delta = 0.0;              ///< probe-atom detuning
};

inline void validate_physics(const ProbePhysics& ph) {
    if (!(ph.kappa > 0.0) || !(ph.gamma > 0.0))
        throw ValidationError("kappa and gamma must be positive");
}

/// Atomic broadening of the cavity half-width: G^2 gamma / (gamma^2 + Delta^2).
inline double coupling_broadening(double g_rate, const ProbePhysics& ph) {
    return g_rate * g_rate * ph.gamma / (ph.gamma * ph.gamma + ph.delta * ph.delta);
}

/// Composite half-width kappa' = kappa + G^2 gamma / (gamma^2 + Delta^2).
inline double effective_halfwidth(double g_rate, const ProbePhysics& ph) {
    return ph.kappa + coupling_broadening(g_rate, ph);
}

/// Symmetric cavity-scan grid; default covers the 1.2 GHz scan with 201 points.
struct ScanGrid {
    double half_span = two_pi * 600e6;  ///< rad/s
    int points = 201;
};

/// Sampled cavity-scan lineshape. scan_detunings are cavity detunings
/// relative to line center; samples are transmitted power, peak ~ 1.
struct TransmissionSpectrum {
    std::vector<double> scan_detunings;
    std::vector<double> samples;
    double noise_sigma = 0.0;
};

inline void validate_spectrum(const TransmissionSpectrum& ts) {
    if (ts.scan_detunings.size() != ts.samples.size())
        throw ValidationError("spectrum arrays must have equal length");
    if (ts.scan_detunings.size() < 16)
        throw ValidationError("spectrum needs at least 16 samples");
    for (std::size_t i = 1; i < ts.scan_detunings.size(); ++i)
        if (!(ts.scan_detunings[i] > ts.scan_detunings[i - 1]))
            throw ValidationError("scan detunings must be strictly increasing");
}

/// Unit-amplitude Lorentzian of width kappa' plus Gaussian noise,
/// deterministic per seed.
inline TransmissionSpectrum synthesize_spectrum(double g_rate, const ProbePhysics& ph,
                                                const ScanGrid& grid, double noise_sigma,
                                                std::uint64_t seed) {
    validate_physics(ph);
    if (noise_sigma < 0.0) throw ValidationError("noise_sigma must be >= 0");
    if (grid.points < 16) throw ValidationError("scan grid needs at least 16 points");
    if (!(grid.half_span > 0.0)) throw ValidationError("scan half-span must be positive");

    double kp = effective_halfwidth(g_rate, ph);
    TransmissionSpectrum ts;
    ts.noise_sigma = noise_sigma;
    ts.scan_detunings.resize(grid.points);
    ts.samples.resize(grid.points);
    Rng rng(seed);
    for (int i = 0; i < grid.points; ++i) {
        double d = -grid.half_span +
                   2.0 * grid.half_span * i / static_cast<double>(grid.points - 1);
        ts.scan_detunings[i] = d;
        double s = kp * kp / (kp * kp + d * d);
        if (noise_sigma > 0.0) s += noise_sigma * rng.gaussian();
        ts.samples[i] = s;
    }
    return ts;
}

struct LorentzianFit {
    double center = 0.0;
    double half_width = 0.0;
    double amplitude = 0.0;
    double baseline = 0.0;
    double center_se = 0.0;
    double half_width_se = 0.0;
    double amplitude_se = 0.0;
    double baseline_se = 0.0;
    double residual_norm = 0.0;
    int iterations = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (hi + v[mid - 1]);
}

/// White-noise scale from successive differences (MAD-based, robust to
/// the smooth lineshape underneath).
inline double estimate_noise(const std::vector<double>& y) {
    std::vector<double> d(y.size() - 1);
    for (std::size_t i = 0; i + 1 < y.size(); ++i) d[i] = y[i + 1] - y[i];
    double med = median_of(d);
    for (double& x : d) x = std::abs(x - med);
    return 1.4826 * median_of(d) / std::sqrt(2.0);
}

}  // namespace detail

/// Nonlinear least squares of A w^2 / (w^2 + (d - c)^2) + b.
/// Initial guesses: center from the sample maximum, amplitude from the
/// sample range, baseline from the edge median, width from the half-max
/// crossing span. Standard errors from the local quadratic model.
inline LorentzianFit fit_lorentzian(const TransmissionSpectrum& ts) {
    validate_spectrum(ts);
    const std::vector<double>& x = ts.scan_detunings;
    const std::vector<double>& y = ts.samples;
    const std::size_t n = y.size();

    double noise = detail::estimate_noise(y);
    double ymax = *std::max_element(y.begin(), y.end());
    double ymin = *std::min_element(y.begin(), y.end());
    if (!(ymax - ymin > 5.0 * noise))
        throw FitDegenerateError("no visible peak: sample range within noise");

    // prominence of the boxcar-smoothed curve; rejects pure noise whose raw
    // range still clears the 5-sigma gate
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = (i >= 2) ? i - 2 : 0;
        std::size_t hi = std::min(n - 1, i + 2);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += y[j];
        smooth[i] = s / static_cast<double>(hi - lo + 1);
    }
    double smax = *std::max_element(smooth.begin(), smooth.end());
    double smed = detail::median_of(smooth);
    if (noise > 0.0 && !(smax - smed > 5.0 * noise / std::sqrt(5.0)))
        throw FitDegenerateError("no visible peak above the noise floor");

    std::size_t ipk =
        static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    double c0 = x[ipk];
    double a0 = ymax - ymin;
    std::size_t edge = std::max<std::size_t>(3, n / 10);
    std::vector<double> edges(y.begin(), y.begin() + edge);
    edges.insert(edges.end(), y.end() - edge, y.end());
    double b0 = detail::median_of(edges);

    double half = b0 + 0.5 * a0;
    double right = x.back(), left = x.front();
    for (std::size_t i = ipk; i < n; ++i)
        if (y[i] < half) {
            right = x[i];
            break;
        }
    for (std::size_t i = ipk + 1; i-- > 0;)
        if (y[i] < half) {
            left = x[i];
            break;
        }
    double w0 = 0.5 * (right - left);
    if (!(w0 > 0.0)) w0 = (x.back() - x.front()) / 10.0;

    auto eval = [&](const std::vector<double>& p, std::vector<double>& r,
                    std::vector<double>& jac) {
        double A = p[0], c = p[1], w = p[2], b = p[3];
        double w2 = w * w;
        for (std::size_t i = 0; i < n; ++i) {
            double dx = x[i] - c;
            double den = w2 + dx * dx;
            double shape = w2 / den;
            r[i] = A * shape + b - y[i];
            jac[i * 4 + 0] = shape;
            jac[i * 4 + 1] = A * w2 * 2.0 * dx / (den * den);
            jac[i * 4 + 2] = A * 2.0 * w * dx * dx / (den * den);
            jac[i * 4 + 3] = 1.0;
        }
    };

    LevMarResult lm = levmar_fit(eval, {a0, c0, w0, b0}, n);
    LorentzianFit fit;
    fit.amplitude = lm.params[0];
    fit.center = lm.params[1];
    fit.half_width = std::abs(lm.params[2]);
    fit.baseline = lm.params[3];
    fit.amplitude_se = lm.std_errors[0];
    fit.center_se = lm.std_errors[1];
    fit.half_width_se = lm.std_errors[2];
    fit.baseline_se = lm.std_errors[3];
    fit.residual_norm = lm.residual_norm;
    fit.iterations = lm.iterations;
    if (!lm.converged)
        throw AccuracyError("lorentzian fit did not converge", fit.half_width,
                            fit.half_width > 0 ? fit.half_width_se / fit.half_width : 0.0);
    return fit;
}

/// One measured broadening kappa' - kappa at probe detuning delta.
struct BroadeningPoint {
    double delta = 0.0;       ///< rad/s
    double broadening = 0.0;  ///< rad/s
    double sigma = 1.0;       ///< standard error of the broadening, rad/s
};

struct CouplingFit {
    double g_rate = 0.0;     ///< fitted G, rad/s
    double gamma_fit = 0.0;  ///< fitted gamma, rad/s
    double g_rate_se = 0.0;
    double gamma_se = 0.0;
    double residual_norm = 0.0;  ///< weighted residual norm (chi)
    bool consistency_warning = false;  ///< some broadening < -3 sigma
};

/// Weighted least squares of G^2 gamma / (gamma^2 + Delta^2) over a
/// detuning series with (G, gamma) free. kappa is not fitted; the series
/// is already the broadening kappa' - kappa. Requires >= 4 distinct
/// detunings spanning at least +-gamma.
inline CouplingFit fit_coupling(const std::vector<BroadeningPoint>& series,
                                const ProbePhysics& ph) {
    validate_physics(ph);
    std::vector<double> distinct;
    double dmin = 0.0, dmax = 0.0;
    for (const auto& pt : series) {
        if (!(pt.sigma > 0.0))
            throw ValidationError("broadening uncertainties must be positive");
        dmin = std::min(dmin, pt.delta);
        dmax = std::max(dmax, pt.delta);
        bool seen = false;
        for (double d : distinct)
            if (d == pt.delta) seen = true;
        if (!seen) distinct.push_back(pt.delta);
    }
    if (distinct.size() < 4)
        throw IllConditionedError("need at least 4 distinct detunings");
    if (dmax < ph.gamma * (1.0 - 1e-12) || dmin > -ph.gamma * (1.0 - 1e-12))
        throw IllConditionedError("detuning series must span at least +-gamma");

    bool warn = false;
    for (const auto& pt : series)
        if (pt.broadening < -3.0 * pt.sigma) warn = true;

    // initial guesses: gamma0 from the half-max point of the series,
    // G0 from the peak value
    double peak = 0.0;
    for (const auto& pt : series) peak = std::max(peak, pt.broadening);
    std::vector<const BroadeningPoint*> byabs;
    for (const auto& pt : series) byabs.push_back(&pt);
    std::sort(byabs.begin(), byabs.end(), [](auto* a, auto* b) {
        return std::abs(a->delta) < std::abs(b->delta);
    });
    double gamma0 = ph.gamma;
    for (const auto* pt : byabs)
        if (pt->broadening <= 0.5 * peak && std::abs(pt->delta) > 0.0) {
            gamma0 = std::abs(pt->delta);
            break;
        }
    if (!(peak > 0.0)) peak = 1e-6 * ph.gamma;
    double g0 = std::sqrt(peak * gamma0);

    const std::size_t n = series.size();
    auto eval = [&](const std::vector<double>& p, std::vector<double>& r,
                    std::vector<double>& jac) {
        double G = p[0], gm = p[1];
        for (std::size_t i = 0; i < n; ++i) {
            const auto& pt = series[i];
            double den = gm * gm + pt.delta * pt.delta;
            double model = G * G * gm / den;
            r[i] = (model - pt.broadening) / pt.sigma;
            jac[i * 2 + 0] = 2.0 * G * gm / den / pt.sigma;
            jac[i * 2 + 1] =
                G * G * (pt.delta * pt.delta - gm * gm) / (den * den) / pt.sigma;
        }
    };

    LevMarOptions opt;
    opt.scale_covariance = false;  // sigmas are taken at face value
    LevMarResult lm = levmar_fit(eval, {g0, gamma0}, n, opt);
    CouplingFit fit;
    fit.g_rate = std::abs(lm.params[0]);
    fit.gamma_fit = std::abs(lm.params[1]);
    fit.g_rate_se = lm.std_errors[0];
    fit.gamma_se = lm.std_errors[1];
    fit.residual_norm = lm.residual_norm;
    fit.consistency_warning = warn;
    if (!lm.converged)
        throw AccuracyError("coupling fit did not converge", fit.g_rate,
                            fit.g_rate > 0 ? fit.g_rate_se / fit.g_rate : 0.0);
    return fit;
}

}  // namespace cavicrys
