#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cavicrys/coupling.hpp"
#include "cavicrys/crystal.hpp"
#include "cavicrys/spectroscopy.hpp"
#include "cavicrys/sweeps.hpp"

namespace cavicrys {

namespace selftest_detail {

struct Context {
    std::ostream& os;
    int failed = 0;
    std::string detail;

    void check(const std::string& name, const std::function<bool()>& fn) {
        detail.clear();
        bool ok = false;
        try {
            ok = fn();
        } catch (const std::exception& e) {
            detail = e.what();
        }
        if (ok) {
            os << "ok    " << name << "\n";
        } else {
            ++failed;
            os << "FAIL  " << name;
            if (!detail.empty()) os << ": " << detail;
            os << "\n";
        }
    }

    bool close(double a, double b, double rel, const char* what) {
        double scale = std::max(std::abs(a), std::abs(b));
        if (std::abs(a - b) <= rel * std::max(scale, 1e-300)) return true;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s: %.12g vs %.12g (rel %.2e > %.0e)", what, a,
                      b, std::abs(a - b) / std::max(scale, 1e-300), rel);
        detail = buf;
        return false;
    }

    bool expect(bool cond, const char* what) {
        if (cond) return true;
        detail = what;
        return false;
    }
};

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals) {
    // intervals must be even
    double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * ((i % 2) ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double closed_form_hermite(int l, double t) {
    switch (l) {
        case 0: return 1.0;
        case 1: return 2.0 * t;
        case 2: return 4.0 * t * t - 2.0;
        case 3: return 8.0 * t * t * t - 12.0 * t;
        case 4: return 16.0 * t * t * t * t - 48.0 * t * t + 12.0;
    }
    return 0.0;
}

}  // namespace selftest_detail

/// Self-contained cross-validation of the library against its stated
/// invariants and independent mini-oracles. Needs no external files.
/// Returns true when every check passes.
inline bool run_selftest(std::ostream& os) {
    using namespace selftest_detail;
    Context t{os};
    const BeamGeometry geom(866e-9, 37e-6);
    const double zr = geom.rayleigh_range();

    t.check("hermite recurrence vs closed forms (l<=4)", [&] {
        Rng rng(2024);
        for (int trial = 0; trial < 20; ++trial) {
            double x = 6.0 * rng.uniform() - 3.0;
            for (int l = 0; l <= 4; ++l) {
                double ref = closed_form_hermite(l, x);
                double got = hermite_poly(l, x);
                if (std::abs(got - ref) > 1e-12 * std::max(1.0, std::abs(ref)))
                    return t.expect(false, "closed-form mismatch");
            }
        }
        return true;
    });

    t.check("transverse power conservation (rel 1e-6)", [&] {
        for (int l = 0; l <= 5; ++l) {
            auto power = [&](double z) {
                double w = waist_at(geom, z);
                return simpson(
                    [&](double u) {
                        double a = mode_amplitude(geom, l, u, z);
                        return a * a;
                    },
                    -8.0 * w, 8.0 * w, 4000);
            };
            double p0 = power(0.0);
            for (double z : {0.5 * zr, zr, 2.0 * zr})
                if (!t.close(power(z), p0, 1e-6, "power vs z=0")) return false;
        }
        return true;
    });

    t.check("mode parity and geometric symmetries", [&] {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            double u = (2.0 * rng.uniform() - 1.0) * 3.0 * geom.waist();
            double z = (2.0 * rng.uniform() - 1.0) * 2.0 * zr;
            for (int l = 0; l <= 6; ++l) {
                double left = mode_amplitude(geom, l, -u, z);
                double right = ((l % 2) ? -1.0 : 1.0) * mode_amplitude(geom, l, u, z);
                if (std::abs(left - right) > 1e-14 * std::max(1.0, std::abs(right)))
                    return t.expect(false, "parity violated");
            }
            if (waist_at(geom, z) != waist_at(geom, -z))
                return t.expect(false, "waist not even");
        }
        if (standing_wave_phase(geom, {0, 0}, 0.0, 0.0, 0.0) != 0.0)
            return t.expect(false, "phase at origin not zero");
        return t.close(standing_wave_phase(geom, {0, 0}, 0.0, 0.0, zr),
                       geom.wavenumber() * zr - pi / 4.0, 1e-12, "phase at z_R");
    });

    t.check("spheroid volume scaling and moments", [&] {
        CrystalSpec base{240e-6, 21e-6, 3.8e14, 5e-6, -3e-6};
        for (double a : {0.5, 2.0, 3.7}) {
            CrystalSpec scaled = base;
            scaled.radius *= a;
            scaled.half_length *= a;
            if (!t.close(volume(scaled), a * a * a * volume(base), 1e-12,
                         "volume scaling"))
                return false;
        }
        const long long n = 1'000'000;
        UniformSpheroidSampler sampler(base, 99);
        double sx = 0, sy = 0, sz = 0, sxx = 0, syy = 0, szz = 0, sx4 = 0, sz4 = 0;
        for (long long i = 0; i < n; ++i) {
            Point3 p = sampler.next();
            if (!contains(base, p.x, p.y, p.z))
                return t.expect(false, "sample outside spheroid");
            double dx = p.x - base.offset_x, dy = p.y - base.offset_y;
            sx += dx; sy += dy; sz += p.z;
            sxx += dx * dx; syy += dy * dy; szz += p.z * p.z;
            sx4 += dx * dx * dx * dx;
            sz4 += p.z * p.z * p.z * p.z;
        }
        double inv_n = 1.0 / n;
        double se_x = std::sqrt(sxx * inv_n / n);
        double se_z = std::sqrt(szz * inv_n / n);
        if (std::abs(sx * inv_n) > 5 * se_x || std::abs(sy * inv_n) > 5 * se_x ||
            std::abs(sz * inv_n) > 5 * se_z)
            return t.expect(false, "sample mean off center beyond 5 SE");
        double r2 = base.radius * base.radius, l2 = base.half_length * base.half_length;
        double var_x2 = std::max(0.0, sx4 * inv_n - (sxx * inv_n) * (sxx * inv_n));
        double var_z2 = std::max(0.0, sz4 * inv_n - (szz * inv_n) * (szz * inv_n));
        if (std::abs(sxx * inv_n - r2 / 5.0) > 5 * std::sqrt(var_x2 / n) ||
            std::abs(syy * inv_n - r2 / 5.0) > 5 * std::sqrt(var_x2 / n) ||
            std::abs(szz * inv_n - l2 / 5.0) > 5 * std::sqrt(var_z2 / n))
            return t.expect(false, "second moments off beyond 5 SE");
        auto first = sample_uniform(base, 4242, 100);
        auto second = sample_uniform(base, 4242, 100);
        for (int i = 0; i < 100; ++i)
            if (first[i].x != second[i].x || first[i].y != second[i].y ||
                first[i].z != second[i].z)
                return t.expect(false, "sampling not deterministic");
        return true;
    });

    t.check("contains swap/reflection symmetry", [&] {
        CrystalSpec spec{240e-6, 21e-6, 3.8e14, 5e-6, -3e-6};
        Rng rng(11);
        for (int i = 0; i < 200; ++i) {
            double dx = (2 * rng.uniform() - 1) * 2 * spec.radius;
            double dy = (2 * rng.uniform() - 1) * 2 * spec.radius;
            double z = (2 * rng.uniform() - 1) * 2 * spec.half_length;
            bool a = contains(spec, spec.offset_x + dx, spec.offset_y + dy, z);
            bool b = contains(spec, spec.offset_x + dy, spec.offset_y + dx, -z);
            if (a != b) return t.expect(false, "symmetry violated");
        }
        return true;
    });

    const double g_ref = rate_from_mhz(11.6);
    const ProbePhysics ph_default;

    t.check("half-width anchor and half point of Eq.-(1) form", [&] {
        double expected = two_pi * 1e6 * (2.15 + 11.6 * 11.6 / 11.2);
        if (!t.close(effective_halfwidth(g_ref, ph_default), expected, 1e-12, "anchor"))
            return false;
        ProbePhysics at_gamma = ph_default;
        at_gamma.delta = ph_default.gamma;
        if (!t.close(coupling_broadening(g_ref, at_gamma),
                     0.5 * coupling_broadening(g_ref, ph_default), 1e-12, "half point"))
            return false;
        ProbePhysics plus = ph_default, minus = ph_default;
        plus.delta = rate_from_mhz(7.3);
        minus.delta = -rate_from_mhz(7.3);
        return t.expect(coupling_broadening(g_ref, plus) ==
                            coupling_broadening(g_ref, minus),
                        "broadening not even in Delta");
    });

    t.check("broadening sum rule: area = pi G^2, gamma-independent", [&] {
        for (double gamma : {two_pi * 11.2e6, two_pi * 5.0e6}) {
            ProbePhysics ph;
            ph.gamma = gamma;
            const double cut = 1000.0 * gamma;
            double area = simpson(
                [&](double d) {
                    ProbePhysics p = ph;
                    p.delta = d;
                    return coupling_broadening(g_ref, p);
                },
                -cut, cut, 200000);
            area += 2.0 * g_ref * g_ref * (pi / 2.0 - std::atan(1000.0));
            if (!t.close(area, pi * g_ref * g_ref, 1e-6, "sum rule")) return false;
        }
        return true;
    });

    t.check("coupling linearity in rho and g^2 (exact)", [&] {
        CrystalSpec spec{100e-6, 20e-6, 3.8e14, 7e-6, 0.0};
        CouplingConfig cfg;
        cfg.rel_tolerance = 1e-5;
        double base = compute_coupling(geom, {0, 0}, spec, cfg).g_squared;
        CrystalSpec denser = spec;
        denser.density *= 2.0;
        if (compute_coupling(geom, {0, 0}, denser, cfg).g_squared != 2.0 * base)
            return t.expect(false, "not linear in rho");
        CouplingConfig strong = cfg;
        strong.single_ion_g = 2.0;
        if (compute_coupling(geom, {0, 0}, spec, strong).g_squared != 4.0 * base)
            return t.expect(false, "not linear in g^2");
        CouplingConfig mc;
        mc.method = CouplingMethod::MonteCarlo;
        mc.mc_samples = 20000;
        mc.mc_seed = 5;
        double mc_base = compute_coupling(geom, {0, 0}, spec, mc).g_squared;
        CouplingConfig mc_strong = mc;
        mc_strong.single_ion_g = 2.0;
        return t.expect(
            compute_coupling(geom, {0, 0}, spec, mc_strong).g_squared == 4.0 * mc_base,
            "MC not linear in g^2");
    });

    t.check("mode swap and displacement parity", [&] {
        CrystalSpec along_x{240e-6, 21e-6, 3.8e14, 15e-6, 0.0};
        CrystalSpec along_y{240e-6, 21e-6, 3.8e14, 0.0, 15e-6};
        CouplingConfig cfg;
        cfg.rel_tolerance = 1e-5;
        double g10 = compute_coupling(geom, {1, 0}, along_x, cfg).g_squared;
        double g01 = compute_coupling(geom, {0, 1}, along_y, cfg).g_squared;
        if (!t.close(g10, g01, 1e-12, "G10(x0) vs G01(y0)")) return false;
        CrystalSpec mirrored = along_x;
        mirrored.offset_x = -along_x.offset_x;
        CouplingResult plus = compute_coupling(geom, {0, 0}, along_x, cfg);
        CouplingResult minus = compute_coupling(geom, {0, 0}, mirrored, cfg);
        double tol = 2.0 * (plus.est_rel_error + minus.est_rel_error) + 1e-12;
        return t.close(plus.g_squared, minus.g_squared, tol, "G(x0) vs G(-x0)");
    });

    t.check("integration methods agree (averaged/oscillatory/mc)", [&] {
        CrystalSpec spec{240e-6, 40e-6, 3.8e14, 0.0, 0.0};
        for (ModeIndex mode : {ModeIndex{0, 0}, ModeIndex{1, 0}}) {
            CouplingConfig cfg;
            cfg.rel_tolerance = 1e-5;
            double pa = compute_coupling(geom, mode, spec, cfg).g_squared;
            cfg.method = CouplingMethod::Oscillatory;
            CouplingResult osc = compute_coupling(geom, mode, spec, cfg);
            if (std::abs(pa - osc.g_squared) > 0.005 * osc.g_squared)
                return t.expect(false, "averaged vs oscillatory beyond 0.5%");
            CouplingConfig mc;
            mc.method = CouplingMethod::MonteCarlo;
            mc.mc_samples = 300000;
            mc.mc_seed = 42;
            CouplingResult m = compute_coupling(geom, mode, spec, mc);
            double se = std::sqrt(std::pow(m.est_rel_error * m.g_squared, 2) +
                                  std::pow(osc.est_rel_error * osc.g_squared, 2));
            if (std::abs(m.g_squared - osc.g_squared) > 4.0 * se)
                return t.expect(false, "mc vs oscillatory beyond 4 SE");
        }
        return true;
    });

    t.check("TEM10 node on axis (thin needle)", [&] {
        CrystalSpec needle{240e-6, 37e-8, 3.8e14, 0.0, 0.0};
        CouplingConfig cfg;
        double g00 = compute_coupling(geom, {0, 0}, needle, cfg).g_squared;
        double g10 = compute_coupling(geom, {1, 0}, needle, cfg).g_squared;
        return t.expect(g10 < 1e-3 * g00, "TEM10 coupling not suppressed on axis");
    });

    t.check("monotone saturation and large-R envelope bound", [&] {
        CouplingConfig cfg;
        double prev00 = 0.0, prev10 = 0.0;
        double last00 = 0.0, last10 = 0.0;
        CrystalSpec spec{336e-6, 1.0, 3.8e14, 0.0, 0.0};
        double limit = large_radius_limit(geom, spec, cfg.single_ion_g);
        for (double radius : {10e-6, 40e-6, 80e-6, 148e-6, 250e-6}) {
            spec.radius = radius;
            last00 = compute_coupling(geom, {0, 0}, spec, cfg).g_squared;
            last10 = compute_coupling(geom, {1, 0}, spec, cfg).g_squared;
            if (last00 < prev00 || last10 < prev10)
                return t.expect(false, "coupling not nondecreasing in R");
            if (last00 > limit * (1.0 + 1e-9) || last10 > limit * (1.0 + 1e-9))
                return t.expect(false, "envelope bound violated");
            prev00 = last00;
            prev10 = last10;
        }
        if (!(last00 >= 0.99 * limit))
            return t.expect(false, "R=250um does not approach the envelope limit");
        spec.radius = 148e-6;
        double r00 = compute_coupling(geom, {0, 0}, spec, cfg).g_squared;
        double r10 = compute_coupling(geom, {1, 0}, spec, cfg).g_squared;
        return t.expect(r10 / r00 > 0.97, "mode convergence ratio below 0.97");
    });

    t.check("lorentzian fit: exact recovery on noiseless spectrum", [&] {
        TransmissionSpectrum ts = synthesize_spectrum(g_ref, ph_default, {}, 0.0, 1);
        LorentzianFit fit = fit_lorentzian(ts);
        double kp = effective_halfwidth(g_ref, ph_default);
        return t.close(fit.half_width, kp, 1e-6, "half width") &&
               t.close(fit.amplitude, 1.0, 1e-6, "amplitude") &&
               t.expect(std::abs(fit.center) < 1e-6 * kp, "center off zero") &&
               t.expect(std::abs(fit.baseline) < 1e-6, "baseline off zero");
    });

    t.check("lorentzian fit: calibration at noise 0.01 (1000 seeds)", [&] {
        double kp = effective_halfwidth(g_ref, ph_default);
        double sum_err = 0.0, sum_se = 0.0;
        int within3 = 0;
        const int seeds = 1000;
        for (int s = 0; s < seeds; ++s) {
            TransmissionSpectrum ts =
                synthesize_spectrum(g_ref, ph_default, {}, 0.01, 1000 + s);
            LorentzianFit fit = fit_lorentzian(ts);
            sum_err += fit.half_width - kp;
            sum_se += fit.half_width_se;
            if (std::abs(fit.half_width - kp) <= 3.0 * fit.half_width_se) ++within3;
        }
        double bias = sum_err / seeds, mean_se = sum_se / seeds;
        if (std::abs(bias) >= 0.1 * mean_se) {
            char buf[120];
            std::snprintf(buf, sizeof(buf), "bias %.3e vs 0.1*SE %.3e", bias,
                          0.1 * mean_se);
            return t.expect(false, buf);
        }
        return t.expect(within3 >= 950, "fewer than 95% within 3 SE of truth");
    });

    t.check("lorentzian fit: degenerate inputs rejected", [&] {
        TransmissionSpectrum noise_only;
        Rng rng(31337);
        for (int i = 0; i < 201; ++i) {
            noise_only.scan_detunings.push_back(i * 1.0e6);
            noise_only.samples.push_back(0.01 * rng.gaussian());
        }
        try {
            fit_lorentzian(noise_only);
            return t.expect(false, "pure noise accepted");
        } catch (const FitDegenerateError&) {
        }
        TransmissionSpectrum flat;
        for (int i = 0; i < 32; ++i) {
            flat.scan_detunings.push_back(i * 1.0e6);
            flat.samples.push_back(0.5);
        }
        try {
            fit_lorentzian(flat);
            return t.expect(false, "flat spectrum accepted");
        } catch (const FitDegenerateError&) {
        }
        return true;
    });

    const double sigma_b = 0.0862 * two_pi * 1e6;  // per-point broadening noise

    auto make_series = [&](Rng* rng) {
        std::vector<BroadeningPoint> series;
        for (int i = 0; i < 9; ++i) {
            double delta = -two_pi * 30e6 + two_pi * 60e6 * i / 8.0;
            ProbePhysics ph = ph_default;
            ph.delta = delta;
            double b = coupling_broadening(g_ref, ph);
            if (rng) b += sigma_b * rng->gaussian();
            series.push_back({delta, b, rng ? sigma_b : 1.0});
        }
        return series;
    };

    t.check("coupling fit: exact recovery on noiseless series", [&] {
        CouplingFit fit = fit_coupling(make_series(nullptr), ph_default);
        return t.close(fit.g_rate, g_ref, 1e-6, "G") &&
               t.close(fit.gamma_fit, ph_default.gamma, 1e-6, "gamma");
    });

    t.check("coupling fit: pull calibration (500 seeds)", [&] {
        std::vector<double> pulls_g, pulls_gamma;
        Rng rng(777);
        for (int s = 0; s < 500; ++s) {
            CouplingFit fit = fit_coupling(make_series(&rng), ph_default);
            pulls_g.push_back((fit.g_rate - g_ref) / fit.g_rate_se);
            pulls_gamma.push_back((fit.gamma_fit - ph_default.gamma) / fit.gamma_se);
        }
        auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
            mean = 0.0;
            for (double x : v) mean += x;
            mean /= v.size();
            sd = 0.0;
            for (double x : v) sd += (x - mean) * (x - mean);
            sd = std::sqrt(sd / (v.size() - 1));
        };
        double mg, sg, mge, sge;
        stats(pulls_g, mg, sg);
        stats(pulls_gamma, mge, sge);
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "pull G mean %.3f sd %.3f, gamma mean %.3f sd %.3f", mg, sg, mge,
                      sge);
        t.detail = buf;
        return std::abs(mg) < 0.2 && sg > 0.8 && sg < 1.2 && std::abs(mge) < 0.2 &&
               sge > 0.8 && sge < 1.2;
    });

    t.check("coupling fit: weight rescaling leaves G unchanged", [&] {
        auto series = make_series(nullptr);
        CouplingFit base = fit_coupling(series, ph_default);
        for (auto& pt : series) pt.sigma *= 37.0;
        CouplingFit scaled = fit_coupling(series, ph_default);
        return t.close(base.g_rate, scaled.g_rate, 1e-9, "G under weight rescaling");
    });

    t.check("coupling fit: guard paths", [&] {
        std::vector<BroadeningPoint> zero_only;
        for (int i = 0; i < 6; ++i)
            zero_only.push_back({0.0, coupling_broadening(g_ref, ph_default), 1.0});
        try {
            fit_coupling(zero_only, ph_default);
            return t.expect(false, "Delta=0-only series accepted");
        } catch (const IllConditionedError&) {
        }
        std::vector<BroadeningPoint> narrow;
        for (int i = 0; i < 5; ++i) {
            double d = (i - 2) * 0.2 * ph_default.gamma;
            ProbePhysics ph = ph_default;
            ph.delta = d;
            narrow.push_back({d, coupling_broadening(g_ref, ph), 1.0});
        }
        try {
            fit_coupling(narrow, ph_default);
            return t.expect(false, "sub-gamma span accepted");
        } catch (const IllConditionedError&) {
        }
        return true;
    });

    t.check("sweeps: determinism, normalization range, grid restriction", [&] {
        SweepRequest req;
        req.kind = SweepKind::Displacement;
        req.base_crystal = CrystalSpec{240e-6, 21e-6, 3.8e14, 0.0, 0.0};
        req.modes = {{0, 0}, {1, 0}};
        req.grid = {-40e-6, -20e-6, 0.0, 20e-6, 40e-6};
        req.coupling.rel_tolerance = 1e-4;
        auto a = run_displacement_sweep(req);
        auto b = run_displacement_sweep(req);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].raw_g_squared != b[i].raw_g_squared)
                return t.expect(false, "sweep not reproducible");
        for (const auto& rec : a) {
            if (!rec.normalized_value) return t.expect(false, "missing normalization");
            if (*rec.normalized_value < 0.0 ||
                *rec.normalized_value > 1.0 + 3.0 * rec.est_rel_error + 1e-12)
                return t.expect(false, "normalized value out of range");
        }
        SweepRequest coarse = req;
        coarse.grid = {-40e-6, 0.0, 40e-6};
        auto c = run_displacement_sweep(coarse);
        // coarse grid must be the restriction of the finer one
        if (c[0].raw_g_squared != a[0].raw_g_squared ||
            c[1].raw_g_squared != a[2].raw_g_squared ||
            c[2].raw_g_squared != a[4].raw_g_squared)
            return t.expect(false, "grid refinement changes point values");
        return true;
    });

    t.check("sweeps: normalized records invariant under (g, rho) rescaling", [&] {
        SweepRequest req;
        req.kind = SweepKind::Radius;
        req.base_crystal = CrystalSpec{336e-6, 1.0, 3.8e14, 0.0, 0.0};
        req.modes = {{0, 0}, {1, 0}};
        req.grid = {20e-6, 60e-6, 120e-6};
        auto base = run_radius_sweep(req);
        SweepRequest scaled = req;
        scaled.coupling.single_ion_g = 3.0;
        scaled.base_crystal.density *= 1.7;
        auto rescaled = run_radius_sweep(scaled);
        for (std::size_t i = 0; i < base.size(); ++i)
            if (!t.close(*base[i].normalized_value, *rescaled[i].normalized_value, 1e-12,
                         "normalized record"))
                return false;
        return true;
    });

    os << (t.failed == 0 ? "selftest: all checks passed\n"
                         : "selftest: " + std::to_string(t.failed) + " check(s) FAILED\n");
    return t.failed == 0;
}

}  // namespace cavicrys
