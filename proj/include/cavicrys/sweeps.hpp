#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cavicrys/coupling.hpp"
#include "cavicrys/spectroscopy.hpp"

namespace cavicrys {

enum class SweepKind { Displacement, Radius, Detuning };
enum class Axis { X, Y };

inline std::string to_string(SweepKind k) {
    switch (k) {
        case SweepKind::Displacement: return "displacement";
        case SweepKind::Radius: return "radius";
        case SweepKind::Detuning: return "detuning";
    }
    return "?";
}

/// One of the three experimental protocols as a pure value.
/// `grid` is in meters for Displacement/Radius and rad/s for Detuning.
struct SweepRequest {
    SweepKind kind = SweepKind::Displacement;
    BeamGeometry geometry{866e-9, 37e-6};
    CrystalSpec base_crystal{336e-6, 50e-6, 3.8e14};
    std::vector<ModeIndex> modes{{0, 0}};
    std::vector<double> grid;
    CouplingConfig coupling;
    ProbePhysics physics;          // Detuning kind only
    Axis axis = Axis::X;           // Displacement kind only
    bool normalize = true;
    bool end_to_end = false;       // Detuning: synthesize + fit per point
    double noise_sigma = 0.0;      // Detuning end-to-end spectrum noise
    ScanGrid scan;                 // Detuning end-to-end scan grid
    std::uint64_t seed = 1;        // base for per-point seeds
};

struct SweepRecord {
    double sweep_value = 0.0;
    ModeIndex mode;
    double raw_g_squared = 0.0;
    std::optional<double> normalized_value;
    double est_rel_error = 0.0;
    bool converged = true;  ///< false when the point carries a best-effort estimate
};

namespace detail {

inline void validate_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("sweep grid must not be empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError("sweep grid must be strictly increasing");
}

inline int worker_count(std::size_t jobs) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("CAVICRYS_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
    }
    if (jobs < hw) hw = static_cast<unsigned>(jobs);
    return static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n); results must be written to index i of a
/// pre-sized container so the output order is schedule-independent.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    int workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    auto body = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// compute_coupling that folds a tolerance miss into the record instead of
/// aborting the sweep.
inline SweepRecord coupling_record(const BeamGeometry& geom, ModeIndex mode,
                                   const CrystalSpec& crystal, const CouplingConfig& cfg,
                                   double sweep_value) {
    SweepRecord rec;
    rec.sweep_value = sweep_value;
    rec.mode = mode;
    try {
        CouplingResult r = compute_coupling(geom, mode, crystal, cfg);
        rec.raw_g_squared = r.g_squared;
        rec.est_rel_error = r.est_rel_error;
    } catch (const AccuracyError& e) {
        rec.raw_g_squared = e.best_estimate();
        rec.est_rel_error = e.est_rel_error();
        rec.converged = false;
    }
    return rec;
}

}  // namespace detail

/// Fig.-2 protocol: translate the crystal across the mode along one axis.
/// normalized_value divides by the on-axis TEM00 coupling of the same
/// crystal and configuration.
inline std::vector<SweepRecord> run_displacement_sweep(const SweepRequest& req) {
    if (req.kind != SweepKind::Displacement)
        throw ValidationError("request kind is not Displacement");
    detail::validate_grid(req.grid);
    if (req.modes.empty()) throw ValidationError("no modes requested");

    double reference = 1.0;
    if (req.normalize) {
        CrystalSpec centered = req.base_crystal;
        centered.offset_x = 0.0;
        centered.offset_y = 0.0;
        CouplingConfig cfg = req.coupling;
        cfg.mc_seed = derive_seed(req.seed, ~std::uint64_t{0});
        reference =
            compute_coupling(req.geometry, ModeIndex{0, 0}, centered, cfg).g_squared;
        if (!(reference > 0.0))
            throw DomainError("on-axis TEM00 reference coupling is zero");
    }

    const std::size_t npts = req.grid.size();
    std::vector<SweepRecord> records(req.modes.size() * npts);
    detail::parallel_for(records.size(), [&](std::size_t j) {
        std::size_t mode_idx = j / npts;
        std::size_t i = j % npts;
        double a = req.grid[i];
        CrystalSpec crystal = req.base_crystal;
        crystal.offset_x = (req.axis == Axis::X) ? a : 0.0;
        crystal.offset_y = (req.axis == Axis::Y) ? a : 0.0;
        CouplingConfig cfg = req.coupling;
        cfg.mc_seed = derive_seed(req.seed, j);
        records[j] =
            detail::coupling_record(req.geometry, req.modes[mode_idx], crystal, cfg, a);
        if (req.normalize) records[j].normalized_value = records[j].raw_g_squared / reference;
    });
    return records;
}

/// Fig.-3 protocol: vary the radius at fixed length, on axis. When
/// normalizing, the reference is the TEM00 value at the largest grid
/// radius (the common large-R limit both modes converge to).
inline std::vector<SweepRecord> run_radius_sweep(const SweepRequest& req) {
    if (req.kind != SweepKind::Radius)
        throw ValidationError("request kind is not Radius");
    detail::validate_grid(req.grid);
    if (req.modes.empty()) throw ValidationError("no modes requested");
    if (req.base_crystal.offset_x != 0.0 || req.base_crystal.offset_y != 0.0)
        throw ValidationError("radius sweep requires the crystal on the cavity axis");
    if (!(req.grid.front() > 0.0))
        throw ValidationError("radii must be positive");

    const std::size_t npts = req.grid.size();
    std::vector<SweepRecord> records(req.modes.size() * npts);
    detail::parallel_for(records.size(), [&](std::size_t j) {
        std::size_t mode_idx = j / npts;
        std::size_t i = j % npts;
        CrystalSpec crystal = req.base_crystal;
        crystal.radius = req.grid[i];
        CouplingConfig cfg = req.coupling;
        cfg.mc_seed = derive_seed(req.seed, j);
        records[j] = detail::coupling_record(req.geometry, req.modes[mode_idx], crystal,
                                             cfg, req.grid[i]);
    });

    if (req.normalize) {
        double reference = 0.0;
        bool have = false;
        for (std::size_t m = 0; m < req.modes.size(); ++m)
            if (req.modes[m] == ModeIndex{0, 0}) {
                reference = records[m * npts + npts - 1].raw_g_squared;
                have = true;
            }
        if (!have) {
            CrystalSpec crystal = req.base_crystal;
            crystal.radius = req.grid.back();
            CouplingConfig cfg = req.coupling;
            cfg.mc_seed = derive_seed(req.seed, ~std::uint64_t{1});
            reference =
                compute_coupling(req.geometry, ModeIndex{0, 0}, crystal, cfg).g_squared;
        }
        if (!(reference > 0.0))
            throw DomainError("large-radius TEM00 reference coupling is zero");
        for (auto& rec : records) rec.normalized_value = rec.raw_g_squared / reference;
    }
    return records;
}

struct DetuningPoint {
    double delta = 0.0;        ///< probe detuning, rad/s
    ModeIndex mode;
    double broadening = 0.0;   ///< kappa' - kappa, rad/s
    double sigma = 1.0;        ///< uncertainty used as fit weight, rad/s
};

struct DetuningModeResult {
    ModeIndex mode;
    CouplingResult coupling;  ///< collective rate from the crystal spec
    CouplingFit fit;          ///< (G, gamma) recovered from the series
};

struct DetuningSweepResult {
    std::vector<DetuningPoint> points;
    std::vector<DetuningModeResult> modes;
};

/// Fig.-5 protocol: broadening versus probe detuning, then (G, gamma)
/// extraction per mode. Analytic mode applies the half-width formula
/// directly; end-to-end mode synthesizes a noisy spectrum per point and
/// recovers kappa' with a Lorentzian fit first.
inline DetuningSweepResult run_detuning_sweep(const SweepRequest& req) {
    if (req.kind != SweepKind::Detuning)
        throw ValidationError("request kind is not Detuning");
    detail::validate_grid(req.grid);
    if (req.modes.empty()) throw ValidationError("no modes requested");
    validate_physics(req.physics);

    DetuningSweepResult out;
    const std::size_t npts = req.grid.size();
    out.points.resize(req.modes.size() * npts);

    for (std::size_t mode_idx = 0; mode_idx < req.modes.size(); ++mode_idx) {
        ModeIndex mode = req.modes[mode_idx];
        CouplingConfig cfg = req.coupling;
        cfg.mc_seed = derive_seed(req.seed, 0xc001u + mode_idx);
        CouplingResult coupling = compute_coupling(req.geometry, mode, req.base_crystal, cfg);

        detail::parallel_for(npts, [&](std::size_t i) {
            DetuningPoint pt;
            pt.delta = req.grid[i];
            pt.mode = mode;
            ProbePhysics ph = req.physics;
            ph.delta = pt.delta;
            if (req.end_to_end) {
                std::uint64_t seed = derive_seed(req.seed, mode_idx * npts + i);
                TransmissionSpectrum ts = synthesize_spectrum(coupling.g_rate, ph,
                                                              req.scan, req.noise_sigma,
                                                              seed);
                LorentzianFit lf = fit_lorentzian(ts);
                pt.broadening = lf.half_width - ph.kappa;
                pt.sigma = (lf.half_width_se > 0.0) ? lf.half_width_se
                                                    : 1e-12 * ph.kappa;
            } else {
                pt.broadening = coupling_broadening(coupling.g_rate, ph);
                pt.sigma = 1.0;
            }
            out.points[mode_idx * npts + i] = pt;
        });

        std::vector<BroadeningPoint> series(npts);
        for (std::size_t i = 0; i < npts; ++i) {
            const DetuningPoint& pt = out.points[mode_idx * npts + i];
            series[i] = {pt.delta, pt.broadening, pt.sigma};
        }
        CouplingFit fit = fit_coupling(series, req.physics);
        out.modes.push_back({mode, coupling, fit});
    }
    return out;
}

}  // namespace cavicrys
