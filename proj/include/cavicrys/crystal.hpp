#pragma once

#include <cstdint>
#include <vector>

#include "cavicrys/errors.hpp"
#include "cavicrys/rng.hpp"
#include "cavicrys/units.hpp"

namespace cavicrys {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Uniform-density spheroidal ion Coulomb crystal: equatorial radius R,
/// polar half-length L along the cavity axis, center displaced by
/// (offset_x, offset_y) from the cavity axis. Cavity-frame coordinates
/// throughout; the crystal center sits at (offset_x, offset_y, 0).
struct CrystalSpec {
    double half_length;       ///< L (m)
    double radius;            ///< R (m)
    double density = 1.0;     ///< rho (ions/m^3)
    double offset_x = 0.0;    ///< x0 (m)
    double offset_y = 0.0;    ///< y0 (m)
};

inline void validate_crystal(const CrystalSpec& spec) {
    if (!(spec.half_length > 0.0) || !(spec.radius > 0.0))
        throw ValidationError("crystal half-length and radius must be positive");
    if (!(spec.density > 0.0))
        throw ValidationError("crystal density must be positive");
}

/// Spheroid volume 4 pi R^2 L / 3.
inline double volume(const CrystalSpec& spec) {
    return 4.0 * pi * spec.radius * spec.radius * spec.half_length / 3.0;
}

inline double ion_count(const CrystalSpec& spec) {
    return spec.density * volume(spec);
}

/// Membership test, boundary inclusive.
inline bool contains(const CrystalSpec& spec, double x, double y, double z) {
    double dx = (x - spec.offset_x) / spec.radius;
    double dy = (y - spec.offset_y) / spec.radius;
    double dz = z / spec.half_length;
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

/// Streaming uniform sampler over the spheroid: rejection from the unit
/// cube onto the unit ball, axes scaled by (R, R, L), center translated.
/// Deterministic for a given seed.
class UniformSpheroidSampler {
public:
    UniformSpheroidSampler(const CrystalSpec& spec, std::uint64_t seed)
        : spec_(spec), rng_(seed) {
        validate_crystal(spec);
    }

    Point3 next() {
        for (;;) {
            double cx = rng_.uniform_pm1();
            double cy = rng_.uniform_pm1();
            double cz = rng_.uniform_pm1();
            if (cx * cx + cy * cy + cz * cz > 1.0) continue;
            return {cx * spec_.radius + spec_.offset_x,
                    cy * spec_.radius + spec_.offset_y,
                    cz * spec_.half_length};
        }
    }

private:
    CrystalSpec spec_;
    Rng rng_;
};

/// `count` i.i.d. uniform points over the spheroid, deterministic per seed.
inline std::vector<Point3> sample_uniform(const CrystalSpec& spec, std::uint64_t seed,
                                          std::int64_t count) {
    if (count < 1) throw ValidationError("sample count must be >= 1");
    UniformSpheroidSampler sampler(spec, seed);
    std::vector<Point3> points;
    points.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) points.push_back(sampler.next());
    return points;
}

}  // namespace cavicrys
