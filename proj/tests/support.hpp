#pragma once

#include <cmath>

#include "vps/field.hpp"

namespace vps::test {

/// Volume fraction of each cell inside the sphere of radius R, from r'-weighted sub-samples.
inline ScalarField uniform_sphere(const CylGrid& g, double R, int sub = 20)
{
    ScalarField rho(g, FieldKind::Density);
    for (std::size_t i = 0; i < g.Nr; ++i) {
        const double rlo = i == 0 ? 0.0 : g.r(i) - 0.5 * g.dr, rhi = g.r(i) + 0.5 * g.dr;
        for (std::size_t j = 0; j < g.Nz; ++j) {
            const double zlo = j == 0 ? 0.0 : g.z(j) - 0.5 * g.dz, zhi = g.z(j) + 0.5 * g.dz;
            double in = 0.0, all = 0.0;
            for (int a = 0; a < sub; ++a) {
                const double r = rlo + (a + 0.5) * (rhi - rlo) / sub;
                for (int b = 0; b < sub; ++b) {
                    const double z = zlo + (b + 0.5) * (zhi - zlo) / sub;
                    all += r;
                    if (r * r + z * z < R * R) in += r;
                }
            }
            rho(i, j) = in / all;
        }
    }
    return rho;
}

/// Potential of the unit-density ball of radius R.
inline double sphere_potential(double R, double r, double z)
{
    const double s2 = r * r + z * z;
    if (s2 < R * R) return 2.0 * M_PI * (R * R - s2 / 3.0);
    return 4.0 * M_PI * R * R * R / (3.0 * std::sqrt(s2));
}

// Frozen oracle values (tests/oracles/lane_emden_oracle.py).
constexpr double kR_n2 = 1.2279232527612259991;
constexpr double kM_n2 = 0.68014352273971253532;
constexpr double kR_n3 = 1.9455650751791025927;
constexpr double kM_n3 = 0.56933385033837314018;

}  // namespace vps::test
