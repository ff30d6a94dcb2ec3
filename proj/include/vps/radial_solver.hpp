#pragma once

// Non-rotating solutions: u'' + (2/r) u' + 4 pi G(u) = 0, u(0) = G^{-1}(a), u'(0) = 0.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vps/structure_function.hpp"

namespace vps {

struct RadialConfig {
    double rel_tol = 1e-12;
    double abs_tol = 1e-14;      ///< relative to u(0)
    double r_max = 1e3;
    double start_factor = 1e-6;  ///< series start at start_factor * length scale
    double root_tol = 1e-12;     ///< bisection tolerance on the first zero, relative to R
    int samples = 4001;          ///< uniform samples on [0, R], odd for Simpson
    bool error_estimate = true;  ///< rerun at 10x looser tolerances and report the change
};

struct RadialProfile {
    double a = 0.0;      ///< center density
    double u0 = 0.0;     ///< G^{-1}(a)
    double R = 0.0;      ///< first zero of u
    double M = 0.0;      ///< -R^2 u'(R)
    double alpha = 0.0;  ///< -M/R
    double du_R = 0.0;   ///< u'(R)
    double R_error = 0.0;
    double M_error = 0.0;
    std::vector<double> r, u, du, rho;
    std::string sf_id;

    /// u at any r >= 0: cubic Hermite inside, exterior potential M/r + alpha outside.
    double u_at(double r_query) const;
    double rho_at(const StructureFunction& sf, double r_query) const;
};

/// Throws NoCompactSupport when u > 0 up to r_max and StiffnessFailure on step collapse.
RadialProfile solve_radial(const StructureFunction& sf, double a, const RadialConfig& cfg = {});

/// Composite Simpson of 4 pi r^2 rho(r) on the stored grid.
double mass_of(const RadialProfile& profile);

struct MassCurvePoint {
    double a = 0.0;
    double R = 0.0;
    double M = 0.0;
    double alpha = 0.0;
    double dMda = 0.0;
    std::optional<std::string> failure;  ///< set when solve_radial failed at this a
};

struct MassCurve {
    std::vector<MassCurvePoint> points;
    bool sign_change = false;  ///< M' changes sign between successive sampled a
    bool degenerate = false;   ///< |a M'/M| below degenerate_tol somewhere
    double degenerate_tol = 1e-6;
};

/// M' by fourth-order central differences in log a with step h_log.
MassCurve mass_curve(const StructureFunction& sf, const std::vector<double>& a_list,
                     const RadialConfig& cfg = {}, double h_log = 0.01);

void write_profile_csv(std::ostream& os, const RadialProfile& profile);
void write_mass_curve_csv(std::ostream& os, const MassCurve& curve);

}  // namespace vps
