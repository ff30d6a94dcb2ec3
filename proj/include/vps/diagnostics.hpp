#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vps/continuation.hpp"

namespace vps {

struct SupportExtent {
    double r = 0.0;
    double z = 0.0;
};

/// Largest r and z of nodes with rho > threshold * sup rho.
SupportExtent support_extent(const ScalarField& rho, double threshold = 1e-10);

/// Effective potential u = U + alpha as a field.
ScalarField effective_potential(const SolutionState& state);

struct GnResult {
    double grad_sup = 0.0;  ///< componentwise max |du/dr|, |du/dz| over the mask
    double hess_sup = 0.0;  ///< max |u_rr|, |u_r / r|, |u_zz|, |u_rz| over nodes 2 cells inside the mask
    double u_sup = 0.0;
    double ratio = 0.0;     ///< grad_sup / sqrt(u_sup hess_sup); +infinity when hess_sup = 0
    std::size_t hessian_nodes = 0;
};

/// mask[k] marks the support nodes (flat index as in CylGrid::index).
GnResult gn_ratio(const ScalarField& u, const std::vector<bool>& mask);

std::vector<bool> support_mask(const ScalarField& rho);

/// |surface_flux_mass(U, radius) - M0| / M0.
double mass_flux_check(const Problem& problem, const SolutionState& state, double radius);

/// Default margin radius: min(Rmax, Zmax) minus three cells.
double margin_radius(const CylGrid& g);

/// phi(|v|^2 / 2 - u(x), kappa (x1 v2 - x2 v1)) with u interpolated from the grid.
double f_eval(const SolutionState& state, const StructureFunction& sf, const std::array<double, 3>& x,
              const std::array<double, 3>& v);

struct MomentCheck {
    double rho = 0.0;     ///< stored density at the node
    double moment = 0.0;  ///< int f dv
    double rel_error = 0.0;
};

/// Velocity moment of f at grid node (i, j), integrated over v2 = s and E with the remaining
/// velocity components on a circle of radius sqrt(2 (E + u) - s^2).
MomentCheck velocity_moment_check(const SolutionState& state, const StructureFunction& sf, std::size_t i,
                                  std::size_t j);

struct UBoundScaling {
    std::vector<double> kappa;
    std::vector<double> u_sup;
    std::vector<double> ratio;  ///< u_sup |kappa|^{2/5}
    double slope = 0.0;         ///< least-squares slope of log u_sup against log |kappa|
    bool pre_asymptotic = false;  ///< ratio increases somewhere in the tail
};

/// Uses the states with |kappa| > 1; throws InsufficientData when fewer than four.
UBoundScaling u_bound_scaling(const std::vector<SolutionState>& states);

double u_sup_on_support(const SolutionState& state);

enum class ProbeStatus { Ok, SkippedNoParams, SkippedSmallKappa };

std::string to_string(ProbeStatus s);

struct GeneralBoundProbe {
    ProbeStatus status = ProbeStatus::Ok;
    double exponent = 0.0;     ///< 2 Gamma / (3 + Gamma + 2 delta)
    double lower_ratio = 0.0;  ///< max u |kappa r|^exponent over nodes with |kappa r| > K
    double upper_ratio = 0.0;  ///< max |dw/dr| / |kappa|^{1 + Lambda}
    std::size_t nodes = 0;
};

GeneralBoundProbe general_bound_probe(const SolutionState& state, const StructureFunction& sf, double K = 1.0);

struct DiagnosticsOptions {
    int velocity_samples = 8;  ///< 0 disables the velocity-moment check
    unsigned sample_seed = 12345;
    std::optional<double> flux_radius;  ///< defaults to margin_radius
    double support_threshold = 1e-10;
    double probe_K = 1.0;
};

struct DiagnosticsReport {
    double kappa = 0.0;
    double alpha = 0.0;
    double sup_rho = 0.0;
    double support_r_extent = 0.0;
    double support_z_extent = 0.0;
    double u_sup_on_support = 0.0;
    double grad_u_sup = 0.0;
    double hess_u_sup = 0.0;
    double gn_ratio = 0.0;
    double flux_radius = 0.0;
    double mass_flux_at_margin = 0.0;  ///< relative error against M0
    double velocity_moment_max = 0.0;  ///< worst relative error over sampled interior nodes
    int velocity_moment_nodes = 0;
    bool oblate = true;  ///< support_r_extent >= support_z_extent (report only)
    GeneralBoundProbe probe;
};

DiagnosticsReport diagnose(const Problem& problem, const SolutionState& state, const DiagnosticsOptions& opt = {});

nlohmann::json to_json(const DiagnosticsReport& report);

}  // namespace vps
