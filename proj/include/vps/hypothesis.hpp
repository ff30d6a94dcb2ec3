#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vps/structure_function.hpp"

namespace vps {

enum class CheckStatus { VerifiedOnSamples, Violated, Inconclusive };

std::string to_string(CheckStatus status);

struct HypothesisCheck {
    std::string name;
    CheckStatus status = CheckStatus::Inconclusive;
    std::string detail;
    std::optional<std::pair<double, double>> point;  ///< (E, L) or (u, 0) of a violation
    std::optional<double> value;                     ///< fitted constant / limiting ratio, if any
    bool seeding_critical = false;                   ///< a violation rejects continuation seeding
};

struct HypothesisReport {
    std::string sf_id;
    std::vector<HypothesisCheck> checks;

    const HypothesisCheck* find(const std::string& name) const;
    bool all_verified() const;
    /// True when a check needed to seed continuation is violated.
    bool seeding_blocked() const;
};

/// Sample ranges for the pointwise audits. Grids are geometric.
struct ProbeConfig {
    double E_far = 1e6;          ///< largest |E| for the E -> -infinity limits
    double E_near = 1e-8;        ///< smallest |E| for the E -> 0- limits
    double L_max = 1e4;          ///< largest |L| sampled
    double u_small = 1e-6;
    double u_large = 1e6;
    int per_decade = 4;
};

HypothesisReport hypothesis_check(const StructureFunction& sf, const ProbeConfig& probe = {});

nlohmann::json to_json(const HypothesisReport& report);

struct GrowthProbe {
    double slope = 0.0;           ///< least-squares slope of log w against log u
    double hypothesis_bound = 0.0;  ///< 1 + Lambda/2
    std::optional<double> closed_form_exponent;  ///< nu_max + m_max + 3/2 for polytropes with kappa r != 0
};

/// Fits log w(kappa, r, u) against log u over u_grid (all entries > 0).
GrowthProbe growth_probe(const StructureFunction& sf, double kappa, double r, const std::vector<double>& u_grid);

}  // namespace vps
