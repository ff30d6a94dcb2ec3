#pragma once

// Run configuration: one JSON document. Unknown keys and invalid values are collected and
// reported together as a ConfigError.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vps/continuation.hpp"
#include "vps/diagnostics.hpp"
#include "vps/hypothesis.hpp"
#include "vps/radial_solver.hpp"

namespace vps {

struct GridSpec {
    std::size_t Nr = 64;
    std::size_t Nz = 64;
    double Rmax = 4.0;
    double Zmax = 4.0;

    CylGrid make() const { return CylGrid::make(Nr, Nz, Rmax, Zmax); }
};

struct MassCurveSpec {
    double a_min = 0.1;
    double a_max = 10.0;
    int count = 21;        ///< geometric samples between a_min and a_max
    double h_log = 0.01;   ///< log-a step of the dM/da stencil

    std::vector<double> samples() const;
};

struct OutputSpec {
    std::string directory = "out";
    bool field_csv = false;  ///< "csv" in formats: also dump rho and U as CSV per accepted state
};

struct RunConfig {
    std::optional<StructureFunction> structure_function;
    GridSpec grid;
    double a0 = 1.0;
    RadialConfig radial;
    MassCurveSpec mass_curve;
    ProbeConfig probe;
    SeedOptions seed;
    ContinuationConfig continuation;
    bool diagnostics_enabled = true;
    DiagnosticsOptions diagnostics;
    OutputSpec outputs;

    /// Every setting with defaults filled in, written into output metadata.
    nlohmann::json effective;

    const StructureFunction& sf() const;
};

/// Throws ConfigError listing every offending key.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

}  // namespace vps
