#pragma once

// One checkpoint per accepted state: state_NNNNNN.vpf holds rho, state_NNNNNN.json the scalars,
// the grid and the structure function needed to rebuild the problem.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vps/continuation.hpp"

namespace vps {

struct CheckpointMeta {
    int step = 0;
    double kappa = 0.0;
    double alpha = 0.0;
    double mass = 0.0;
    double residual_inf = 0.0;
    double mass_error = 0.0;
    double M0 = 0.0;
    double ds_next = 0.0;
    int newton_iters = 0;
    double cond_est = 0.0;
    double clip = 0.0;
    CylGrid grid;
    nlohmann::json structure_function;
};

nlohmann::json to_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j);

/// Base path without extension, e.g. dir/state_000012.
std::filesystem::path checkpoint_stem(const std::filesystem::path& dir, int step);

void write_checkpoint(const std::filesystem::path& dir, int step, const Problem& problem, const SolutionState& state,
                      double ds_next);

struct Checkpoint {
    CheckpointMeta meta;
    ScalarField rho;
};

/// Accepts either stem, the .json sidecar or the .vpf file. Throws FormatError.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Step numbers of the checkpoints in a directory, ascending.
std::vector<int> list_checkpoints(const std::filesystem::path& dir);

/// Rebuilds the state (U, residual norms) from the stored density.
SolutionState restore_state(const Problem& problem, const Checkpoint& cp);

}  // namespace vps
