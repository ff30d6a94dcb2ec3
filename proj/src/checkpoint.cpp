#include "vps/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <regex>

#include "vps/errors.hpp"

namespace vps {

namespace fs = std::filesystem;

nlohmann::json to_json(const CheckpointMeta& m)
{
    return nlohmann::json{{"step", m.step},
                          {"kappa", m.kappa},
                          {"alpha", m.alpha},
                          {"mass", m.mass},
                          {"residual_inf", m.residual_inf},
                          {"mass_error", m.mass_error},
                          {"M0", m.M0},
                          {"ds_next", m.ds_next},
                          {"newton_iters", m.newton_iters},
                          {"cond_est", m.cond_est},
                          {"clip", m.clip},
                          {"grid", to_json(m.grid)},
                          {"structure_function", m.structure_function}};
}

CheckpointMeta checkpoint_meta_from_json(const nlohmann::json& j)
{
    CheckpointMeta m;
    try {
        m.step = j.at("step").get<int>();
        m.kappa = j.at("kappa").get<double>();
        m.alpha = j.at("alpha").get<double>();
        m.mass = j.at("mass").get<double>();
        m.residual_inf = j.at("residual_inf").get<double>();
        m.mass_error = j.value("mass_error", 0.0);
        m.M0 = j.at("M0").get<double>();
        m.ds_next = j.at("ds_next").get<double>();
        m.newton_iters = j.value("newton_iters", 0);
        m.cond_est = j.value("cond_est", 0.0);
        m.clip = j.value("clip", 0.0);
        m.grid = grid_from_json(j.at("grid"));
        m.structure_function = j.at("structure_function");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint sidecar: ") + e.what());
    }
    return m;
}

fs::path checkpoint_stem(const fs::path& dir, int step)
{
    char name[32];
    std::snprintf(name, sizeof name, "state_%06d", step);
    return dir / name;
}

void write_checkpoint(const fs::path& dir, int step, const Problem& problem, const SolutionState& state,
                      double ds_next)
{
    fs::create_directories(dir);
    const fs::path stem = checkpoint_stem(dir, step);
    write_field_binary(stem.string() + ".vpf", state.rho);
    CheckpointMeta m;
    m.step = step;
    m.kappa = state.kappa;
    m.alpha = state.alpha;
    m.mass = total_mass(state.rho);
    m.residual_inf = state.residual_inf;
    m.mass_error = state.mass_error;
    m.M0 = problem.M0;
    m.ds_next = ds_next;
    m.newton_iters = state.newton_iters;
    m.cond_est = state.cond_est;
    m.clip = state.clip;
    m.grid = problem.grid();
    m.structure_function = to_json(problem.sf());
    std::ofstream os(stem.string() + ".json");
    os << to_json(m).dump(2) << '\n';
    if (!os) throw FormatError("cannot write checkpoint " + stem.string() + ".json");
}

Checkpoint read_checkpoint(const fs::path& path)
{
    fs::path stem = path;
    if (stem.extension() == ".json" || stem.extension() == ".vpf") stem.replace_extension();
    const std::string json_path = stem.string() + ".json";
    std::ifstream is(json_path);
    if (!is) throw FormatError("checkpoint not found: " + json_path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint sidecar " + json_path + ": " + e.what());
    }
    Checkpoint cp;
    cp.meta = checkpoint_meta_from_json(j);
    cp.rho = read_field_binary(stem.string() + ".vpf");
    if (!(cp.rho.grid == cp.meta.grid)) throw FormatError("checkpoint " + stem.string() + ": field grid differs from sidecar");
    if (cp.rho.kind != FieldKind::Density) throw FormatError("checkpoint " + stem.string() + ": field is not a density");
    return cp;
}

std::vector<int> list_checkpoints(const fs::path& dir)
{
    std::vector<int> steps;
    if (!fs::is_directory(dir)) return steps;
    static const std::regex pattern(R"(state_(\d{6})\.json)");
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) steps.push_back(std::stoi(m[1].str()));
    }
    std::sort(steps.begin(), steps.end());
    return steps;
}

SolutionState restore_state(const Problem& problem, const Checkpoint& cp)
{
    SolutionState s = make_state(problem, cp.rho, cp.meta.alpha, cp.meta.kappa);
    s.newton_iters = cp.meta.newton_iters;
    s.cond_est = cp.meta.cond_est;
    s.clip = cp.meta.clip;
    return s;
}

}  // namespace vps
