#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vps/checkpoint.hpp"
#include "vps/config.hpp"
#include "vps/diagnostics.hpp"
#include "vps/errors.hpp"
#include "vps/format.hpp"
#include "vps/hypothesis.hpp"
#include "vps/parallel.hpp"
#include "vps/radial_solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vps;

namespace {

enum Exit { Ok = 0, ConfigFailure = 2, SolverFailure = 3, Alternative = 4 };

struct Options {
    std::string config;
    std::string out;
    std::string checkpoint;
    unsigned jobs = 0;
    bool quiet = false;
};

/// Error carrying its own exit code, for failures that are not library exceptions.
struct Refusal {
    int code;
    std::string message;
};

void log(const Options& o, const std::string& msg)
{
    if (!o.quiet) std::cerr << msg << '\n';
}

fs::path output_dir(const Options& o, const RunConfig* cfg)
{
    fs::path dir = !o.out.empty() ? fs::path(o.out) : fs::path(cfg ? cfg->outputs.directory : "out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = dir / ".write-test";
    {
        std::ofstream os(probe);
        if (!os) throw Refusal{ConfigFailure, "output directory " + dir.string() + " is not writable"};
    }
    fs::remove(probe, ec);
    return dir;
}

RunConfig require_config(const Options& o)
{
    if (o.config.empty()) throw ConfigError("--config PATH is required for this command");
    return load_config(o.config);
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream os(path);
    os << text;
    if (!os) throw Refusal{SolverFailure, "cannot write " + path.string()};
}

void write_metadata(const fs::path& dir, const std::string& command, const json& config, const json& result)
{
    json meta{{"command", command}, {"config", config}, {"result", result}};
    write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

int cmd_radial(const Options& o)
{
    const RunConfig cfg = require_config(o);
    const fs::path dir = output_dir(o, &cfg);
    RadialProfile prof;
    try {
        prof = solve_radial(cfg.sf(), cfg.a0, cfg.radial);
    } catch (const NoCompactSupport& e) {
        std::cerr << "case (ii): u(r) stays positive up to r_max = " << fmt17(e.r_max) << "\n";
        write_metadata(dir, "radial", cfg.effective,
                       {{"status", "no-compact-support"}, {"r_max", e.r_max}, {"u_at_r_max", e.u_at_r_max}});
        return SolverFailure;
    }
    std::ostringstream csv;
    write_profile_csv(csv, prof);
    write_text(dir / "profile.csv", csv.str());
    write_metadata(dir, "radial", cfg.effective,
                   {{"status", "ok"},
                    {"a", prof.a},
                    {"u0", prof.u0},
                    {"R", prof.R},
                    {"M", prof.M},
                    {"M_simpson", mass_of(prof)},
                    {"alpha", prof.alpha},
                    {"du_R", prof.du_R},
                    {"R_error", prof.R_error},
                    {"M_error", prof.M_error}});
    log(o, "R = " + fmt17(prof.R) + "  M = " + fmt17(prof.M));
    return Ok;
}

int cmd_mass_curve(const Options& o)
{
    const RunConfig cfg = require_config(o);
    const fs::path dir = output_dir(o, &cfg);
    const MassCurve mc = mass_curve(cfg.sf(), cfg.mass_curve.samples(), cfg.radial, cfg.mass_curve.h_log);
    std::ostringstream csv;
    write_mass_curve_csv(csv, mc);
    write_text(dir / "mass_curve.csv", csv.str());
    int failures = 0;
    for (const auto& p : mc.points) failures += p.failure ? 1 : 0;
    write_metadata(dir, "mass-curve", cfg.effective,
                   {{"sign_change", mc.sign_change},
                    {"degenerate", mc.degenerate},
                    {"degenerate_tol", mc.degenerate_tol},
                    {"failures", failures}});
    log(o, std::string("mass curve: ") + (mc.degenerate ? "degenerate" : "non-degenerate")
               + (mc.sign_change ? ", dM/da changes sign" : ""));
    return failures == 0 ? Ok : SolverFailure;
}

int cmd_check(const Options& o)
{
    const RunConfig cfg = require_config(o);
    const fs::path dir = output_dir(o, &cfg);
    const HypothesisReport rep = hypothesis_check(cfg.sf(), cfg.probe);
    write_text(dir / "hypothesis.json", to_json(rep).dump(2) + "\n");
    write_metadata(dir, "check", cfg.effective,
                   {{"all_verified", rep.all_verified()}, {"seeding_blocked", rep.seeding_blocked()}});
    for (const auto& c : rep.checks) log(o, c.name + ": " + to_string(c.status));
    return Ok;
}

std::string curve_header()
{
    return "step,kappa,alpha,mass,sup_rho,support_r,support_z,newton_iters,cond_est\n";
}

std::string curve_row(int step, const SolutionState& s, double support_threshold)
{
    const SupportExtent e = support_extent(s.rho, support_threshold);
    return std::to_string(step) + "," + fmt17(s.kappa) + "," + fmt17(s.alpha) + "," + fmt17(total_mass(s.rho)) + ","
         + fmt17(s.rho.sup_abs()) + "," + fmt17(e.r) + "," + fmt17(e.z) + "," + std::to_string(s.newton_iters) + ","
         + fmt17(s.cond_est) + "\n";
}

/// Writes checkpoints, curve rows and diagnostics for accepted states.
class Recorder {
public:
    Recorder(const Options& o, const RunConfig& cfg, const Problem& pb, const fs::path& dir)
        : o_(o), cfg_(cfg), pb_(pb), dir_(dir), csv_(dir / "curve.csv"), diag_(dir / "diagnostics.jsonl")
    {
        csv_ << curve_header();
    }

    void accept(int step, const SolutionState& s, double ds_next)
    {
        write_checkpoint(dir_, step, pb_, s, ds_next);
        if (cfg_.outputs.field_csv) {
            const fs::path stem = checkpoint_stem(dir_, step);
            std::ofstream rho(stem.string() + "_rho.csv"), U(stem.string() + "_U.csv");
            write_field_csv(rho, s.rho);
            write_field_csv(U, s.U);
        }
        csv_ << curve_row(step, s, cfg_.diagnostics.support_threshold) << std::flush;
        if (cfg_.diagnostics_enabled) {
            json d = to_json(diagnose(pb_, s, cfg_.diagnostics));
            d["step"] = step;
            diag_ << d.dump() << '\n' << std::flush;
        }
        states_.push_back(s);
        log(o_, "step " + std::to_string(step) + "  kappa = " + fmt17(s.kappa) + "  sup rho = " + fmt17(s.rho.sup_abs())
                    + "  newton " + std::to_string(s.newton_iters));
    }

    const std::vector<SolutionState>& states() const { return states_; }

private:
    const Options& o_;
    const RunConfig& cfg_;
    const Problem& pb_;
    fs::path dir_;
    std::ofstream csv_, diag_;
    std::vector<SolutionState> states_;
};

int finish_curve(const Options& o, const RunConfig& cfg, const fs::path& dir, const std::string& command,
                 const ContinuationCurve& curve, const Recorder& rec, const Problem& pb, json extra)
{
    json result = std::move(extra);
    result["termination"] = to_string(curve.termination);
    result["ds_next"] = curve.ds_next;
    result["M0"] = pb.M0;
    result["accepted_steps"] = curve.history.size();
    json history = json::array();
    for (const auto& h : curve.history) {
        history.push_back({{"step", h.step}, {"ds", h.ds}, {"attempts", h.attempts}, {"note", h.note}});
    }
    result["history"] = history;
    try {
        const UBoundScaling sc = u_bound_scaling(rec.states());
        result["u_bound_scaling"] = {{"slope", sc.slope},
                                     {"kappa", sc.kappa},
                                     {"ratio", sc.ratio},
                                     {"pre_asymptotic", sc.pre_asymptotic}};
    } catch (const InsufficientData& e) {
        result["u_bound_scaling"] = {{"status", "insufficient-data"}, {"detail", e.what()}};
    }
    write_metadata(dir, command, cfg.effective, result);
    log(o, "termination: " + to_string(curve.termination));
    switch (curve.termination) {
    case Termination::KappaMax:
    case Termination::UserStop: return Ok;
    case Termination::SupportReachedMargin:
    case Termination::DensityExceeded: return Alternative;
    case Termination::StepCollapse: return SolverFailure;
    }
    return SolverFailure;
}

int cmd_continue(const Options& o)
{
    const RunConfig cfg = require_config(o);
    const fs::path dir = output_dir(o, &cfg);
    Problem pb(cfg.sf(), cfg.grid.make());
    const SolutionState seed = initial_state(pb, cfg.a0, cfg.seed);
    log(o, "seed: M0 = " + fmt17(pb.M0) + "  alpha = " + fmt17(seed.alpha));
    Recorder rec(o, cfg, pb, dir);
    rec.accept(0, seed, cfg.continuation.ds0);
    const ContinuationCurve curve = continue_curve(pb, seed, cfg.continuation,
                                                   [&](int step, const SolutionState& s, double ds_next) {
                                                       rec.accept(step, s, ds_next);
                                                   });
    return finish_curve(o, cfg, dir, "continue", curve, rec, pb, {{"seed_cond_est", seed.cond_est}});
}

/// Lists every field where the checkpoint and the configuration disagree.
std::vector<std::string> mismatches(const CheckpointMeta& m, const RunConfig& cfg)
{
    std::vector<std::string> out;
    const CylGrid g = cfg.grid.make();
    auto cmp_size = [&](const char* name, std::size_t a, std::size_t b) {
        if (a != b) out.push_back(std::string("grid.") + name + ": checkpoint " + std::to_string(a) + ", config "
                                  + std::to_string(b));
    };
    auto cmp_real = [&](const char* name, double a, double b) {
        if (a != b) out.push_back(std::string("grid.") + name + ": checkpoint " + fmt17(a) + ", config " + fmt17(b));
    };
    cmp_size("Nr", m.grid.Nr, g.Nr);
    cmp_size("Nz", m.grid.Nz, g.Nz);
    cmp_real("dr", m.grid.dr, g.dr);
    cmp_real("dz", m.grid.dz, g.dz);
    const json sf = to_json(cfg.sf());
    if (m.structure_function != sf) {
        out.push_back("structure_function: checkpoint " + m.structure_function.dump() + ", config " + sf.dump());
    }
    return out;
}

Checkpoint load_checkpoint_or_refuse(const std::string& path)
{
    if (path.empty()) throw Refusal{ConfigFailure, "a checkpoint path is required"};
    try {
        return read_checkpoint(path);
    } catch (const FormatError& e) {
        throw Refusal{ConfigFailure, e.what()};
    }
}

int cmd_resume(const Options& o)
{
    const RunConfig cfg = require_config(o);
    const Checkpoint last_cp = load_checkpoint_or_refuse(o.checkpoint);
    const auto bad = mismatches(last_cp.meta, cfg);
    if (!bad.empty()) {
        std::string msg = "refusing to resume: checkpoint does not match the configuration";
        for (const auto& b : bad) msg += "\n  " + b;
        throw Refusal{ConfigFailure, msg};
    }
    fs::path cp_dir = fs::path(o.checkpoint).parent_path();
    if (cp_dir.empty()) cp_dir = ".";
    const fs::path dir = output_dir(o, &cfg);

    Problem pb(cfg.sf(), cfg.grid.make());
    pb.M0 = last_cp.meta.M0;
    const int step = last_cp.meta.step;
    const SolutionState last = restore_state(pb, last_cp);
    std::optional<SolutionState> previous;
    if (step > 0) previous = restore_state(pb, load_checkpoint_or_refuse(checkpoint_stem(cp_dir, step - 1).string()));

    // rebuild the curve summary up to the checkpoint so the extended file matches an uninterrupted run
    Recorder rec(o, cfg, pb, dir);
    for (int k = 0; k < step; ++k) {
        const fs::path stem = checkpoint_stem(cp_dir, k);
        if (!fs::exists(stem.string() + ".json")) continue;
        const Checkpoint cp = load_checkpoint_or_refuse(stem.string());
        rec.accept(k, restore_state(pb, cp), cp.meta.ds_next);
    }
    rec.accept(step, last, last_cp.meta.ds_next);
    const ContinuationCurve curve =
        resume_curve(pb, previous ? &*previous : nullptr, last, step, last_cp.meta.ds_next, cfg.continuation,
                     [&](int s, const SolutionState& st, double ds_next) { rec.accept(s, st, ds_next); });
    return finish_curve(o, cfg, dir, "resume", curve, rec, pb, {{"resumed_from", step}});
}

int cmd_diagnose(const Options& o)
{
    std::optional<RunConfig> cfg;
    if (!o.config.empty()) cfg = load_config(o.config);
    const Checkpoint cp = load_checkpoint_or_refuse(o.checkpoint);
    const fs::path dir = output_dir(o, cfg ? &*cfg : nullptr);
    StructureFunction sf = structure_function_from_json(cp.meta.structure_function);
    Problem pb(sf, cp.meta.grid);
    pb.M0 = cp.meta.M0;
    const SolutionState s = restore_state(pb, cp);
    const DiagnosticsOptions opt = cfg ? cfg->diagnostics : DiagnosticsOptions{};
    json d = to_json(diagnose(pb, s, opt));
    d["step"] = cp.meta.step;
    d["residual_inf"] = s.residual_inf;
    d["mass_error"] = s.mass_error;
    write_text(dir / "diagnostics.json", d.dump(2) + "\n");

    // r- and z-axis slices of u and rho
    const CylGrid& g = pb.grid();
    std::ostringstream csv;
    csv << "axis,coordinate,u,rho\n";
    for (std::size_t i = 0; i < g.Nr; ++i)
        csv << "r," << fmt17(g.r(i)) << "," << fmt17(s.u_at(g.index(i, 0))) << "," << fmt17(s.rho(i, 0)) << "\n";
    for (std::size_t j = 0; j < g.Nz; ++j)
        csv << "z," << fmt17(g.z(j)) << "," << fmt17(s.u_at(g.index(0, j))) << "," << fmt17(s.rho(0, j)) << "\n";
    write_text(dir / "slices.csv", csv.str());
    if (!o.quiet) std::cout << d.dump(2) << '\n';
    return Ok;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Axisymmetric Vlasov-Poisson steady states: radial seeds, continuation in the rotation parameter, "
                 "diagnostics"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
        sub->add_option("--config", o.config, "JSON run configuration");
        sub->add_option("--out", o.out, "output directory (overrides outputs.directory)");
        sub->add_option("--jobs", o.jobs, "maximum worker threads (0 = all cores)");
        sub->add_flag("--quiet", o.quiet, "suppress progress messages");
        if (needs_checkpoint) sub->add_option("checkpoint", o.checkpoint, "checkpoint (state_NNNNNN[.json|.vpf])");
    };
    std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands{
        {app.add_subcommand("radial", "solve the non-rotating radial problem at seed.a0"), cmd_radial},
        {app.add_subcommand("mass-curve", "sample M(a) and M'(a)"), cmd_mass_curve},
        {app.add_subcommand("check", "audit the structure-function hypotheses"), cmd_check},
        {app.add_subcommand("continue", "seed and continue in kappa"), cmd_continue},
        {app.add_subcommand("diagnose", "diagnostics of a checkpointed state"), cmd_diagnose},
        {app.add_subcommand("resume", "continue from a checkpoint"), cmd_resume},
    };
    for (auto& [sub, fn] : commands) add_common(sub, sub->get_name() == "diagnose" || sub->get_name() == "resume");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : ConfigFailure;
    }
    set_max_jobs(o.jobs);
    for (auto& [sub, fn] : commands) {
        if (!sub->parsed()) continue;
        try {
            return fn(o);
        } catch (const Refusal& r) {
            std::cerr << "error: " << r.message << '\n';
            return r.code;
        } catch (const ConfigError& e) {
            std::cerr << "configuration error: " << e.what() << '\n';
            return ConfigFailure;
        } catch (const Error& e) {
            std::cerr << "solver failure: " << e.what() << '\n';
            return SolverFailure;
        } catch (const std::exception& e) {
            std::cerr << "failure: " << e.what() << '\n';
            return SolverFailure;
        }
    }
    return ConfigFailure;
}
