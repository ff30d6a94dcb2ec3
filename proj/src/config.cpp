#include "vps/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include "vps/errors.hpp"

namespace vps {

namespace {

using json = nlohmann::json;

/// Reads one object of the config, recording defaults into `out` and problems into `problems`.
class Section {
public:
    Section(const json* obj, std::string path, std::vector<std::string>& problems, json& out)
        : obj_(obj), path_(std::move(path)), problems_(problems), out_(out)
    {
        if (obj_ && !obj_->is_object()) {
            problems_.push_back(path_ + ": expected an object");
            obj_ = nullptr;
        }
    }

    ~Section()
    {
        if (!obj_) return;
        for (const auto& item : obj_->items()) {
            if (!known_.count(item.key())) problems_.push_back(key(item.key()) + ": unknown key");
        }
    }

    double number(const std::string& k, double def, const std::function<bool(double)>& ok = {},
                  const char* requirement = "")
    {
        known_.insert(k);
        double v = def;
        if (const json* x = find(k)) {
            if (!x->is_number()) {
                problems_.push_back(key(k) + ": expected a number");
            } else {
                v = x->get<double>();
            }
        }
        if (ok && !ok(v)) problems_.push_back(key(k) + ": must be " + requirement);
        out_[k] = v;
        return v;
    }

    long integer(const std::string& k, long def, const std::function<bool(long)>& ok = {},
                 const char* requirement = "")
    {
        known_.insert(k);
        long v = def;
        if (const json* x = find(k)) {
            if (!x->is_number_integer()) {
                problems_.push_back(key(k) + ": expected an integer");
            } else {
                v = x->get<long>();
            }
        }
        if (ok && !ok(v)) problems_.push_back(key(k) + ": must be " + requirement);
        out_[k] = v;
        return v;
    }

    bool boolean(const std::string& k, bool def)
    {
        known_.insert(k);
        bool v = def;
        if (const json* x = find(k)) {
            if (!x->is_boolean()) {
                problems_.push_back(key(k) + ": expected true or false");
            } else {
                v = x->get<bool>();
            }
        }
        out_[k] = v;
        return v;
    }

    std::optional<double> optional_number(const std::string& k, const std::function<bool(double)>& ok,
                                          const char* requirement)
    {
        known_.insert(k);
        const json* x = find(k);
        if (!x || x->is_null()) {
            out_[k] = nullptr;
            return std::nullopt;
        }
        if (!x->is_number()) {
            problems_.push_back(key(k) + ": expected a number");
            return std::nullopt;
        }
        const double v = x->get<double>();
        if (!ok(v)) problems_.push_back(key(k) + ": must be " + requirement);
        out_[k] = v;
        return v;
    }

    /// Marks a key as handled by the caller and returns it (or null).
    const json* raw(const std::string& k)
    {
        known_.insert(k);
        return find(k);
    }

    std::string key(const std::string& k) const { return path_ + "." + k; }

private:
    const json* find(const std::string& k) const
    {
        if (!obj_) return nullptr;
        auto it = obj_->find(k);
        return it == obj_->end() ? nullptr : &*it;
    }

    const json* obj_;
    std::string path_;
    std::vector<std::string>& problems_;
    json& out_;
    std::set<std::string> known_;
};

const json* member(const json& j, const char* k)
{
    auto it = j.find(k);
    return it == j.end() ? nullptr : &*it;
}

bool positive(double x)
{
    return x > 0.0;
}

bool positive_l(long x)
{
    return x > 0;
}

}  // namespace

std::vector<double> MassCurveSpec::samples() const
{
    std::vector<double> a(static_cast<std::size_t>(count));
    const double ratio = std::log(a_max / a_min);
    for (int k = 0; k < count; ++k) a[k] = a_min * std::exp(ratio * k / (count - 1));
    a.front() = a_min;
    a.back() = a_max;
    return a;
}

const StructureFunction& RunConfig::sf() const
{
    if (!structure_function) throw ConfigError("structure_function: missing");
    return *structure_function;
}

RunConfig parse_config(const json& j)
{
    if (!j.is_object()) throw ConfigError("config: expected a JSON object at the top level");
    RunConfig c;
    std::vector<std::string> problems;
    json& eff = c.effective;
    eff = json::object();

    static const std::set<std::string> sections{"structure_function", "grid", "seed", "radial", "mass_curve",
                                                "probe", "continuation", "diagnostics", "outputs"};
    for (const auto& item : j.items()) {
        if (!sections.count(item.key())) problems.push_back(item.key() + ": unknown key");
    }

    if (const json* sfj = member(j, "structure_function")) {
        try {
            c.structure_function = structure_function_from_json(*sfj);
            eff["structure_function"] = to_json(*c.structure_function);
        } catch (const ConfigError& e) {
            problems.push_back(std::string("structure_function: ") + e.what());
        }
    } else {
        problems.emplace_back("structure_function: missing");
    }

    {
        Section s(member(j, "grid"), "grid", problems, eff["grid"]);
        c.grid.Nr = static_cast<std::size_t>(s.integer("Nr", 64, [](long n) { return n >= 8; }, ">= 8"));
        c.grid.Nz = static_cast<std::size_t>(s.integer("Nz", 64, [](long n) { return n >= 8; }, ">= 8"));
        c.grid.Rmax = s.number("Rmax", 4.0, positive, "positive");
        c.grid.Zmax = s.number("Zmax", 4.0, positive, "positive");
    }
    {
        Section s(member(j, "seed"), "seed", problems, eff["seed"]);
        c.a0 = s.number("a0", 1.0, positive, "positive");
        c.seed.margin_factor = s.number("margin_factor", c.seed.margin_factor, positive, "positive");
        c.seed.check_hypotheses = s.boolean("check_hypotheses", c.seed.check_hypotheses);
    }
    {
        Section s(member(j, "radial"), "radial", problems, eff["radial"]);
        RadialConfig& r = c.radial;
        r.rel_tol = s.number("rel_tol", r.rel_tol, positive, "positive");
        r.abs_tol = s.number("abs_tol", r.abs_tol, positive, "positive");
        r.r_max = s.number("r_max", r.r_max, positive, "positive");
        r.start_factor = s.number("start_factor", r.start_factor, [](double x) { return x > 0.0 && x < 1e-2; },
                                  "in (0, 0.01)");
        r.root_tol = s.number("root_tol", r.root_tol, positive, "positive");
        r.samples = static_cast<int>(
            s.integer("samples", r.samples, [](long n) { return n >= 3 && n % 2 == 1; }, "odd and >= 3"));
        r.error_estimate = s.boolean("error_estimate", r.error_estimate);
    }
    c.seed.radial = c.radial;
    {
        Section s(member(j, "mass_curve"), "mass_curve", problems, eff["mass_curve"]);
        MassCurveSpec& m = c.mass_curve;
        m.a_min = s.number("a_min", m.a_min, positive, "positive");
        m.a_max = s.number("a_max", m.a_max, positive, "positive");
        m.count = static_cast<int>(s.integer("count", m.count, [](long n) { return n >= 2; }, ">= 2"));
        m.h_log = s.number("h_log", m.h_log, [](double x) { return x > 0.0 && x < 0.5; }, "in (0, 0.5)");
        if (!(m.a_min < m.a_max)) problems.push_back("mass_curve.a_min: must be below mass_curve.a_max");
    }
    {
        Section s(member(j, "probe"), "probe", problems, eff["probe"]);
        ProbeConfig& p = c.probe;
        p.E_far = s.number("E_far", p.E_far, [](double x) { return x > 1.0; }, "> 1");
        p.E_near = s.number("E_near", p.E_near, [](double x) { return x > 0.0 && x < 1.0; }, "in (0, 1)");
        p.L_max = s.number("L_max", p.L_max, positive, "positive");
        p.u_small = s.number("u_small", p.u_small, [](double x) { return x > 0.0 && x < 1.0; }, "in (0, 1)");
        p.u_large = s.number("u_large", p.u_large, [](double x) { return x > 1.0; }, "> 1");
        p.per_decade = static_cast<int>(s.integer("per_decade", p.per_decade, positive_l, "positive"));
    }
    {
        Section s(member(j, "continuation"), "continuation", problems, eff["continuation"]);
        ContinuationConfig& k = c.continuation;
        k.ds0 = s.number("ds0", k.ds0, positive, "positive");
        k.ds_min = s.number("ds_min", k.ds_min, positive, "positive");
        k.ds_max = s.number("ds_max", k.ds_max, positive, "positive");
        if (!(k.ds_min <= k.ds0 && k.ds0 <= k.ds_max)) {
            problems.push_back("continuation.ds0: must satisfy ds_min <= ds0 <= ds_max");
        }
        k.kappa_max = s.number("kappa_max", k.kappa_max, positive, "positive");
        k.sup_rho_max = s.number("sup_rho_max", k.sup_rho_max, positive, "positive");
        k.kappa_weight = s.number("kappa_weight", k.kappa_weight, positive, "positive");
        k.grow = s.number("grow", k.grow, [](double x) { return x >= 1.0; }, ">= 1");
        k.fast_iters = static_cast<int>(s.integer("fast_iters", k.fast_iters, positive_l, "positive"));
        k.max_steps = static_cast<int>(s.integer("max_steps", k.max_steps, [](long n) { return n >= 0; }, ">= 0"));
        k.direction = s.number("direction", k.direction, [](double x) { return x == 1.0 || x == -1.0; }, "1 or -1");
        k.margin_rings = static_cast<std::size_t>(
            s.integer("margin_rings", static_cast<long>(k.margin_rings), positive_l, "positive"));

        json& tol_out = eff["continuation"]["tolerances"];
        const json* tol = s.raw("tolerances");
        Section t(tol, "continuation.tolerances", problems, tol_out);
        NewtonOptions& n = k.newton;
        n.max_iter = static_cast<int>(t.integer("max_iter", n.max_iter, positive_l, "positive"));
        n.f1_tol = t.number("f1_tol", n.f1_tol, positive, "positive");
        n.f2_tol = t.number("f2_tol", n.f2_tol, positive, "positive");
        n.clip_reject = t.number("clip_reject", n.clip_reject, positive, "positive");
        n.rcond_min = t.number("rcond_min", n.rcond_min, positive, "positive");
        n.max_halvings = static_cast<int>(t.integer("max_halvings", n.max_halvings, [](long x) { return x >= 0; },
                                                    ">= 0"));
        c.seed.newton = n;
    }
    {
        Section s(member(j, "diagnostics"), "diagnostics", problems, eff["diagnostics"]);
        DiagnosticsOptions& d = c.diagnostics;
        c.diagnostics_enabled = s.boolean("enabled", c.diagnostics_enabled);
        d.velocity_samples =
            static_cast<int>(s.integer("velocity_samples", d.velocity_samples, [](long n) { return n >= 0; }, ">= 0"));
        d.sample_seed = static_cast<unsigned>(
            s.integer("sample_seed", d.sample_seed, [](long n) { return n >= 0 && n <= 0xffffffffL; },
                      "a 32-bit unsigned integer"));
        d.flux_radius = s.optional_number("flux_radius", positive, "positive");
        d.support_threshold = s.number("support_threshold", d.support_threshold,
                                       [](double x) { return x >= 0.0 && x < 1.0; }, "in [0, 1)");
        d.probe_K = s.number("probe_K", d.probe_K, positive, "positive");
    }
    {
        Section s(member(j, "outputs"), "outputs", problems, eff["outputs"]);
        if (const json* dir = s.raw("directory")) {
            if (!dir->is_string() || dir->get<std::string>().empty()) {
                problems.push_back("outputs.directory: expected a non-empty string");
            } else {
                c.outputs.directory = dir->get<std::string>();
            }
        }
        eff["outputs"]["directory"] = c.outputs.directory;
        json formats = json::array({"binary"});
        if (const json* f = s.raw("formats")) {
            if (!f->is_array()) {
                problems.push_back("outputs.formats: expected an array of strings");
            } else {
                for (const auto& x : *f) {
                    if (x == "csv") {
                        c.outputs.field_csv = true;
                    } else if (x != "binary") {
                        problems.push_back("outputs.formats: unknown format " + x.dump());
                    }
                }
            }
        }
        if (c.outputs.field_csv) formats.push_back("csv");
        eff["outputs"]["formats"] = formats;
    }

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return c;
}

RunConfig load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

}  // namespace vps
