#include "vps/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "quadrature.hpp"
#include "vps/errors.hpp"
#include "vps/field_solver.hpp"

namespace vps {

SupportExtent support_extent(const ScalarField& rho, double threshold)
{
    SupportExtent e;
    const double cut = threshold * rho.sup_abs();
    const CylGrid& g = rho.grid;
    for (std::size_t i = 0; i < g.Nr; ++i) {
        for (std::size_t j = 0; j < g.Nz; ++j) {
            if (rho(i, j) > cut && rho(i, j) > 0.0) {
                e.r = std::max(e.r, g.r(i));
                e.z = std::max(e.z, g.z(j));
            }
        }
    }
    return e;
}

ScalarField effective_potential(const SolutionState& state)
{
    ScalarField u = state.U;
    u.kind = FieldKind::EffectivePotential;
    for (double& v : u.values) v += state.alpha;
    return u;
}

std::vector<bool> support_mask(const ScalarField& rho)
{
    std::vector<bool> mask(rho.values.size());
    for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = rho.values[k] > 0.0;
    return mask;
}

namespace {

/// True when every node within two index steps (mirrored across the axis and equator) is masked.
bool deep_inside(const CylGrid& g, const std::vector<bool>& mask, std::size_t i, std::size_t j)
{
    for (int a = -2; a <= 2; ++a) {
        for (int b = -2; b <= 2; ++b) {
            const auto ii = static_cast<std::size_t>(std::abs(static_cast<long>(i) + a));
            const auto jj = static_cast<std::size_t>(std::abs(static_cast<long>(j) + b));
            if (ii >= g.Nr || jj >= g.Nz || !mask[g.index(ii, jj)]) return false;
        }
    }
    return true;
}

}  // namespace

GnResult gn_ratio(const ScalarField& u, const std::vector<bool>& mask)
{
    const CylGrid& g = u.grid;
    const GradientField grad = gradient(u);
    GnResult res;
    for (std::size_t i = 0; i < g.Nr; ++i) {
        for (std::size_t j = 0; j < g.Nz; ++j) {
            if (!mask[g.index(i, j)]) continue;
            res.u_sup = std::max(res.u_sup, u(i, j));
            res.grad_sup = std::max({res.grad_sup, std::abs(grad.dr(i, j)), std::abs(grad.dz(i, j))});
            if (!deep_inside(g, mask, i, j)) continue;
            ++res.hessian_nodes;
            const double c = u(i, j);
            const double up_r = u(i + 1, j), dn_r = i == 0 ? u(1, j) : u(i - 1, j);
            const double up_z = u(i, j + 1), dn_z = j == 0 ? u(i, 1) : u(i, j - 1);
            const double urr = (up_r - 2.0 * c + dn_r) / (g.dr * g.dr);
            const double uzz = (up_z - 2.0 * c + dn_z) / (g.dz * g.dz);
            const double ur_over_r = i == 0 ? urr : (up_r - dn_r) / (2.0 * g.dr * g.r(i));
            double urz = 0.0;
            if (i > 0 && j > 0) {
                urz = (u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1)) / (4.0 * g.dr * g.dz);
            }
            res.hess_sup = std::max({res.hess_sup, std::abs(urr), std::abs(uzz), std::abs(ur_over_r), std::abs(urz)});
        }
    }
    res.ratio = res.hess_sup > 0.0 && res.u_sup > 0.0 ? res.grad_sup / std::sqrt(res.u_sup * res.hess_sup)
                                                      : std::numeric_limits<double>::infinity();
    return res;
}

double margin_radius(const CylGrid& g)
{
    return std::min(g.Rmax(), g.Zmax()) - 3.0 * std::max(g.dr, g.dz);
}

double mass_flux_check(const Problem& problem, const SolutionState& state, double radius)
{
    return std::abs(surface_flux_mass(state.U, radius) - problem.M0) / problem.M0;
}

double f_eval(const SolutionState& state, const StructureFunction& sf, const std::array<double, 3>& x,
              const std::array<double, 3>& v)
{
    const double r = std::hypot(x[0], x[1]);
    const double u = interpolate(state.U, r, x[2]) + state.alpha;
    const double E = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - u;
    if (E >= 0.0) return 0.0;
    return sf.phi(E, state.kappa * (x[0] * v[1] - x[1] * v[0]));
}

MomentCheck velocity_moment_check(const SolutionState& state, const StructureFunction& sf, std::size_t i,
                                  std::size_t j)
{
    const CylGrid& g = state.rho.grid;
    MomentCheck mc;
    mc.rho = state.rho(i, j);
    const double r = g.r(i), z = g.z(j);
    const double u = state.U(i, j) + state.alpha;
    if (u <= 0.0) {
        mc.rel_error = mc.rho == 0.0 ? 0.0 : 1.0;
        return mc;
    }
    const std::array<double, 3> x{r, 0.0, z};
    const double smax = std::sqrt(2.0 * u);
    QuadratureOptions q;
    q.rel_tol = 1e-9;
    q.abs_tol = 1e-11 * std::max(mc.rho, 1e-200) / (4.0 * M_PI * smax);
    auto inner = [&](double s) {
        const double lo = 0.5 * s * s - u;
        if (lo >= 0.0) return 0.0;
        return detail::adaptive_gk(
            [&](double E) {
                const double radial = std::sqrt(std::max(2.0 * (E + u) - s * s, 0.0));
                return f_eval(state, sf, x, {radial, s, 0.0});
            },
            lo, 0.0, q, "velocity moment (E)");
    };
    QuadratureOptions outer = q;
    outer.abs_tol = 1e-10 * std::max(mc.rho, 1e-200) / (2.0 * M_PI);
    mc.moment = 2.0 * M_PI * detail::adaptive_gk(inner, -smax, smax, outer, "velocity moment (s)");
    mc.rel_error = std::abs(mc.moment - mc.rho) / std::max(std::abs(mc.rho), 1e-300);
    return mc;
}

double u_sup_on_support(const SolutionState& state)
{
    double m = 0.0;
    for (std::size_t k = 0; k < state.rho.values.size(); ++k)
        if (state.rho.values[k] > 0.0) m = std::max(m, state.u_at(k));
    return m;
}

UBoundScaling u_bound_scaling(const std::vector<SolutionState>& states)
{
    UBoundScaling s;
    for (const auto& st : states) {
        if (std::abs(st.kappa) <= 1.0) continue;
        s.kappa.push_back(st.kappa);
        s.u_sup.push_back(u_sup_on_support(st));
        s.ratio.push_back(s.u_sup.back() * std::pow(std::abs(st.kappa), 0.4));
    }
    if (s.kappa.size() < 4) {
        throw InsufficientData("u-bound scaling needs at least 4 states with |kappa| > 1, have "
                               + std::to_string(s.kappa.size()));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(s.kappa.size());
    for (std::size_t k = 0; k < s.kappa.size(); ++k) {
        const double lx = std::log(std::abs(s.kappa[k])), ly = std::log(s.u_sup[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    s.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    // tail: second half of the states, ordered by |kappa|
    std::vector<std::size_t> order(s.kappa.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(s.kappa[a]) < std::abs(s.kappa[b]); });
    for (std::size_t k = order.size() / 2 + 1; k < order.size(); ++k) {
        if (s.ratio[order[k]] > s.ratio[order[k - 1]]) s.pre_asymptotic = true;
    }
    return s;
}

std::string to_string(ProbeStatus s)
{
    switch (s) {
    case ProbeStatus::Ok: return "ok";
    case ProbeStatus::SkippedNoParams: return "skipped-no-params";
    case ProbeStatus::SkippedSmallKappa: return "skipped-small-kappa";
    }
    return "unknown";
}

GeneralBoundProbe general_bound_probe(const SolutionState& state, const StructureFunction& sf, double K)
{
    GeneralBoundProbe p;
    const auto& hyp = sf.hypothesis();
    if (!hyp.delta || !hyp.Gamma) {
        p.status = ProbeStatus::SkippedNoParams;
        return p;
    }
    p.exponent = 2.0 * *hyp.Gamma / (3.0 + *hyp.Gamma + 2.0 * *hyp.delta);
    const CylGrid& g = state.rho.grid;
    const double kappa = state.kappa;
    for (std::size_t i = 0; i < g.Nr; ++i) {
        for (std::size_t j = 0; j < g.Nz; ++j) {
            const double u = state.u_at(g.index(i, j));
            if (u <= 0.0) continue;
            const double kr = std::abs(kappa * g.r(i));
            if (kr > K) {
                ++p.nodes;
                p.lower_ratio = std::max(p.lower_ratio, u * std::pow(kr, p.exponent));
            }
            if (kappa != 0.0) {
                p.upper_ratio = std::max(p.upper_ratio, std::abs(w_dr(sf, kappa, g.r(i), u))
                                                            / std::pow(std::abs(kappa), 1.0 + hyp.Lambda));
            }
        }
    }
    if (p.nodes == 0) p.status = ProbeStatus::SkippedSmallKappa;
    return p;
}

DiagnosticsReport diagnose(const Problem& problem, const SolutionState& state, const DiagnosticsOptions& opt)
{
    const CylGrid& g = problem.grid();
    DiagnosticsReport rep;
    rep.kappa = state.kappa;
    rep.alpha = state.alpha;
    rep.sup_rho = state.rho.sup_abs();
    const SupportExtent ext = support_extent(state.rho, opt.support_threshold);
    rep.support_r_extent = ext.r;
    rep.support_z_extent = ext.z;
    rep.oblate = ext.r >= ext.z;
    rep.u_sup_on_support = u_sup_on_support(state);

    const std::vector<bool> mask = support_mask(state.rho);
    const GnResult gn = gn_ratio(effective_potential(state), mask);
    rep.grad_u_sup = gn.grad_sup;
    rep.hess_u_sup = gn.hess_sup;
    rep.gn_ratio = gn.ratio;

    rep.flux_radius = opt.flux_radius.value_or(margin_radius(g));
    rep.mass_flux_at_margin = mass_flux_check(problem, state, rep.flux_radius);

    if (opt.velocity_samples > 0) {
        std::vector<std::pair<std::size_t, std::size_t>> interior;
        for (std::size_t i = 0; i + 1 < g.Nr; ++i) {
            for (std::size_t j = 0; j + 1 < g.Nz; ++j) {
                const bool inside = mask[g.index(i, j)] && mask[g.index(i + 1, j)] && mask[g.index(i, j + 1)]
                                 && (i == 0 || mask[g.index(i - 1, j)]) && (j == 0 || mask[g.index(i, j - 1)]);
                if (inside) interior.emplace_back(i, j);
            }
        }
        std::mt19937 rng(opt.sample_seed);
        for (int s = 0; s < opt.velocity_samples && !interior.empty(); ++s) {
            const auto [i, j] = interior[rng() % interior.size()];
            const MomentCheck mc = velocity_moment_check(state, problem.sf(), i, j);
            rep.velocity_moment_max = std::max(rep.velocity_moment_max, mc.rel_error);
            ++rep.velocity_moment_nodes;
        }
    }
    rep.probe = general_bound_probe(state, problem.sf(), opt.probe_K);
    return rep;
}

nlohmann::json to_json(const DiagnosticsReport& r)
{
    nlohmann::json j{{"kappa", r.kappa},
                     {"alpha", r.alpha},
                     {"sup_rho", r.sup_rho},
                     {"support_r_extent", r.support_r_extent},
                     {"support_z_extent", r.support_z_extent},
                     {"oblate", r.oblate},
                     {"u_sup_on_support", r.u_sup_on_support},
                     {"grad_u_sup", r.grad_u_sup},
                     {"hess_u_sup", r.hess_u_sup},
                     {"flux_radius", r.flux_radius},
                     {"mass_flux_at_margin", r.mass_flux_at_margin},
                     {"velocity_moment_max", r.velocity_moment_max},
                     {"velocity_moment_nodes", r.velocity_moment_nodes}};
    // JSON has no infinity; the degenerate gn ratio is written as null
    j["gn_ratio"] = std::isfinite(r.gn_ratio) ? nlohmann::json(r.gn_ratio) : nlohmann::json(nullptr);
    nlohmann::json p{{"status", to_string(r.probe.status)}};
    if (r.probe.status != ProbeStatus::SkippedNoParams) {
        p["exponent"] = r.probe.exponent;
        p["lower_ratio"] = r.probe.lower_ratio;
        p["upper_ratio"] = r.probe.upper_ratio;
        p["nodes"] = r.probe.nodes;
    }
    j["general_bound_probe"] = p;
    return j;
}

}  // namespace vps
