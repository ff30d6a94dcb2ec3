#include "vps/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace vps {

namespace {

std::string fmt(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::vector<double> geometric(double lo, double hi, int per_decade)
{
    std::vector<double> out;
    const int n = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
    for (int k = 0; k <= n; ++k) out.push_back(lo * std::pow(10.0, static_cast<double>(k) / per_decade));
    return out;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Log-log slope of f over the upper half of a geometric grid of |E| or u values.
double tail_slope(const std::vector<double>& grid, const std::function<double(double)>& f)
{
    std::vector<double> lx, ly;
    for (std::size_t i = grid.size() / 2; i < grid.size(); ++i) {
        const double v = f(grid[i]);
        if (!(v > 0.0) || !std::isfinite(v)) continue;
        lx.push_back(std::log(grid[i]));
        ly.push_back(std::log(v));
    }
    if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    return ls_slope(lx, ly);
}

/// A quantity that should tend to infinity (want > 0) or zero (want < 0) along the grid.
HypothesisCheck limit_check(std::string name, const std::string& what, const std::vector<double>& grid,
                            const std::function<double(double)>& f, int want_sign, bool grid_is_energy,
                            bool critical)
{
    HypothesisCheck c;
    c.name = std::move(name);
    c.seeding_critical = critical;
    const double slope = tail_slope(grid, f);
    c.value = slope;
    const double tol = 1e-3;
    if (!std::isfinite(slope)) {
        c.status = CheckStatus::Inconclusive;
        c.detail = what + ": no usable samples";
    } else if (slope * want_sign > tol) {
        c.status = CheckStatus::VerifiedOnSamples;
        c.detail = what + ": log-log tail slope " + fmt(slope);
    } else if (slope * want_sign < -tol) {
        c.status = CheckStatus::Violated;
        const double x = grid.back();
        c.point = grid_is_energy ? std::make_pair(-x, 0.0) : std::make_pair(x, 0.0);
        c.detail = what + ": tail slope " + fmt(slope) + " has the wrong sign";
    } else {
        c.status = CheckStatus::Inconclusive;
        c.detail = what + ": tail slope " + fmt(slope) + " is indistinguishable from zero";
    }
    return c;
}

std::vector<double> signed_L_grid(double L_max, int per_decade)
{
    std::vector<double> out{0.0};
    for (double L : geometric(1e-3, L_max, per_decade)) {
        out.push_back(L);
        out.push_back(-L);
    }
    return out;
}

}  // namespace

std::string to_string(CheckStatus status)
{
    switch (status) {
    case CheckStatus::VerifiedOnSamples: return "verified-on-samples";
    case CheckStatus::Violated: return "violated";
    case CheckStatus::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

const HypothesisCheck* HypothesisReport::find(const std::string& name) const
{
    for (const auto& c : checks)
        if (c.name == name) return &c;
    return nullptr;
}

bool HypothesisReport::all_verified() const
{
    return std::all_of(checks.begin(), checks.end(),
                       [](const auto& c) { return c.status == CheckStatus::VerifiedOnSamples; });
}

bool HypothesisReport::seeding_blocked() const
{
    return std::any_of(checks.begin(), checks.end(), [](const auto& c) {
        return c.seeding_critical && c.status == CheckStatus::Violated;
    });
}

HypothesisReport hypothesis_check(const StructureFunction& sf, const ProbeConfig& probe)
{
    HypothesisReport report;
    report.sf_id = sf.id();
    const auto& hyp = sf.hypothesis();
    const auto L_grid = signed_L_grid(probe.L_max, probe.per_decade);

    // phi > 0 for E < 0, phi = 0 for E > 0
    {
        HypothesisCheck c;
        c.name = "phi_sign";
        c.seeding_critical = true;
        c.status = CheckStatus::VerifiedOnSamples;
        c.detail = "phi > 0 for E < 0 and phi = 0 for E > 0 on the sample grid";
        for (double mag : geometric(probe.E_near, probe.E_far, probe.per_decade)) {
            for (double L : L_grid) {
                const double neg = sf.phi(-mag, L);
                const double pos = sf.phi(mag, L);
                if (!(neg > 0.0) || pos != 0.0) {
                    c.status = CheckStatus::Violated;
                    c.point = std::make_pair(neg > 0.0 ? mag : -mag, L);
                    c.detail = "sign condition fails at E = " + fmt(c.point->first) + ", L = " + fmt(L);
                    break;
                }
            }
            if (c.status == CheckStatus::Violated) break;
        }
        report.checks.push_back(c);
    }

    const auto far = geometric(1.0, probe.E_far, probe.per_decade);
    report.checks.push_back(limit_check(
        "phi_growth_lower", "|E|^{1/2} phi(E,0) -> infinity as E -> -infinity", far,
        [&](double m) { return std::sqrt(m) * sf.phi(-m, 0.0); }, +1, true, true));
    report.checks.push_back(limit_check(
        "phi_growth_upper", "|E|^{-7/2} phi(E,0) -> 0 as E -> -infinity", far,
        [&](double m) { return std::pow(m, -3.5) * sf.phi(-m, 0.0); }, -1, true, true));

    // phi + |dphi/dL| <= C |E|^{-mu} (1 + |L|)^Lambda on -B < E < 0, C by max ratio
    {
        HypothesisCheck c;
        c.name = "phi_upper_bound";
        const auto Es = geometric(probe.E_near * hyp.B, hyp.B, probe.per_decade);
        const double E_edge = Es[static_cast<std::size_t>(probe.per_decade)];
        const double L_edge = probe.L_max / 10.0;
        double C_core = 0.0, C_edge = 0.0;
        std::pair<double, double> worst{0.0, 0.0};
        for (double mag : Es) {
            for (double L : L_grid) {
                const double E = -mag;
                const double ratio = (sf.phi(E, L) + std::abs(sf.dphi_dL(E, L)))
                                   / (std::pow(mag, -hyp.mu) * std::pow(1.0 + std::abs(L), hyp.Lambda));
                const bool edge = mag < E_edge || std::abs(L) > L_edge;
                if (edge) {
                    if (ratio > C_edge) {
                        C_edge = ratio;
                        worst = {E, L};
                    }
                } else {
                    C_core = std::max(C_core, ratio);
                }
            }
        }
        c.value = std::max(C_core, C_edge);
        if (!std::isfinite(C_edge) || C_edge > C_core * (1.0 + 1e-9)) {
            c.status = CheckStatus::Violated;
            c.point = worst;
            c.detail = "ratio keeps growing toward E -> 0- or |L| -> infinity (edge max " + fmt(C_edge)
                     + " vs interior max " + fmt(C_core) + ") with mu = " + fmt(hyp.mu)
                     + ", Lambda = " + fmt(hyp.Lambda);
        } else {
            c.status = CheckStatus::VerifiedOnSamples;
            c.detail = "C = " + fmt(*c.value) + " with mu = " + fmt(hyp.mu) + ", Lambda = " + fmt(hyp.Lambda);
        }
        report.checks.push_back(c);
    }

    // liminf |E|^{-delta} |L|^{-Gamma} phi > 0 as E -> 0-, |L| -> infinity, each side separately
    {
        HypothesisCheck c;
        c.name = "phi_lower_bound";
        if (!hyp.delta || !hyp.Gamma) {
            c.status = CheckStatus::Inconclusive;
            c.detail = "delta and Gamma not declared";
        } else {
            const double delta = *hyp.delta, Gamma = *hyp.Gamma;
            auto side_holds = [&](double sign, std::pair<double, double>& where, double& floor) {
                // minima over nested corners (E -> 0-, |L| -> infinity), one decade deeper each time
                std::vector<double> minima;
                for (int corner = 0; corner < 4; ++corner) {
                    double mn = std::numeric_limits<double>::infinity();
                    for (int k = corner; k < corner + 4; ++k) {
                        for (int j = corner; j < corner + 4; ++j) {
                            const double mag = std::pow(10.0, -1.0 - k);
                            const double L = sign * std::pow(10.0, 1.0 + j);
                            const double ratio =
                                std::pow(mag, -delta) * std::pow(std::abs(L), -Gamma) * sf.phi(-mag, L);
                            if (ratio < mn) {
                                mn = ratio;
                                where = {-mag, L};
                            }
                        }
                    }
                    minima.push_back(mn);
                }
                floor = minima.back();
                return minima.back() > 0.0 && minima.back() >= 0.9 * minima[minima.size() - 2];
            };
            std::pair<double, double> wp, wm;
            double fp = 0, fm = 0;
            const bool plus = side_holds(+1.0, wp, fp);
            const bool minus = side_holds(-1.0, wm, fm);
            c.value = std::max(plus ? fp : 0.0, minus ? fm : 0.0);
            if (plus || minus) {
                c.status = CheckStatus::VerifiedOnSamples;
                c.detail = std::string("holds as ") + (plus && minus ? "L -> +infinity and L -> -infinity"
                                                       : plus       ? "L -> +infinity only"
                                                                    : "L -> -infinity only");
            } else {
                c.status = CheckStatus::Violated;
                c.point = wp;
                c.detail = "ratio decays toward zero on both sides (delta = " + fmt(delta) + ", Gamma = "
                         + fmt(Gamma) + ")";
            }
        }
        report.checks.push_back(c);
    }

    // limits of G
    const auto small_u = geometric(probe.u_small, 1.0, probe.per_decade);
    std::vector<double> small_rev(small_u.rbegin(), small_u.rend());
    const auto large_u = geometric(1.0, probe.u_large, probe.per_decade);
    // a positive slope of log(G/u) against log u means G/u -> 0 as u -> 0
    report.checks.push_back(limit_check(
        "G_limit_zero", "u^{-1} G(u) -> 0 as u -> 0", small_rev,
        [&](double u) { return G_eval(sf, u) / u; }, +1, false, true));
    report.checks.push_back(limit_check(
        "G_limit_infinity", "u^{-1} G(u) -> infinity as u -> infinity", large_u,
        [&](double u) { return G_eval(sf, u) / u; }, +1, false, true));
    report.checks.push_back(limit_check(
        "G_limit_fifth", "u^{-5} G(u) -> 0 as u -> infinity", large_u,
        [&](double u) { return G_eval(sf, u) * std::pow(u, -5.0); }, -1, false, true));

    // -1/2 phi < E dphi/dE <= 1/2 phi at L = 0
    HypothesisCheck case_b;
    case_b.name = "mass_condition_case_b";
    case_b.status = CheckStatus::VerifiedOnSamples;
    {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (double mag : geometric(probe.E_near, probe.E_far, probe.per_decade)) {
            const double E = -mag;
            const double phi = sf.phi(E, 0.0);
            const double q = E * sf.dphi_dE(E, 0.0) / phi;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
            if (!(q > -0.5 && q <= 0.5 + 1e-14)) {
                case_b.status = CheckStatus::Violated;
                case_b.point = std::make_pair(E, 0.0);
                case_b.detail = "E dphi/dE / phi = " + fmt(q) + " outside (-1/2, 1/2] at E = " + fmt(E);
                break;
            }
        }
        if (case_b.status == CheckStatus::VerifiedOnSamples) {
            case_b.detail = "E dphi/dE / phi in [" + fmt(lo) + ", " + fmt(hi) + "]";
        }
    }
    report.checks.push_back(case_b);

    // monotone mass: case (a) power law, or case (b)
    {
        HypothesisCheck c;
        c.name = "mass_condition";
        c.seeding_critical = true;
        if (sf.family() == Family::Polytrope) {
            if (sf.mass_degenerate()) {
                c.status = CheckStatus::Violated;
                c.point = std::make_pair(sf.nu(), 0.0);
                c.detail = "nu = 3/2 is excluded: M(a) is constant, so M'(a) = 0";
            } else {
                c.status = CheckStatus::VerifiedOnSamples;
                c.detail = "case (a): phi(E,0) = (-E)^nu with nu = " + fmt(sf.nu()) + " in (-1/2, 7/2), nu != 3/2";
            }
        } else if (case_b.status == CheckStatus::VerifiedOnSamples) {
            c.status = CheckStatus::VerifiedOnSamples;
            c.detail = "case (b) inequality holds on samples";
        } else {
            c.status = CheckStatus::Inconclusive;
            c.detail = "neither case (a) nor case (b) applies on samples; M'(a) must be checked on the mass curve";
        }
        report.checks.push_back(c);
    }

    // G < u G' <= 2G
    {
        HypothesisCheck c;
        c.name = "G_mass_inequality";
        c.status = CheckStatus::VerifiedOnSamples;
        c.detail = "G(u) < u G'(u) <= 2 G(u) on samples";
        std::vector<double> us = small_u;
        us.insert(us.end(), large_u.begin() + 1, large_u.end());
        for (double u : us) {
            const WValue v = w_eval(sf, 0.0, 0.0, u);
            const double q = u * v.dw_du / v.w;
            if (!(q > 1.0 && q <= 2.0 + 1e-12)) {
                c.status = CheckStatus::Inconclusive;
                c.point = std::make_pair(u, 0.0);
                c.detail = "u G'/G = " + fmt(q) + " outside (1, 2] at u = " + fmt(u)
                         + " (sufficient condition only)";
                break;
            }
        }
        report.checks.push_back(c);
    }

    // Lambda range of the speed alternative
    {
        HypothesisCheck c;
        c.name = "Lambda_below_4";
        c.value = hyp.Lambda;
        c.status = hyp.Lambda < 4.0 ? CheckStatus::VerifiedOnSamples : CheckStatus::Inconclusive;
        c.detail = "Lambda = " + fmt(hyp.Lambda) + (hyp.Lambda < 4.0 ? " < 4" : " >= 4");
        report.checks.push_back(c);
    }
    return report;
}

nlohmann::json to_json(const HypothesisReport& report)
{
    nlohmann::json j;
    j["structure_function"] = report.sf_id;
    j["all_verified"] = report.all_verified();
    j["seeding_blocked"] = report.seeding_blocked();
    auto& arr = j["checks"] = nlohmann::json::array();
    for (const auto& c : report.checks) {
        nlohmann::json cj{{"name", c.name}, {"status", to_string(c.status)}, {"detail", c.detail},
                          {"seeding_critical", c.seeding_critical}};
        if (c.point) cj["point"] = {c.point->first, c.point->second};
        if (c.value) cj["value"] = *c.value;
        arr.push_back(cj);
    }
    return j;
}

GrowthProbe growth_probe(const StructureFunction& sf, double kappa, double r, const std::vector<double>& u_grid)
{
    std::vector<double> lx, ly;
    for (double u : u_grid) {
        lx.push_back(std::log(u));
        ly.push_back(std::log(w_eval(sf, kappa, r, u).w));
    }
    GrowthProbe g;
    g.slope = ls_slope(lx, ly);
    g.hypothesis_bound = 1.0 + sf.hypothesis().Lambda / 2.0;
    if (sf.has_closed_form()) {
        const double nu_max = std::max(sf.nu(), sf.nu2());
        int m_max = 0;
        if (kappa * r != 0.0) {
            for (std::size_t k = 0; k < sf.p().size(); k += 2)
                if (sf.p()[k] != 0.0) m_max = static_cast<int>(k / 2);
        }
        g.closed_form_exponent = nu_max + m_max + 1.5;
    }
    return g;
}

}  // namespace vps
