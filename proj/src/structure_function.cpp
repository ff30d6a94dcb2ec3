#include "vps/structure_function.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "quadrature.hpp"
#include "vps/errors.hpp"

namespace vps {

namespace {

constexpr double pi = std::numbers::pi;
// -min_x sin(x)/x, attained near x = 4.4934
constexpr double sinc_min_magnitude = 0.21723362821122166;

std::string fmt17(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// 2 pi * int_{-S}^{S} s^{2m} ds / S^{2m+1} * 2^{m+1/2}: prefactor of J_m in w.
double velocity_prefactor(int m)
{
    return std::pow(2.0, m + 2.5) * pi / (2.0 * m + 1.0);
}

/// (kappa r)^{2m} from kr2 = (kappa r)^2 by repeated multiplication (exactly even in kappa).
double ipow(double x, int n)
{
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

}  // namespace

std::string to_string(Family family)
{
    switch (family) {
    case Family::Polytrope: return "polytrope";
    case Family::TwoPowerPolytrope: return "two_power_polytrope";
    case Family::SincShifted: return "sinc_shifted";
    case Family::Custom: return "custom";
    }
    return "unknown";
}

double beta_fn(double a, double b)
{
    return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

StructureFunction StructureFunction::polytrope(double nu, std::vector<double> p, HypothesisParams hyp)
{
    StructureFunction sf;
    sf.family_ = Family::Polytrope;
    sf.nu1_ = nu;
    sf.nu2_ = nu;
    sf.p_ = std::move(p);
    sf.hyp_ = hyp;
    sf.validate();
    sf.prepare();
    return sf;
}

StructureFunction StructureFunction::two_power_polytrope(double nu1, double nu2, std::vector<double> p,
                                                         HypothesisParams hyp)
{
    StructureFunction sf;
    sf.family_ = Family::TwoPowerPolytrope;
    sf.nu1_ = nu1;
    sf.nu2_ = nu2;
    sf.p_ = std::move(p);
    sf.hyp_ = hyp;
    sf.validate();
    sf.prepare();
    return sf;
}

StructureFunction StructureFunction::sinc_shifted(double A, std::vector<double> p, HypothesisParams hyp)
{
    StructureFunction sf;
    sf.family_ = Family::SincShifted;
    sf.A_ = A;
    sf.p_ = std::move(p);
    sf.hyp_ = hyp;
    sf.validate();
    sf.prepare();
    return sf;
}

StructureFunction StructureFunction::custom(CustomPhi phi, HypothesisParams hyp)
{
    StructureFunction sf;
    sf.family_ = Family::Custom;
    sf.custom_ = std::move(phi);
    sf.hyp_ = hyp;
    sf.validate();
    sf.prepare();
    return sf;
}

StructureFunction StructureFunction::special_example()
{
    HypothesisParams hyp;
    hyp.mu = 0.0;
    hyp.Lambda = 2.0;
    return polytrope(0.5, {special_C1, 0.0, special_C2}, hyp);
}

void StructureFunction::validate() const
{
    auto check_nu = [](double nu) {
        if (!(nu > -0.5 && nu < 3.5)) {
            throw DomainError("polytrope exponent nu = " + fmt17(nu) + " outside (-1/2, 7/2)");
        }
    };
    switch (family_) {
    case Family::Polytrope: check_nu(nu1_); break;
    case Family::TwoPowerPolytrope:
        check_nu(nu1_);
        check_nu(nu2_);
        break;
    case Family::SincShifted:
        if (!(A_ > sinc_min_magnitude)) {
            throw DomainError("sinc_shifted requires A > " + fmt17(sinc_min_magnitude)
                              + " for phi > 0, got A = " + fmt17(A_));
        }
        break;
    case Family::Custom:
        if (!custom_ || !custom_->phi || !custom_->dphi_dE || !custom_->dphi_dL) {
            throw DomainError("custom structure function needs phi, dphi_dE and dphi_dL");
        }
        break;
    }
    if (separable()) {
        if (p_.empty()) throw DomainError("polynomial p(L) has no coefficients");
        for (int k = -400; k <= 400; ++k) {
            const double L = std::copysign(std::pow(10.0, std::abs(k) / 100.0) - 1.0, k);
            if (!(p_eval(L) > 0.0)) {
                throw DomainError("polynomial p(L) is not positive at L = " + fmt17(L));
            }
        }
    }
    if (!(hyp_.mu >= 0.0 && hyp_.mu < 0.5)) throw DomainError("hypothesis mu must lie in [0, 1/2)");
    if (!(hyp_.Lambda > 0.0)) throw DomainError("hypothesis Lambda must be positive");
    if (!(hyp_.B > 0.0)) throw DomainError("hypothesis B must be positive");
    if (hyp_.delta && !(*hyp_.delta > 0.0)) throw DomainError("hypothesis delta must be positive");
    if (hyp_.Gamma && !(*hyp_.Gamma > 0.0)) throw DomainError("hypothesis Gamma must be positive");
}

void StructureFunction::prepare()
{
    beta_cache_.clear();
    if (!has_closed_form()) return;
    for (std::size_t k = 0; k < p_.size(); k += 2) {
        const double m = static_cast<double>(k / 2);
        beta_cache_.push_back({beta_fn(nu1_ + 1.0, m + 1.5), beta_fn(nu2_ + 1.0, m + 1.5)});
    }
}

struct ClosedFormAccess {
    static double beta(const StructureFunction& sf, int m, int k) { return sf.beta_cache_[m][k]; }
};

bool StructureFunction::mass_degenerate() const
{
    return family_ == Family::Polytrope && nu1_ == 1.5;
}

std::string StructureFunction::id() const
{
    std::ostringstream os;
    os << to_string(family_) << '(';
    switch (family_) {
    case Family::Polytrope: os << "nu=" << fmt17(nu1_); break;
    case Family::TwoPowerPolytrope: os << "nu1=" << fmt17(nu1_) << ",nu2=" << fmt17(nu2_); break;
    case Family::SincShifted: os << "A=" << fmt17(A_); break;
    case Family::Custom: os << custom_->name; break;
    }
    if (separable()) {
        os << ",p=[";
        for (std::size_t k = 0; k < p_.size(); ++k) os << (k ? "," : "") << fmt17(p_[k]);
        os << ']';
    }
    os << ')';
    return os.str();
}

double StructureFunction::p_eval(double L) const
{
    double acc = 0.0;
    for (auto it = p_.rbegin(); it != p_.rend(); ++it) acc = acc * L + *it;
    return acc;
}

double StructureFunction::p_derivative(double L) const
{
    double acc = 0.0;
    for (std::size_t k = p_.size(); k-- > 1;) acc = acc * L + static_cast<double>(k) * p_[k];
    return acc;
}

double StructureFunction::energy_factor(double E) const
{
    if (E >= 0.0) return 0.0;
    switch (family_) {
    case Family::Polytrope: return std::pow(-E, nu1_);
    case Family::TwoPowerPolytrope: return std::pow(-E, nu1_) + std::pow(-E, nu2_);
    case Family::SincShifted: return A_ + std::sin(E) / E;
    case Family::Custom: break;
    }
    throw DomainError("energy_factor is only defined for separable families");
}

double StructureFunction::energy_factor_derivative(double E) const
{
    if (E >= 0.0) return 0.0;
    switch (family_) {
    case Family::Polytrope: return -nu1_ * std::pow(-E, nu1_ - 1.0);
    case Family::TwoPowerPolytrope:
        return -nu1_ * std::pow(-E, nu1_ - 1.0) - nu2_ * std::pow(-E, nu2_ - 1.0);
    case Family::SincShifted: return (E * std::cos(E) - std::sin(E)) / (E * E);
    case Family::Custom: break;
    }
    throw DomainError("energy_factor_derivative is only defined for separable families");
}

double StructureFunction::phi(double E, double L) const
{
    if (!(E < 0.0)) return 0.0;
    if (custom_) return custom_->phi(E, L);
    return energy_factor(E) * p_eval(L);
}

double StructureFunction::dphi_dE(double E, double L) const
{
    if (!(E < 0.0)) return 0.0;
    if (custom_) return custom_->dphi_dE(E, L);
    return energy_factor_derivative(E) * p_eval(L);
}

double StructureFunction::dphi_dL(double E, double L) const
{
    if (!(E < 0.0)) return 0.0;
    if (custom_) return custom_->dphi_dL(E, L);
    return energy_factor(E) * p_derivative(L);
}

double phi_eval(const StructureFunction& sf, double E, double L) { return sf.phi(E, L); }

namespace {

// J_m(u) = int_{-u}^0 g(E) (E+u)^{m+1/2} dE and its u-derivative for a separable family.
struct EnergyMoment {
    double J = 0.0;
    double dJ = 0.0;
};

// int_{-u}^0 (A + sin E / E) (E+u)^q dE for large u: the constant part in closed form, the
// oscillating part period by period so that no single adaptive run sees u / pi oscillations.
double sinc_moment(const StructureFunction& sf, double q, double u)
{
    const double A = sf.A();
    const QuadratureOptions& opt = sf.quadrature;
    auto sinc = [](double E) { return E == 0.0 ? 1.0 : std::sin(E) / E; };
    double sum = 0.0;
    // first period: E + u = pi t^2 absorbs the (E+u)^q endpoint behaviour
    {
        QuadratureOptions o = opt;
        o.abs_tol = opt.rel_tol * A * std::pow(M_PI, q + 1.0) / (q + 1.0);
        sum += detail::adaptive_gk(
            [&](double t) { return sinc(-u + M_PI * t * t) * 2.0 * std::pow(M_PI, q + 1.0) * std::pow(t, 2.0 * q + 1.0); },
            0.0, 1.0, o, "sinc moment");
    }
    const double width = 8.0 * M_PI;
    for (double lo = -u + M_PI; lo < 0.0; lo += width) {
        const double hi = std::min(lo + width, 0.0);
        QuadratureOptions o = opt;
        o.abs_tol = opt.rel_tol * A * (std::pow(hi + u, q + 1.0) - std::pow(lo + u, q + 1.0)) / (q + 1.0);
        sum += detail::adaptive_gk([&](double E) { return sinc(E) * std::pow(E + u, q); }, lo, hi, o, "sinc moment");
    }
    return A * std::pow(u, q + 1.0) / (q + 1.0) + sum;
}

EnergyMoment energy_moment(const StructureFunction& sf, int m, double u)
{
    EnergyMoment out;
    if (sf.has_closed_form()) {
        const int count = sf.family() == Family::TwoPowerPolytrope ? 2 : 1;
        const double nus[2] = {sf.nu(), sf.nu2()};
        for (int k = 0; k < count; ++k) {
            const double nu = nus[k];
            const double b = ClosedFormAccess::beta(sf, m, k);
            const double expo = nu + m + 1.5;
            out.J += b * std::pow(u, expo);
            out.dJ += expo * b * std::pow(u, expo - 1.0);
        }
        return out;
    }
    if (sf.family() == Family::SincShifted && u > 64.0) {
        out.J = sinc_moment(sf, m + 0.5, u);
        out.dJ = (m + 0.5) * sinc_moment(sf, m - 0.5, u);
        return out;
    }
    // E + u = u sigma^2 removes the (E+u)^{m-1/2} endpoint behaviour.
    auto g = [&](double sigma) { return sf.energy_factor(u * (sigma * sigma - 1.0)); };
    const double I_hi = detail::adaptive_gk(
        [&](double s) { return g(s) * ipow(s, 2 * m + 2); }, 0.0, 1.0, sf.quadrature, "J_m(u)");
    const double I_lo = detail::adaptive_gk(
        [&](double s) { return g(s) * ipow(s, 2 * m); }, 0.0, 1.0, sf.quadrature, "dJ_m/du");
    out.J = 2.0 * std::pow(u, m + 1.5) * I_hi;
    out.dJ = (2.0 * m + 1.0) * std::pow(u, m + 0.5) * I_lo;
    return out;
}

WValue w_separable(const StructureFunction& sf, double kappa, double r, double u)
{
    WValue out;
    out.method = sf.has_closed_form() ? WMethod::ClosedForm : WMethod::Quadrature;
    if (!(u > 0.0)) return out;
    const double kr2 = (kappa * r) * (kappa * r);
    const auto& p = sf.p();
    for (std::size_t k = 0; k < p.size(); k += 2) {
        const double c = p[k];
        if (c == 0.0) continue;
        const int m = static_cast<int>(k / 2);
        if (m > 0 && kr2 == 0.0) continue;
        const EnergyMoment mom = energy_moment(sf, m, u);
        const double pref = c * velocity_prefactor(m);
        const double km = ipow(kr2, m);
        out.w += pref * km * mom.J;
        out.dw_du += pref * km * mom.dJ;
        if (m > 0) {
            const double km1 = ipow(kr2, m - 1);
            out.dw_dr += pref * 2.0 * m * kappa * kappa * r * km1 * mom.J;
            out.dw_dkappa += pref * 2.0 * m * kappa * r * r * km1 * mom.J;
        }
    }
    return out;
}

}  // namespace

WValue w_quadrature(const StructureFunction& sf, double kappa, double r, double u)
{
    if (r < 0.0) throw DomainError("w requires r >= 0");
    WValue out;
    out.method = WMethod::Quadrature;
    if (!(u > 0.0)) return out;
    const auto& q = sf.quadrature;
    const double kr = kappa * r;

    // w: E = -u t, then s = S sigma on the symmetric s-interval.
    auto S_of = [u](double t) { return std::sqrt(2.0 * u * (1.0 - t)); };
    if (kr == 0.0) {
        out.w = 2.0 * pi * u
              * detail::adaptive_gk([&](double t) { return 2.0 * S_of(t) * sf.phi(-u * t, 0.0); }, 0.0,
                                    1.0, q, "w (kappa r = 0)");
    } else {
        out.w = 2.0 * pi * u * detail::adaptive_gk(
                    [&](double t) {
                        const double E = -u * t;
                        const double S = S_of(t);
                        return S * detail::adaptive_gk(
                                       [&](double sg) {
                                           return sf.phi(E, kr * S * sg) + sf.phi(E, -kr * S * sg);
                                       },
                                       0.0, 1.0, q, "w inner");
                    },
                    0.0, 1.0, q, "w outer");
    }

    // dw/du: E + u = u sigma^2.
    const double root2u = std::sqrt(2.0 * u);
    out.dw_du = pi * std::sqrt(2.0) * 2.0 * std::sqrt(u)
              * detail::adaptive_gk(
                    [&](double sg) {
                        const double E = u * (sg * sg - 1.0);
                        return sf.phi(E, kr * root2u * sg) + sf.phi(E, -kr * root2u * sg);
                    },
                    0.0, 1.0, q, "dw/du");

    // int int dphi/dL(E, kappa r s) s ds dE, shared by dw/dr and dw/dkappa; zero when kappa r = 0.
    if (kr != 0.0) {
        const double I = u * detail::adaptive_gk(
                             [&](double t) {
                                 const double E = -u * t;
                                 const double S = S_of(t);
                                 return S * S * detail::adaptive_gk(
                                                    [&](double sg) {
                                                        return (sf.dphi_dL(E, kr * S * sg)
                                                                - sf.dphi_dL(E, -kr * S * sg))
                                                             * sg;
                                                    },
                                                    0.0, 1.0, q, "dphi/dL inner");
                             },
                             0.0, 1.0, q, "dphi/dL outer");
        out.dw_dkappa = 2.0 * pi * r * I;
        out.dw_dr = 2.0 * pi * kappa * I;
    }
    return out;
}

WValue w_eval(const StructureFunction& sf, double kappa, double r, double u)
{
    if (r < 0.0) throw DomainError("w requires r >= 0");
    if (sf.separable()) return w_separable(sf, kappa, r, u);
    return w_quadrature(sf, kappa, r, u);
}

double w_du(const StructureFunction& sf, double kappa, double r, double u)
{
    return w_eval(sf, kappa, r, u).dw_du;
}

double w_dr(const StructureFunction& sf, double kappa, double r, double u)
{
    return w_eval(sf, kappa, r, u).dw_dr;
}

double w_dkappa(const StructureFunction& sf, double kappa, double r, double u)
{
    return w_eval(sf, kappa, r, u).dw_dkappa;
}

double G_eval(const StructureFunction& sf, double u) { return w_eval(sf, 0.0, 0.0, u).w; }

double G_prime(const StructureFunction& sf, double u) { return w_eval(sf, 0.0, 0.0, u).dw_du; }

double G_inverse(const StructureFunction& sf, double rho_center, double u_max)
{
    if (!(rho_center > 0.0)) throw InversionFailure("G_inverse needs a positive center density");
    double lo = 0.0;
    double hi = 1.0;
    while (G_eval(sf, hi) < rho_center) {
        lo = hi;
        hi *= 2.0;
        if (hi > u_max) {
            throw InversionFailure("no bracket for G(u) = " + fmt17(rho_center) + " below u_max = "
                                   + fmt17(u_max));
        }
    }
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const WValue v = w_eval(sf, 0.0, 0.0, x);
        const double f = v.w - rho_center;
        if (std::abs(f) <= 1e-15 * rho_center) return x;
        if (f > 0.0) hi = x;
        else lo = x;
        double next = v.dw_du > 0.0 ? x - f / v.dw_du : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) return next;
        x = next;
    }
    return x;
}

nlohmann::json to_json(const StructureFunction& sf)
{
    nlohmann::json j;
    j["family"] = to_string(sf.family());
    switch (sf.family()) {
    case Family::Polytrope: j["nu"] = sf.nu(); break;
    case Family::TwoPowerPolytrope:
        j["nu1"] = sf.nu();
        j["nu2"] = sf.nu2();
        break;
    case Family::SincShifted: j["A"] = sf.A(); break;
    case Family::Custom: throw FormatError("custom structure functions cannot be serialized");
    }
    j["p"] = sf.p();
    const auto& h = sf.hypothesis();
    nlohmann::json hj{{"mu", h.mu}, {"Lambda", h.Lambda}, {"B", h.B}};
    if (h.delta) hj["delta"] = *h.delta;
    if (h.Gamma) hj["Gamma"] = *h.Gamma;
    j["hypothesis"] = hj;
    return j;
}

StructureFunction structure_function_from_json(const nlohmann::json& j)
{
    std::vector<std::string> problems;
    if (!j.is_object()) throw ConfigError("structure_function: expected a JSON object");
    auto number = [&](const nlohmann::json& obj, const std::string& key, const std::string& path,
                      std::optional<double> fallback) -> double {
        if (!obj.contains(key)) {
            if (fallback) return *fallback;
            problems.push_back(path + key + ": missing");
            return 0.0;
        }
        if (!obj.at(key).is_number()) {
            problems.push_back(path + key + ": expected a number");
            return 0.0;
        }
        return obj.at(key).get<double>();
    };

    std::string family = "polytrope";
    if (!j.contains("family") || !j.at("family").is_string()) {
        problems.push_back("structure_function.family: missing or not a string");
    } else {
        family = j.at("family").get<std::string>();
    }
    static const std::vector<std::string> families{"polytrope", "two_power_polytrope", "sinc_shifted",
                                                   "special_example"};
    if (std::find(families.begin(), families.end(), family) == families.end()) {
        problems.push_back("structure_function.family: unknown family '" + family + "'");
    }
    std::vector<std::string> allowed{"family", "p", "hypothesis"};
    if (family == "polytrope") allowed.push_back("nu");
    if (family == "two_power_polytrope") {
        allowed.push_back("nu1");
        allowed.push_back("nu2");
    }
    if (family == "sinc_shifted") allowed.push_back("A");
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            problems.push_back("structure_function." + item.key() + ": unknown key");
        }
    }

    std::vector<double> p{1.0};
    if (j.contains("p")) {
        const auto& pj = j.at("p");
        if (!pj.is_array() || pj.empty()
            || !std::all_of(pj.begin(), pj.end(), [](const auto& x) { return x.is_number(); })) {
            problems.push_back("structure_function.p: expected a non-empty array of numbers");
        } else {
            p = pj.get<std::vector<double>>();
        }
    }

    HypothesisParams hyp;
    if (j.contains("hypothesis")) {
        const auto& hj = j.at("hypothesis");
        if (!hj.is_object()) {
            problems.push_back("structure_function.hypothesis: expected an object");
        } else {
            for (const auto& item : hj.items()) {
                static const std::vector<std::string> keys{"mu", "Lambda", "delta", "Gamma", "B"};
                if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) {
                    problems.push_back("structure_function.hypothesis." + item.key() + ": unknown key");
                }
            }
            const std::string path = "structure_function.hypothesis.";
            hyp.mu = number(hj, "mu", path, hyp.mu);
            hyp.Lambda = number(hj, "Lambda", path, hyp.Lambda);
            hyp.B = number(hj, "B", path, hyp.B);
            if (hj.contains("delta")) hyp.delta = number(hj, "delta", path, std::nullopt);
            if (hj.contains("Gamma")) hyp.Gamma = number(hj, "Gamma", path, std::nullopt);
        }
    }

    const std::string path = "structure_function.";
    double nu = 0.0, nu2 = 0.0, A = 0.0;
    if (family == "polytrope") nu = number(j, "nu", path, std::nullopt);
    if (family == "two_power_polytrope") {
        nu = number(j, "nu1", path, std::nullopt);
        nu2 = number(j, "nu2", path, std::nullopt);
    }
    if (family == "sinc_shifted") A = number(j, "A", path, std::nullopt);

    if (!problems.empty()) {
        std::string msg = "invalid structure function:";
        for (const auto& p_ : problems) msg += "\n  " + p_;
        throw ConfigError(msg);
    }
    try {
        if (family == "special_example") {
            auto sf = StructureFunction::special_example();
            if (j.contains("hypothesis")) sf = StructureFunction::polytrope(0.5, sf.p(), hyp);
            return sf;
        }
        if (family == "polytrope") return StructureFunction::polytrope(nu, p, hyp);
        if (family == "two_power_polytrope") return StructureFunction::two_power_polytrope(nu, nu2, p, hyp);
        return StructureFunction::sinc_shifted(A, p, hyp);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid structure function: ") + e.what());
    }
}

}  // namespace vps
