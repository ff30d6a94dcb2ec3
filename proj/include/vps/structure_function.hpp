#pragma once

// Microscopic density functions phi(E, L) and the reduced velocity integral
//
//   w(kappa, r, u) = 2 pi  int_{-u}^{0} int_{-S}^{S} phi(E, kappa r s) ds dE,   S = sqrt(2 (E + u)),
//
// which turns the steady Vlasov-Poisson problem into rho = w(kappa, r, U + alpha).

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace vps {

enum class Family { Polytrope, TwoPowerPolytrope, SincShifted, Custom };

std::string to_string(Family family);

/// Parameters of the growth/decay hypotheses that are declared rather than derived.
/// delta and Gamma are optional: probes that need them are skipped when absent.
struct HypothesisParams {
    double mu = 0.0;       ///< upper-bound singularity exponent, in [0, 1/2)
    double Lambda = 2.0;   ///< upper-bound growth exponent in L, > 0
    std::optional<double> delta;
    std::optional<double> Gamma;
    double B = 1.0;        ///< energy window -B < E < 0 for the upper bound
};

/// User-supplied phi with its partial derivatives. Used as-is by the quadrature path.
struct CustomPhi {
    std::function<double(double, double)> phi;
    std::function<double(double, double)> dphi_dE;
    std::function<double(double, double)> dphi_dL;
    std::string name = "custom";
};

/// Tolerances of the iterated adaptive Gauss-Kronrod rules used for non-closed-form w.
struct QuadratureOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-11;
    unsigned max_depth = 40;
};

/// A phi(E, L) family. Separable families are g(E) * p(L) with p a polynomial given by its
/// coefficients c0, c1, ... in increasing degree.
class StructureFunction {
public:
    static StructureFunction polytrope(double nu, std::vector<double> p, HypothesisParams hyp = {});
    static StructureFunction two_power_polytrope(double nu1, double nu2, std::vector<double> p,
                                                 HypothesisParams hyp = {});
    static StructureFunction sinc_shifted(double A, std::vector<double> p, HypothesisParams hyp = {});
    static StructureFunction custom(CustomPhi phi, HypothesisParams hyp = {});

    /// phi = (-E)_+^{1/2} (C1 + C2 L^2) with C1, C2 chosen so that w = u^2 + kappa^2 r^2 u^3.
    static StructureFunction special_example();
    static constexpr double special_C1 = 0.14328979206268906572;  // sqrt(2)/pi^2
    static constexpr double special_C2 = 0.42986937618806719715;  // 3 sqrt(2)/pi^2

    Family family() const { return family_; }
    bool separable() const { return family_ != Family::Custom; }
    bool has_closed_form() const
    {
        return family_ == Family::Polytrope || family_ == Family::TwoPowerPolytrope;
    }

    double nu() const { return nu1_; }
    double nu2() const { return nu2_; }
    double A() const { return A_; }
    const std::vector<double>& p() const { return p_; }
    const HypothesisParams& hypothesis() const { return hyp_; }
    HypothesisParams& hypothesis() { return hyp_; }
    const CustomPhi* custom_phi() const { return custom_ ? &*custom_ : nullptr; }

    /// Polytrope with nu = 3/2 has M'(a) = 0; allowed for radial experiments, rejected as a seed.
    bool mass_degenerate() const;

    QuadratureOptions quadrature;

    /// Short identifier used to tag radial profiles and checkpoints.
    std::string id() const;

    double phi(double E, double L) const;
    double dphi_dE(double E, double L) const;
    double dphi_dL(double E, double L) const;

    /// Energy factor g(E) of a separable family (zero for E >= 0) and its derivative.
    double energy_factor(double E) const;
    double energy_factor_derivative(double E) const;
    double p_eval(double L) const;
    double p_derivative(double L) const;

private:
    StructureFunction() = default;
    void validate() const;
    void prepare();

    friend struct ClosedFormAccess;

    Family family_ = Family::Polytrope;
    double nu1_ = 0.5;
    double nu2_ = 0.5;
    double A_ = 0.0;
    std::vector<double> p_{1.0};
    HypothesisParams hyp_;
    std::optional<CustomPhi> custom_;
    // Beta(nu_k + 1, m + 3/2) for each even power 2m of p and each energy exponent k
    std::vector<std::array<double, 2>> beta_cache_;
};

enum class WMethod { ClosedForm, Quadrature };

/// w and its partial derivatives at one (kappa, r, u).
struct WValue {
    double w = 0.0;
    double dw_du = 0.0;
    double dw_dr = 0.0;
    double dw_dkappa = 0.0;
    WMethod method = WMethod::ClosedForm;
};

double phi_eval(const StructureFunction& sf, double E, double L);

/// Throws DomainError for r < 0 and QuadratureFailure when the adaptive rule cannot converge.
WValue w_eval(const StructureFunction& sf, double kappa, double r, double u);
double w_du(const StructureFunction& sf, double kappa, double r, double u);
double w_dr(const StructureFunction& sf, double kappa, double r, double u);
double w_dkappa(const StructureFunction& sf, double kappa, double r, double u);

/// Quadrature route of w for any family, bypassing closed forms. Used as an oracle
/// for the closed forms and by Custom structure functions.
WValue w_quadrature(const StructureFunction& sf, double kappa, double r, double u);

/// Spherical kernel G(u) = w(0, r, u) and its derivative.
double G_eval(const StructureFunction& sf, double u);
double G_prime(const StructureFunction& sf, double u);

/// Solves G(u) = rho_center for u > 0 by bracketing + safeguarded Newton.
/// Throws InversionFailure when no bracket exists below u_max.
double G_inverse(const StructureFunction& sf, double rho_center, double u_max = 1e8);

/// Log-gamma based Beta function.
double beta_fn(double a, double b);

// JSON: {"family": "...", "nu": ..., "p": [...], "hypothesis": {...}}.
// Custom families cannot be serialized.
nlohmann::json to_json(const StructureFunction& sf);
StructureFunction structure_function_from_json(const nlohmann::json& j);

}  // namespace vps
