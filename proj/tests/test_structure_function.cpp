#include <gtest/gtest.h>

#include <cmath>

#include "vps/errors.hpp"
#include "vps/hypothesis.hpp"
#include "vps/structure_function.hpp"

using namespace vps;

namespace {

StructureFunction special()
{
    return StructureFunction::special_example();
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace

TEST(Phi, PolytropeValues)
{
    const auto sf = StructureFunction::polytrope(0.5, {1.0});
    EXPECT_DOUBLE_EQ(phi_eval(sf, -1.0, 7.0), 1.0);
    EXPECT_EQ(phi_eval(sf, 0.5, 0.0), 0.0);
    const auto sf2 = StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0});
    EXPECT_DOUBLE_EQ(phi_eval(sf2, -4.0, 2.0), 10.0);
}

TEST(Phi, ZeroForPositiveEnergyPositiveBelow)
{
    for (const auto& sf : {special(), StructureFunction::polytrope(0.0, {1.0}),
                           StructureFunction::two_power_polytrope(0.5, 2.0, {1.0, 0.0, 2.0}),
                           StructureFunction::sinc_shifted(10.0, {1.0})}) {
        for (double L : {-5.0, 0.0, 3.0}) {
            EXPECT_EQ(phi_eval(sf, 0.5, L), 0.0);
            EXPECT_EQ(phi_eval(sf, 1e-9, L), 0.0);
            EXPECT_GT(phi_eval(sf, -0.3, L), 0.0);
            EXPECT_GT(phi_eval(sf, -30.0, L), 0.0);
        }
    }
}

TEST(Phi, ConstructionRejectsOutOfRange)
{
    EXPECT_THROW(StructureFunction::polytrope(3.6, {1.0}), DomainError);
    EXPECT_THROW(StructureFunction::polytrope(-0.5, {1.0}), DomainError);
    EXPECT_THROW(StructureFunction::polytrope(0.5, {-1.0}), DomainError);
    EXPECT_NO_THROW(StructureFunction::polytrope(1.5, {1.0}));
    EXPECT_TRUE(StructureFunction::polytrope(1.5, {1.0}).mass_degenerate());
    EXPECT_FALSE(special().mass_degenerate());
}

TEST(WEval, SpecialExampleIdentity)
{
    const auto sf = special();
    for (double kappa : {0.0, 0.3, -1.7, 4.0}) {
        for (double r : {0.0, 0.25, 1.1}) {
            for (double u : {0.01, 0.5, 2.0}) {
                const WValue v = w_eval(sf, kappa, r, u);
                const double k2r2 = kappa * kappa * r * r;
                EXPECT_LT(rel(v.w, u * u + k2r2 * u * u * u), 1e-14);
                EXPECT_LT(std::abs(v.dw_du - (2.0 * u + 3.0 * k2r2 * u * u)), 1e-13 * (1.0 + v.dw_du));
                EXPECT_LT(std::abs(v.dw_dr - 2.0 * kappa * kappa * r * u * u * u), 1e-13 * (1.0 + std::abs(v.dw_dr)));
                EXPECT_LT(std::abs(v.dw_dkappa - 2.0 * kappa * r * r * u * u * u),
                          1e-13 * (1.0 + std::abs(v.dw_dkappa)));
                EXPECT_EQ(v.method, WMethod::ClosedForm);
                const WValue q = w_quadrature(sf, kappa, r, u);
                EXPECT_LT(rel(q.w, v.w), 1e-8);
            }
        }
    }
}

TEST(WEval, VanishesForNonpositiveU)
{
    for (const auto& sf : {special(), StructureFunction::sinc_shifted(10.0, {1.0, 0.0, 1.0})}) {
        const WValue v = w_eval(sf, 3.0, 1.0, -0.2);
        EXPECT_EQ(v.w, 0.0);
        EXPECT_EQ(v.dw_du, 0.0);
        EXPECT_EQ(v.dw_dr, 0.0);
        EXPECT_EQ(v.dw_dkappa, 0.0);
        EXPECT_EQ(w_du(sf, 1.0, 0.5, 0.0), 0.0);
    }
}

TEST(WEval, RejectsNegativeRadius)
{
    EXPECT_THROW(w_eval(special(), 1.0, -0.1, 1.0), DomainError);
}

TEST(WEval, CustomMatchesClosedForm)
{
    const auto poly = StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0});
    CustomPhi c;
    c.phi = [poly](double E, double L) { return poly.phi(E, L); };
    c.dphi_dE = [poly](double E, double L) { return poly.dphi_dE(E, L); };
    c.dphi_dL = [poly](double E, double L) { return poly.dphi_dL(E, L); };
    const auto custom = StructureFunction::custom(c);
    const WValue q = w_eval(custom, 2.0, 0.7, 0.3);
    EXPECT_EQ(q.method, WMethod::Quadrature);
    EXPECT_LT(rel(q.w, w_eval(poly, 2.0, 0.7, 0.3).w), 1e-8);
}

TEST(WEval, PolytropeQuadratureLattice)
{
    const std::vector<double> ks{-2.0, -0.5, 0.0, 0.7, 1.5}, rs{0.0, 0.1, 0.4, 0.9, 1.6}, us{0.05, 0.3, 0.8, 1.5, 3.0};
    for (double nu : {0.0, 0.5, 1.0, 2.0}) {
        const auto sf = StructureFunction::polytrope(nu, {1.0, 0.3, 0.5, 0.1, 0.2});
        double worst = 0.0;
        for (double k : ks)
            for (double r : rs)
                for (double u : us) worst = std::max(worst, rel(w_quadrature(sf, k, r, u).w, w_eval(sf, k, r, u).w));
        EXPECT_LT(worst, 1e-8) << "nu = " << nu;
    }
}

TEST(WEval, KappaSymmetry)
{
    const auto closed = StructureFunction::polytrope(1.0, {1.0, 0.5, 0.25});
    const auto sinc = StructureFunction::sinc_shifted(10.0, {1.0, 0.5, 0.25});
    for (double k : {0.3, 1.2}) {
        for (double r : {0.2, 0.9}) {
            for (double u : {0.1, 1.3}) {
                EXPECT_EQ(w_eval(closed, k, r, u).w, w_eval(closed, -k, r, u).w);
                EXPECT_LT(rel(w_eval(sinc, k, r, u).w, w_eval(sinc, -k, r, u).w), 1e-9);
            }
        }
    }
}

TEST(WEval, MonotoneInU)
{
    const auto sf = StructureFunction::two_power_polytrope(0.5, 2.0, {1.0, 0.0, 1.0});
    for (double u : {1e-4, 0.01, 0.3, 2.0, 10.0}) EXPECT_GT(w_du(sf, 0.8, 0.6, u), 0.0);
}

TEST(WEval, DerivativesMatchCentralDifferences)
{
    const auto sf = StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0});
    const double k = 1.5, r = 0.4, u = 0.6;
    const WValue v = w_eval(sf, k, r, u);
    for (double h : {1e-3, 5e-4}) {
        const double fd_du = (w_eval(sf, k, r, u + h).w - w_eval(sf, k, r, u - h).w) / (2 * h);
        const double fd_dr = (w_eval(sf, k, r + h, u).w - w_eval(sf, k, r - h, u).w) / (2 * h);
        const double fd_dk = (w_eval(sf, k + h, r, u).w - w_eval(sf, k - h, r, u).w) / (2 * h);
        EXPECT_LT(rel(fd_du, v.dw_du), 1e-6);
        EXPECT_LT(rel(fd_dr, v.dw_dr), 1e-6);
        EXPECT_LT(rel(fd_dk, v.dw_dkappa), 1e-6);
        // w is a polynomial of degree 2 in r here, so central differences are exact up to rounding
        EXPECT_LT(std::abs(fd_dr - v.dw_dr), 1e-10);
    }
    // dr / dkappa = kappa / r
    EXPECT_LT(rel(v.dw_dr / v.dw_dkappa, k / r), 1e-13);
    EXPECT_EQ(w_dr(sf, 0.0, 0.4, 0.6), 0.0);
}

TEST(G, ClosedFormAndQuadrature)
{
    const auto sf = StructureFunction::polytrope(0.5, {1.0});
    // 4 sqrt2 pi Beta(3/2,3/2) 2^2 = 2 sqrt2 pi^2 (mpmath)
    EXPECT_LT(rel(G_eval(sf, 2.0), 27.915456798555518137), 1e-14);
    EXPECT_LT(rel(w_quadrature(sf, 0.0, 0.0, 2.0).w, 27.915456798555518137), 1e-9);
    EXPECT_EQ(G_eval(sf, -1.0), 0.0);
    EXPECT_LT(rel(G_eval(special(), 1.7), 1.7 * 1.7), 1e-14);
    for (double r : {0.0, 0.3, 2.0}) EXPECT_EQ(G_eval(sf, 0.8), w_eval(sf, 0.0, r, 0.8).w);
    const double h = 1e-4;
    EXPECT_LT(rel((G_eval(sf, 0.5 + h) - G_eval(sf, 0.5 - h)) / (2 * h), G_prime(sf, 0.5)), 1e-6);
    EXPECT_LT(rel(w_du(sf, 0.0, 0.0, 0.5), G_prime(sf, 0.5)), 1e-14);
}

TEST(G, Inverse)
{
    for (const auto& sf : {special(), StructureFunction::polytrope(2.0, {0.7}),
                           StructureFunction::sinc_shifted(10.0, {1.0})}) {
        for (double a : {1e-3, 0.5, 40.0}) EXPECT_LT(rel(G_eval(sf, G_inverse(sf, a)), a), 1e-12);
    }
    EXPECT_THROW(G_inverse(special(), 1e20, 10.0), InversionFailure);
}

TEST(Beta, KnownValues)
{
    EXPECT_LT(rel(beta_fn(1.5, 1.5), M_PI / 8.0), 1e-14);
    EXPECT_LT(rel(beta_fn(2.5, 1.5), M_PI / 16.0), 1e-14);
}

TEST(Json, RoundTrip)
{
    auto sf = StructureFunction::two_power_polytrope(0.5, 1.25, {1.0, 0.0, 0.5});
    sf.hypothesis().delta = 0.5;
    const auto j = to_json(sf);
    const auto back = structure_function_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.id(), sf.id());
    EXPECT_THROW(structure_function_from_json({{"family", "polytrope"}, {"nu", 5.0}}), ConfigError);
    try {
        structure_function_from_json({{"family", "polytrope"}, {"nuu", 1.0}});
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("structure_function.nuu"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("structure_function.nu: missing"), std::string::npos);
    }
}

TEST(Hypothesis, PolytropeAllCriticalVerified)
{
    const auto rep = hypothesis_check(StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0}));
    EXPECT_FALSE(rep.seeding_blocked());
    for (const auto& c : rep.checks) {
        if (c.seeding_critical) EXPECT_EQ(c.status, CheckStatus::VerifiedOnSamples) << c.name << ": " << c.detail;
    }
    ASSERT_NE(rep.find("Lambda_below_4"), nullptr);
    EXPECT_EQ(rep.find("Lambda_below_4")->status, CheckStatus::VerifiedOnSamples);
}

TEST(Hypothesis, MassConditionExcludesNuThreeHalves)
{
    const auto rep = hypothesis_check(StructureFunction::polytrope(1.5, {1.0}));
    ASSERT_NE(rep.find("mass_condition"), nullptr);
    EXPECT_EQ(rep.find("mass_condition")->status, CheckStatus::Violated);
    EXPECT_TRUE(rep.seeding_blocked());
    const auto j = to_json(rep);
    EXPECT_TRUE(j.contains("checks"));
}

TEST(Hypothesis, SincShiftedCaseB)
{
    const auto rep = hypothesis_check(StructureFunction::sinc_shifted(10.0, {1.0}));
    ASSERT_NE(rep.find("mass_condition_case_b"), nullptr);
    EXPECT_EQ(rep.find("mass_condition_case_b")->status, CheckStatus::VerifiedOnSamples);
}

TEST(Hypothesis, LowerBoundWithoutParamsIsInconclusive)
{
    const auto rep = hypothesis_check(StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0}));
    ASSERT_NE(rep.find("phi_lower_bound"), nullptr);
    EXPECT_EQ(rep.find("phi_lower_bound")->status, CheckStatus::Inconclusive);
}

TEST(GrowthProbe, SpecialExampleSlopes)
{
    std::vector<double> small, large;
    for (int k = 0; k < 9; ++k) small.push_back(std::pow(10.0, -1.0 + 0.25 * k));
    for (int k = 0; k < 9; ++k) large.push_back(std::pow(10.0, 3.0 + 0.25 * k));
    EXPECT_NEAR(growth_probe(special(), 0.0, 1.0, small).slope, 2.0, 0.01);
    EXPECT_NEAR(growth_probe(special(), 1.0, 1.0, large).slope, 3.0, 0.01);
    const auto p = growth_probe(StructureFunction::polytrope(0.5, {1.0, 0.0, 1.0}), 1.0, 1.0, large);
    ASSERT_TRUE(p.closed_form_exponent.has_value());
    EXPECT_DOUBLE_EQ(*p.closed_form_exponent, 3.0);
    EXPECT_LE(p.slope, 3.0 + 1e-6);
}
