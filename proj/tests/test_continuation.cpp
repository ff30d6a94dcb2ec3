#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "support.hpp"
#include "vps/continuation.hpp"
#include "vps/errors.hpp"

using namespace vps;

namespace {

constexpr double kRadius = test::kR_n2;  // R(a0 = 1) of the special example

/// One 32x32 special-example problem and its seed, shared by the tests in this file.
struct Shared {
    std::shared_ptr<const PotentialOperator> op;
    std::unique_ptr<Problem> pb;
    SolutionState seed;

    static Shared& get()
    {
        static Shared s = [] {
            Shared x;
            x.op = std::make_shared<PotentialOperator>(CylGrid::make(32, 32, 4.0, 4.0));
            x.pb = std::make_unique<Problem>(StructureFunction::special_example(), x.op);
            x.seed = initial_state(*x.pb, 1.0);
            return x;
        }();
        return s;
    }
};

double max_rel_diff(const ScalarField& a, const ScalarField& b)
{
    double d = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) d = std::max(d, std::abs(a.values[k] - b.values[k]));
    return d / b.sup_abs();
}

}  // namespace

TEST(Seed, Consistency)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    const double sup = s.seed.rho.sup_abs();
    EXPECT_EQ(s.seed.kappa, 0.0);
    EXPECT_LE(s.seed.residual_inf, 1e-9 * sup);
    const Residual r = residual(pb, s.seed);
    EXPECT_LE(r.F1.sup_abs(), 1e-9 * sup);
    EXPECT_LE(std::abs(r.F2), 1e-10 * pb.M0);
    EXPECT_NEAR(s.seed.alpha / (-pb.M0 / kRadius), 1.0, 0.01);
    EXPECT_LT(s.seed.alpha, 0.0);
    EXPECT_TRUE(std::isfinite(s.seed.cond_est));
    for (double v : s.seed.rho.values) EXPECT_GE(v, 0.0);
}

TEST(Seed, Rejections)
{
    const auto g = CylGrid::make(16, 16, 4.0, 4.0);
    Problem degenerate(StructureFunction::polytrope(1.5, {1.0}), g);
    EXPECT_THROW(initial_state(degenerate, 1.0), SeedRejected);
    Problem cramped(StructureFunction::special_example(), CylGrid::make(16, 16, 2.0, 2.0));
    try {
        initial_state(cramped, 1.0);
        FAIL();
    } catch (const SeedRejected& e) {
        EXPECT_NE(std::string(e.what()).find("margin"), std::string::npos) << e.what();
    }
}

TEST(Residual, Basics)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    SolutionState shifted = make_state(pb, s.seed.rho, s.seed.alpha - 0.1, 0.0);
    EXPECT_GT(residual(pb, shifted).F1.sup_abs(), 1e-3);
    const SolutionState empty = make_state(pb, ScalarField(pb.grid(), FieldKind::Density), -0.5, 0.0);
    const Residual r = residual(pb, empty);
    EXPECT_EQ(r.F1.sup_abs(), 0.0);
    EXPECT_DOUBLE_EQ(r.F2, -pb.M0);
}

TEST(Jacobian, MatchesDirectionalFiniteDifferences)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    // a slightly rotating state so that the kappa column is nonzero
    const SolutionState base = make_state(pb, s.seed.rho, s.seed.alpha, 0.3);
    const BorderedJacobian J = assemble_jacobian(pb, base);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const auto n = static_cast<Eigen::Index>(pb.grid().size());
    for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd d(n);
        for (Eigen::Index k = 0; k < n; ++k) d[k] = base.rho.values[k] > 0.0 ? U(rng) : 0.0;
        const double da = U(rng), dk = U(rng);
        const Eigen::VectorXd Jd = J.apply(d, da, dk);
        const double h = 1e-6;
        auto F = [&](double t) {
            ScalarField rho = base.rho;
            for (Eigen::Index k = 0; k < n; ++k) rho.values[k] += t * d[k];
            const Residual r = residual(pb, make_state(pb, rho, base.alpha + t * da, base.kappa + t * dk));
            Eigen::VectorXd v(n + 1);
            for (Eigen::Index k = 0; k < n; ++k) v[k] = r.F1.values[k];
            v[n] = r.F2;
            return v;
        };
        const Eigen::VectorXd fd = (F(h) - F(-h)) / (2.0 * h);
        EXPECT_LT((fd - Jd).norm() / Jd.norm(), 1e-6) << "trial " << trial;
    }
}

TEST(Jacobian, ColumnsAndRows)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    const BorderedJacobian J = assemble_jacobian(pb, s.seed);
    const auto n = static_cast<Eigen::Index>(pb.grid().size());
    const Eigen::VectorXd col = J.apply(Eigen::VectorXd::Zero(n), 1.0, 0.0);
    for (Eigen::Index k = 0; k < n; ++k) EXPECT_DOUBLE_EQ(col[k], -J.w_u()[k]);
    EXPECT_EQ(col[n], 0.0);
    const Eigen::MatrixXd D = J.dense();
    ASSERT_EQ(D.rows(), n + 1);
    ASSERT_EQ(D.cols(), n + 2);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (s.seed.u_at(static_cast<std::size_t>(k)) < 0.0) {
            EXPECT_EQ(D(k, k), 1.0);
            EXPECT_EQ(D.row(k).cwiseAbs().sum(), 1.0);
        }
    }
    for (Eigen::Index k = 0; k < n; ++k) EXPECT_DOUBLE_EQ(D(n, k), pb.op().volumes()[k]);
}

TEST(Newton, RecoversSeedFromNoise)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-0.01, 0.01);
    ScalarField rho = s.seed.rho;
    for (double& v : rho.values) v *= 1.0 + U(rng);
    const SolutionState out = newton_correct(pb, make_state(pb, rho, s.seed.alpha, 0.0), NewtonOptions{});
    EXPECT_LT(max_rel_diff(out.rho, s.seed.rho), 1e-6);
    EXPECT_LT(std::abs(out.alpha - s.seed.alpha), 1e-6 * std::abs(s.seed.alpha));

    const SolutionState again = newton_correct(pb, s.seed, NewtonOptions{});
    EXPECT_EQ(again.newton_iters, 0);
}

TEST(Newton, ReflectedKappaGivesSameDensity)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    const SolutionState plus = newton_correct(pb, make_state(pb, s.seed.rho, s.seed.alpha, 0.5), NewtonOptions{});
    const SolutionState minus = newton_correct(pb, make_state(pb, s.seed.rho, s.seed.alpha, -0.5), NewtonOptions{});
    EXPECT_EQ(plus.rho.values, minus.rho.values);
    EXPECT_EQ(plus.alpha, minus.alpha);
}

TEST(Continuation, ConstantMassAndResidual)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    ContinuationConfig cfg;
    cfg.ds0 = 0.1;
    cfg.max_steps = 5;
    const ContinuationCurve c = continue_curve(pb, s.seed, cfg);
    ASSERT_EQ(c.states.size(), 6u);
    EXPECT_EQ(c.termination, Termination::UserStop);
    for (const auto& st : c.states) {
        EXPECT_LE(std::abs(total_mass(st.rho) - pb.M0) / pb.M0, 1e-8);
        EXPECT_LE(st.residual_inf, 1e-9 * st.rho.sup_abs());
        EXPECT_LT(st.alpha, 0.0);
        for (double v : st.rho.values) EXPECT_GE(v, -1e-12 * st.rho.sup_abs());
    }
    for (std::size_t k = 1; k < c.states.size(); ++k) EXPECT_GT(c.states[k].kappa, c.states[k - 1].kappa);
}

TEST(Continuation, ReflectionSymmetry)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    ContinuationConfig cfg;
    cfg.ds0 = 0.1;
    cfg.max_steps = 4;
    const ContinuationCurve up = continue_curve(pb, s.seed, cfg);
    cfg.direction = -1.0;
    const ContinuationCurve down = continue_curve(pb, s.seed, cfg);
    ASSERT_EQ(up.states.size(), down.states.size());
    for (std::size_t k = 0; k < up.states.size(); ++k) {
        EXPECT_NEAR(up.states[k].kappa, -down.states[k].kappa, 1e-12);
        EXPECT_LT(max_rel_diff(down.states[k].rho, up.states[k].rho), 1e-6);
    }
}

TEST(Continuation, ResumeIsBitIdentical)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    ContinuationConfig cfg;
    cfg.ds0 = 0.1;
    cfg.max_steps = 4;
    const ContinuationCurve full = continue_curve(pb, s.seed, cfg);
    cfg.max_steps = 2;
    std::vector<double> ds;
    const ContinuationCurve head = continue_curve(pb, s.seed, cfg, [&](int, const SolutionState&, double d) {
        ds.push_back(d);
    });
    const ContinuationCurve tail = resume_curve(pb, &head.states[1], head.states[2], 2, ds.back(), cfg);
    ASSERT_EQ(tail.states.size(), 2u);
    for (int k = 0; k < 2; ++k) {
        EXPECT_EQ(tail.states[k].rho.values, full.states[3 + k].rho.values);
        EXPECT_EQ(tail.states[k].alpha, full.states[3 + k].alpha);
        EXPECT_EQ(tail.states[k].kappa, full.states[3 + k].kappa);
    }
}

TEST(Continuation, Terminations)
{
    auto& s = Shared::get();
    const Problem& pb = *s.pb;
    ContinuationConfig cfg;
    cfg.ds0 = 0.1;
    cfg.kappa_max = 0.3;
    EXPECT_EQ(continue_curve(pb, s.seed, cfg).termination, Termination::KappaMax);

    cfg = ContinuationConfig{};
    cfg.ds0 = 0.2;
    cfg.sup_rho_max = 1.005 * s.seed.rho.sup_abs();
    const auto dense = continue_curve(pb, s.seed, cfg);
    EXPECT_EQ(dense.termination, Termination::DensityExceeded);
    EXPECT_GT(dense.states.back().rho.sup_abs(), cfg.sup_rho_max);

    cfg = ContinuationConfig{};
    cfg.ds0 = cfg.ds_max = 1e3;
    cfg.ds_min = 100.0;
    const auto collapse = continue_curve(pb, s.seed, cfg);
    EXPECT_EQ(collapse.termination, Termination::StepCollapse);
    EXPECT_EQ(collapse.states.size(), 1u);

    cfg = ContinuationConfig{};
    cfg.ds0 = 1.0;
    cfg.ds_min = 2.0;
    EXPECT_THROW(continue_curve(pb, s.seed, cfg), DomainError);
}

TEST(Continuation, SupportMargin)
{
    const auto g = CylGrid::make(10, 10, 1.0, 1.0);
    ScalarField rho(g, FieldKind::Density);
    rho(3, 3) = 1.0;
    EXPECT_FALSE(support_reaches_margin(rho, 2));
    rho(8, 0) = 1e-3;
    EXPECT_TRUE(support_reaches_margin(rho, 2));
    EXPECT_FALSE(support_reaches_margin(rho, 1));
    EXPECT_EQ(to_string(Termination::SupportReachedMargin), "support-reached-margin");
}
