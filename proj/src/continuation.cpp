#include "vps/continuation.hpp"

#include <algorithm>
#include <cmath>

#include "vps/errors.hpp"
#include "vps/format.hpp"
#include "vps/hypothesis.hpp"
#include "vps/parallel.hpp"

namespace vps {

Problem::Problem(StructureFunction sf, const CylGrid& grid)
    : sf_(std::move(sf)), op_(std::make_shared<PotentialOperator>(grid))
{
}

Problem::Problem(StructureFunction sf, std::shared_ptr<const PotentialOperator> op)
    : sf_(std::move(sf)), op_(std::move(op))
{
}

namespace {

using Vec = Eigen::VectorXd;

Eigen::Map<const Vec> as_vec(const ScalarField& f)
{
    return {f.values.data(), static_cast<Eigen::Index>(f.values.size())};
}

ScalarField to_field(const CylGrid& g, const Vec& v, FieldKind kind)
{
    ScalarField f(g, kind);
    std::copy(v.data(), v.data() + v.size(), f.values.begin());
    return f;
}

struct Evaluation {
    Vec U, w, w_u, w_kappa;
};

Evaluation evaluate(const Problem& pb, const Vec& rho, double alpha, double kappa, bool derivatives)
{
    const CylGrid& g = pb.grid();
    Evaluation ev;
    ev.U = pb.op().apply(rho);
    const auto n = static_cast<std::size_t>(rho.size());
    ev.w = Vec::Zero(rho.size());
    if (derivatives) {
        ev.w_u = Vec::Zero(rho.size());
        ev.w_kappa = Vec::Zero(rho.size());
    }
    parallel_for(n, [&](std::size_t k) {
        const double u = ev.U[k] + alpha;
        if (u <= 0.0) return;
        const WValue v = w_eval(pb.sf(), kappa, g.r(k / g.Nz), u);
        ev.w[k] = v.w;
        if (derivatives) {
            ev.w_u[k] = v.dw_du;
            ev.w_kappa[k] = v.dw_dkappa;
        }
    });
    return ev;
}

struct Point {
    Vec rho;
    double alpha = 0.0;
    double kappa = 0.0;
};

Point point_of(const SolutionState& s)
{
    return {as_vec(s.rho), s.alpha, s.kappa};
}

double weighted_dot(const Problem& pb, const Point& a, const Point& b, double kappa_weight)
{
    return pb.op().volumes().cwiseProduct(a.rho).dot(b.rho) + a.alpha * b.alpha + kappa_weight * a.kappa * b.kappa;
}

Point difference(const Point& a, const Point& b)
{
    return {a.rho - b.rho, a.alpha - b.alpha, a.kappa - b.kappa};
}

double arclength_residual(const Problem& pb, const Point& x, const ArclengthConstraint& c)
{
    const Vec& V = pb.op().volumes();
    return V.cwiseProduct(x.rho - c.base_rho).dot(c.tangent_rho) + (x.alpha - c.base_alpha) * c.tangent_alpha
         + c.kappa_weight * (x.kappa - c.base_kappa) * c.tangent_kappa - c.ds;
}

struct Norms {
    double f1 = 0.0;   ///< |F1|_inf
    double f2 = 0.0;   ///< |F2|
    double arc = 0.0;  ///< |arclength residual|
    double merit = 0.0;
};

Norms norms(const Problem& pb, const Point& x, const Evaluation& ev, const NewtonOptions& opt,
            const std::optional<ArclengthConstraint>& arc)
{
    Norms n;
    n.f1 = (x.rho - ev.w).lpNorm<Eigen::Infinity>();
    n.f2 = std::abs(pb.op().volumes().dot(x.rho) - pb.M0);
    const double scale1 = std::max(x.rho.lpNorm<Eigen::Infinity>(), 1.0);
    n.merit = std::max(n.f1 / (opt.f1_tol * scale1), n.f2 / (opt.f2_tol * pb.M0));
    if (arc) {
        n.arc = std::abs(arclength_residual(pb, x, *arc));
        n.merit = std::max(n.merit, n.arc / (1e-9 * std::max(std::abs(arc->ds), 1e-300)));
    }
    return n;
}

/// Solves the bordered Newton system with inactive rows (u <= 0, identity rows) eliminated.
/// rhs_* are the right-hand sides of the full system.
struct ReducedSolve {
    Point delta;
    double rcond = 0.0;
};

ReducedSolve solve_bordered(const Problem& pb, const Evaluation& ev, const Vec& rho, double alpha,
                            const Vec& rhs1, double rhs2, const std::optional<ArclengthConstraint>& arc,
                            double rhs_arc, bool kappa_column, double rcond_min)
{
    const Eigen::MatrixXd& C = pb.op().matrix();
    const Vec& V = pb.op().volumes();
    const auto n = rho.size();
    std::vector<Eigen::Index> active, inactive;
    for (Eigen::Index k = 0; k < n; ++k) (ev.U[k] + alpha > 0.0 ? active : inactive).push_back(k);

    ReducedSolve out;
    out.delta.rho = Vec::Zero(n);
    // inactive rows read delta_rho_i = rhs1_i
    for (auto i : inactive) out.delta.rho[i] = rhs1[i];

    const auto m = static_cast<Eigen::Index>(active.size());
    const Eigen::Index extra = 1 + (arc ? 1 : 0);
    const Eigen::Index size = m + extra;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size, size);
    Vec b(size);
    std::vector<Eigen::Index> moved;
    for (auto i : inactive)
        if (out.delta.rho[i] != 0.0) moved.push_back(i);

    for (Eigen::Index a = 0; a < m; ++a) {
        const auto ka = active[a];
        const double wu = ev.w_u[ka];
        for (Eigen::Index c = 0; c < m; ++c) J(a, c) = -wu * C(ka, active[c]);
        J(a, a) += 1.0;
        J(a, m) = -wu;
        if (arc) J(a, m + 1) = kappa_column ? -ev.w_kappa[ka] : 0.0;
        double known = 0.0;
        for (auto i : moved) known += C(ka, i) * out.delta.rho[i];
        b[a] = rhs1[ka] + wu * known;
    }
    double known_mass = 0.0, known_arc = 0.0;
    for (auto i : moved) {
        known_mass += V[i] * out.delta.rho[i];
        if (arc) known_arc += V[i] * arc->tangent_rho[i] * out.delta.rho[i];
    }
    for (Eigen::Index c = 0; c < m; ++c) J(m, c) = V[active[c]];
    b[m] = rhs2 - known_mass;
    if (arc) {
        for (Eigen::Index c = 0; c < m; ++c) J(m + 1, c) = V[active[c]] * arc->tangent_rho[active[c]];
        J(m + 1, m) = arc->tangent_alpha;
        J(m + 1, m + 1) = arc->kappa_weight * arc->tangent_kappa;
        b[m + 1] = rhs_arc - known_arc;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    out.rcond = lu.rcond();
    if (!(out.rcond >= rcond_min)) {
        throw SingularJacobian("bordered Jacobian is singular (reciprocal condition " + fmt17(out.rcond) + ")");
    }
    const Vec y = lu.solve(b);
    if (!y.allFinite()) throw SingularJacobian("bordered solve produced non-finite values");
    for (Eigen::Index a = 0; a < m; ++a) out.delta.rho[active[a]] = y[a];
    out.delta.alpha = y[m];
    out.delta.kappa = arc ? y[m + 1] : 0.0;
    return out;
}

double clip_negative(Vec& rho)
{
    double clip = 0.0;
    for (Eigen::Index k = 0; k < rho.size(); ++k) {
        if (rho[k] < 0.0) {
            clip = std::max(clip, -rho[k]);
            rho[k] = 0.0;
        }
    }
    return clip;
}

SolutionState finish(const Problem& pb, const Point& x, const Evaluation& ev, const Norms& nm, int iters,
                     double rcond, double clip)
{
    SolutionState s;
    s.rho = to_field(pb.grid(), x.rho, FieldKind::Density);
    s.U = to_field(pb.grid(), ev.U, FieldKind::Potential);
    s.alpha = x.alpha;
    s.kappa = x.kappa;
    s.residual_inf = nm.f1;
    s.mass_error = pb.op().volumes().dot(x.rho) - pb.M0;
    s.newton_iters = iters;
    s.cond_est = rcond > 0.0 ? 1.0 / rcond : 0.0;
    s.clip = clip;
    return s;
}

}  // namespace

SolutionState make_state(const Problem& pb, const ScalarField& rho, double alpha, double kappa)
{
    const Point x{as_vec(rho), alpha, kappa};
    const Evaluation ev = evaluate(pb, x.rho, alpha, kappa, false);
    const Norms nm = norms(pb, x, ev, NewtonOptions{}, std::nullopt);
    return finish(pb, x, ev, nm, 0, 0.0, 0.0);
}

Residual residual(const Problem& pb, const SolutionState& state)
{
    const Vec rho = as_vec(state.rho);
    const Evaluation ev = evaluate(pb, rho, state.alpha, state.kappa, false);
    Residual r;
    r.F1 = to_field(pb.grid(), rho - ev.w, FieldKind::Density);
    r.F2 = pb.op().volumes().dot(rho) - pb.M0;
    return r;
}

BorderedJacobian::BorderedJacobian(const Problem& problem, const SolutionState& state) : problem_(problem)
{
    const Evaluation ev = evaluate(problem, as_vec(state.rho), state.alpha, state.kappa, true);
    w_u_ = ev.w_u;
    w_kappa_ = ev.w_kappa;
}

Eigen::VectorXd BorderedJacobian::apply(const Eigen::VectorXd& drho, double dalpha, double dkappa) const
{
    const auto n = drho.size();
    Vec out(n + 1);
    const Vec dU = problem_.op().apply(drho);
    out.head(n) = drho - w_u_.cwiseProduct(dU + Vec::Constant(n, dalpha)) - dkappa * w_kappa_;
    out[n] = problem_.op().volumes().dot(drho);
    return out;
}

Eigen::MatrixXd BorderedJacobian::dense() const
{
    const auto n = w_u_.size();
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n + 1, n + 2);
    J.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n) - w_u_.asDiagonal() * problem_.op().matrix();
    J.col(n).head(n) = -w_u_;
    J.col(n + 1).head(n) = -w_kappa_;
    J.row(n).head(n) = problem_.op().volumes().transpose();
    return J;
}

BorderedJacobian assemble_jacobian(const Problem& problem, const SolutionState& state)
{
    return BorderedJacobian(problem, state);
}

SolutionState newton_correct(const Problem& pb, const SolutionState& guess, const NewtonOptions& opt,
                             const std::optional<ArclengthConstraint>& arc)
{
    Point x = point_of(guess);
    Evaluation ev = evaluate(pb, x.rho, x.alpha, x.kappa, true);
    Norms nm = norms(pb, x, ev, opt, arc);
    double rcond = 0.0, clip = 0.0;
    for (int it = 0;; ++it) {
        if (nm.merit <= 1.0) {
            if (clip > opt.clip_reject * x.rho.lpNorm<Eigen::Infinity>()) {
                throw NoConvergence("converged iterate needed a density clip of " + fmt17(clip));
            }
            if (it == 0) {
                // report the conditioning of the accepted state even without a step
                const Vec zero = Vec::Zero(x.rho.size());
                rcond = solve_bordered(pb, ev, x.rho, x.alpha, zero, 0.0, arc, 0.0, arc.has_value(), 0.0).rcond;
            }
            return finish(pb, x, ev, nm, it, rcond, clip);
        }
        if (it == opt.max_iter) {
            throw NoConvergence("Newton did not converge in " + std::to_string(opt.max_iter) + " iterations (|F1| = "
                                + fmt17(nm.f1) + ", |F2| = " + fmt17(nm.f2) + ")");
        }
        const Vec rhs1 = -(x.rho - ev.w);
        const double rhs2 = -(pb.op().volumes().dot(x.rho) - pb.M0);
        const double rhs_arc = arc ? -arclength_residual(pb, x, *arc) : 0.0;
        const ReducedSolve step =
            solve_bordered(pb, ev, x.rho, x.alpha, rhs1, rhs2, arc, rhs_arc, arc.has_value(), opt.rcond_min);
        rcond = step.rcond;

        double lambda = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, lambda *= 0.5) {
            Point trial{x.rho + lambda * step.delta.rho, x.alpha + lambda * step.delta.alpha,
                        x.kappa + lambda * step.delta.kappa};
            const double trial_clip = clip_negative(trial.rho);
            Evaluation tev = evaluate(pb, trial.rho, trial.alpha, trial.kappa, false);
            const Norms tnm = norms(pb, trial, tev, opt, arc);
            if (tnm.merit < nm.merit) {
                x = std::move(trial);
                clip = trial_clip;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw NoConvergence("damped Newton could not reduce the residual (|F1| = " + fmt17(nm.f1) + ")");
        }
        ev = evaluate(pb, x.rho, x.alpha, x.kappa, true);
        nm = norms(pb, x, ev, opt, arc);
    }
}

bool support_reaches_margin(const ScalarField& rho, std::size_t rings)
{
    const CylGrid& g = rho.grid;
    for (std::size_t i = 0; i < g.Nr; ++i) {
        for (std::size_t j = 0; j < g.Nz; ++j) {
            const bool edge = i + rings >= g.Nr || j + rings >= g.Nz;
            if (edge && rho(i, j) != 0.0) return true;
        }
    }
    return false;
}

SolutionState initial_state(Problem& pb, double a0, const SeedOptions& opt)
{
    const StructureFunction& sf = pb.sf();
    if (sf.mass_degenerate()) {
        throw SeedRejected("seed rejected: polytrope with nu = 3/2 has constant mass M(a), so M'(a0) = 0");
    }
    if (opt.check_hypotheses) {
        const HypothesisReport report = hypothesis_check(sf);
        if (report.seeding_blocked()) {
            std::string msg = "seed rejected: hypothesis check violated:";
            for (const auto& c : report.checks)
                if (c.seeding_critical && c.status == CheckStatus::Violated) msg += " " + c.name + " (" + c.detail + ")";
            throw SeedRejected(msg);
        }
    }
    const MassCurve mc = mass_curve(sf, {a0}, opt.radial);
    if (mc.points[0].failure) throw SeedRejected("seed rejected: radial solve failed: " + *mc.points[0].failure);
    if (mc.degenerate) {
        throw SeedRejected("seed rejected: M'(a0) = " + fmt17(mc.points[0].dMda) + " is numerically zero");
    }

    RadialProfile profile;
    try {
        profile = solve_radial(sf, a0, opt.radial);
    } catch (const Error& e) {
        throw SeedRejected(std::string("seed rejected: radial solve failed: ") + e.what());
    }
    const CylGrid& g = pb.grid();
    const double need = opt.margin_factor * profile.R;
    if (g.Rmax() < need || g.Zmax() < need) {
        throw SeedRejected("seed rejected: support margin too small, grid extents (" + fmt17(g.Rmax()) + ", "
                           + fmt17(g.Zmax()) + ") must reach " + fmt17(opt.margin_factor) + " R = " + fmt17(need));
    }

    ScalarField rho(g, FieldKind::Density);
    for (std::size_t i = 0; i < g.Nr; ++i)
        for (std::size_t j = 0; j < g.Nz; ++j) rho(i, j) = profile.rho_at(sf, std::hypot(g.r(i), g.z(j)));
    pb.M0 = total_mass(rho);

    SolutionState guess;
    guess.rho = rho;
    guess.alpha = profile.alpha;
    guess.kappa = 0.0;
    try {
        return newton_correct(pb, guess, opt.newton);
    } catch (const Error& e) {
        throw SeedRejected(std::string("seed rejected: Newton polish failed: ") + e.what());
    }
}

std::string to_string(Termination t)
{
    switch (t) {
    case Termination::KappaMax: return "kappa-max";
    case Termination::SupportReachedMargin: return "support-reached-margin";
    case Termination::DensityExceeded: return "density-exceeded";
    case Termination::StepCollapse: return "step-collapse";
    case Termination::UserStop: return "user-stop";
    }
    return "unknown";
}

namespace {

SolutionState state_at(const Problem& pb, const Point& x)
{
    SolutionState s;
    s.rho = to_field(pb.grid(), x.rho, FieldKind::Density);
    s.alpha = x.alpha;
    s.kappa = x.kappa;
    return s;
}

/// Unit tangent at the seed from J_x z = -F_kappa, oriented by `direction` in kappa.
Point seed_tangent(const Problem& pb, const SolutionState& seed, double direction, double kappa_weight,
                   double rcond_min)
{
    const Point x = point_of(seed);
    const Evaluation ev = evaluate(pb, x.rho, x.alpha, x.kappa, true);
    const ReducedSolve z = solve_bordered(pb, ev, x.rho, x.alpha, ev.w_kappa, 0.0, std::nullopt, 0.0, false, rcond_min);
    Point t{direction * z.delta.rho, direction * z.delta.alpha, direction};
    const double norm = std::sqrt(weighted_dot(pb, t, t, kappa_weight));
    return {t.rho / norm, t.alpha / norm, t.kappa / norm};
}

Termination check_termination(const Problem& pb, const SolutionState& s, const ContinuationConfig& cfg, bool* stop)
{
    *stop = true;
    if (std::abs(s.kappa) >= cfg.kappa_max) return Termination::KappaMax;
    if (support_reaches_margin(s.rho, cfg.margin_rings)) return Termination::SupportReachedMargin;
    if (s.rho.sup_abs() > cfg.sup_rho_max) return Termination::DensityExceeded;
    (void)pb;
    *stop = false;
    return Termination::UserStop;
}

ContinuationCurve trace(const Problem& pb, std::optional<SolutionState> previous, SolutionState last, int step,
                        double ds, const ContinuationConfig& cfg, const AcceptCallback& on_accept)
{
    ContinuationCurve curve;
    int taken = 0;
    for (;;) {
        if (taken >= cfg.max_steps) {
            curve.termination = Termination::UserStop;
            break;
        }
        const Point base = point_of(last);
        Point tangent;
        if (previous) {
            Point sec = difference(base, point_of(*previous));
            const double norm = std::sqrt(weighted_dot(pb, sec, sec, cfg.kappa_weight));
            tangent = {sec.rho / norm, sec.alpha / norm, sec.kappa / norm};
        } else {
            tangent = seed_tangent(pb, last, cfg.direction, cfg.kappa_weight, cfg.newton.rcond_min);
        }

        int attempts = 0;
        std::string note;
        std::optional<SolutionState> next;
        while (!next) {
            if (ds < cfg.ds_min) break;
            ++attempts;
            const Point pred{base.rho + ds * tangent.rho, base.alpha + ds * tangent.alpha,
                             base.kappa + ds * tangent.kappa};
            ArclengthConstraint arc{base.rho, tangent.rho, base.alpha, tangent.alpha, base.kappa, tangent.kappa, ds,
                                    cfg.kappa_weight};
            try {
                if (!previous) {
                    // first step: natural-parameter corrector at the predicted kappa
                    try {
                        next = newton_correct(pb, state_at(pb, pred), cfg.newton);
                    } catch (const SingularJacobian&) {
                        note = "fixed-kappa Jacobian singular, switched to arclength";
                        next = newton_correct(pb, state_at(pb, pred), cfg.newton, arc);
                    }
                } else {
                    next = newton_correct(pb, state_at(pb, pred), cfg.newton, arc);
                }
            } catch (const NoConvergence& e) {
                note = e.what();
                ds *= 0.5;
            } catch (const SingularJacobian& e) {
                note = e.what();
                ds *= 0.5;
            } catch (const QuadratureFailure& e) {
                note = e.what();
                ds *= 0.5;
            }
        }
        if (!next) {
            curve.termination = Termination::StepCollapse;
            break;
        }

        ++step;
        ++taken;
        curve.history.push_back({step, ds, attempts, note});
        double ds_next = ds;
        if (next->newton_iters <= cfg.fast_iters) ds_next = std::min(ds * cfg.grow, cfg.ds_max);
        curve.states.push_back(*next);
        if (on_accept) on_accept(step, *next, ds_next);
        previous = std::move(last);
        last = std::move(*next);
        ds = ds_next;

        bool stop = false;
        const Termination t = check_termination(pb, last, cfg, &stop);
        if (stop) {
            curve.termination = t;
            break;
        }
    }
    curve.ds_next = ds;
    return curve;
}

}  // namespace

ContinuationCurve continue_curve(const Problem& pb, const SolutionState& seed, const ContinuationConfig& cfg,
                                 const AcceptCallback& on_accept)
{
    if (!(cfg.ds_min > 0.0) || !(cfg.ds_min <= cfg.ds0) || !(cfg.ds0 <= cfg.ds_max)) {
        throw DomainError("continuation step sizes must satisfy 0 < ds_min <= ds0 <= ds_max");
    }
    ContinuationCurve curve = trace(pb, std::nullopt, seed, 0, cfg.ds0, cfg, on_accept);
    curve.states.insert(curve.states.begin(), seed);
    return curve;
}

ContinuationCurve resume_curve(const Problem& pb, const SolutionState* previous, const SolutionState& last, int step,
                               double ds_next, const ContinuationConfig& cfg, const AcceptCallback& on_accept)
{
    std::optional<SolutionState> prev;
    if (previous) prev = *previous;
    return trace(pb, prev, last, step, ds_next, cfg, on_accept);
}

}  // namespace vps
