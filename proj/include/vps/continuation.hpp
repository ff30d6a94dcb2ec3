#pragma once

// Steady states as zeros of
//   F1(rho, alpha, kappa) = rho - w(kappa, r, U[rho] + alpha),   F2 = int rho - M0,
// traced from the non-rotating seed by pseudo-arclength continuation in kappa.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vps/field.hpp"
#include "vps/field_solver.hpp"
#include "vps/radial_solver.hpp"
#include "vps/structure_function.hpp"

namespace vps {

/// Structure function, grid and the shared kernel matrix, plus the mass M0 fixed by the seed.
class Problem {
public:
    Problem(StructureFunction sf, const CylGrid& grid);
    Problem(StructureFunction sf, std::shared_ptr<const PotentialOperator> op);

    const StructureFunction& sf() const { return sf_; }
    const CylGrid& grid() const { return op_->grid(); }
    const PotentialOperator& op() const { return *op_; }
    std::shared_ptr<const PotentialOperator> op_ptr() const { return op_; }

    double M0 = 0.0;

private:
    StructureFunction sf_;
    std::shared_ptr<const PotentialOperator> op_;
};

struct SolutionState {
    ScalarField rho;
    ScalarField U;  ///< potential of rho; the effective potential is U + alpha
    double alpha = 0.0;
    double kappa = 0.0;
    double residual_inf = 0.0;
    double mass_error = 0.0;  ///< total_mass(rho) - M0
    int newton_iters = 0;
    double cond_est = 0.0;  ///< 1 / reciprocal-condition estimate of the reduced Jacobian
    double clip = 0.0;      ///< largest negative density removed in the final Newton step

    double u_at(std::size_t k) const { return U.values[k] + alpha; }
};

struct NewtonOptions {
    int max_iter = 25;
    double f1_tol = 1e-9;   ///< on |F1|_inf / max(|rho|_inf, 1)
    double f2_tol = 1e-10;  ///< on |F2| / M0
    double clip_reject = 1e-8;
    double rcond_min = 1e-14;
    int max_halvings = 12;
};

struct SeedOptions {
    RadialConfig radial;
    NewtonOptions newton;
    double margin_factor = 2.5;  ///< grid extents must reach margin_factor * R(a0)
    bool check_hypotheses = true;
};

/// Builds the kappa = 0 state from the radial profile at a0, sets problem.M0 to its discrete
/// mass and polishes it with Newton. Throws SeedRejected.
SolutionState initial_state(Problem& problem, double a0, const SeedOptions& opt = {});

/// State at (rho, alpha, kappa) with U, residual norms and mass error filled in.
SolutionState make_state(const Problem& problem, const ScalarField& rho, double alpha, double kappa);

struct Residual {
    ScalarField F1;
    double F2 = 0.0;
};

Residual residual(const Problem& problem, const SolutionState& state);

/// Derivative of (F1, F2) with respect to (rho, alpha, kappa) at a state.
class BorderedJacobian {
public:
    BorderedJacobian(const Problem& problem, const SolutionState& state);

    /// J applied to a direction; returns the F1 block followed by the F2 entry.
    Eigen::VectorXd apply(const Eigen::VectorXd& drho, double dalpha, double dkappa) const;
    /// Dense (N + 1) x (N + 2) matrix with columns rho, alpha, kappa. Only for small grids.
    Eigen::MatrixXd dense() const;

    const Eigen::VectorXd& w_u() const { return w_u_; }
    const Eigen::VectorXd& w_kappa() const { return w_kappa_; }

private:
    const Problem& problem_;
    Eigen::VectorXd w_u_, w_kappa_;
};

BorderedJacobian assemble_jacobian(const Problem& problem, const SolutionState& state);

/// Pseudo-arclength constraint <x - base, tangent>_W = ds with W = (cell volumes, 1, kappa_weight).
struct ArclengthConstraint {
    Eigen::VectorXd base_rho, tangent_rho;
    double base_alpha = 0.0, tangent_alpha = 0.0;
    double base_kappa = 0.0, tangent_kappa = 0.0;
    double ds = 0.0;
    double kappa_weight = 1.0;
};

/// Damped Newton from `guess`. FixedKappa mode when `arclength` is empty. Throws NoConvergence or
/// SingularJacobian.
SolutionState newton_correct(const Problem& problem, const SolutionState& guess, const NewtonOptions& opt,
                             const std::optional<ArclengthConstraint>& arclength = std::nullopt);

enum class Termination { KappaMax, SupportReachedMargin, DensityExceeded, StepCollapse, UserStop };

std::string to_string(Termination t);

struct ContinuationConfig {
    double ds0 = 0.05;
    double ds_min = 1e-6;
    double ds_max = 0.5;
    double kappa_max = 10.0;
    double sup_rho_max = 1e3;
    double kappa_weight = 1.0;
    double grow = 1.3;
    int fast_iters = 4;          ///< grow ds after convergence within this many iterations
    int max_steps = 100;
    double direction = 1.0;      ///< sign of the first kappa step
    std::size_t margin_rings = 2;
    NewtonOptions newton;
};

struct StepRecord {
    int step = 0;
    double ds = 0.0;  ///< arclength used by the accepted step
    int attempts = 0;
    std::string note;
};

struct ContinuationCurve {
    std::vector<SolutionState> states;
    std::vector<StepRecord> history;
    Termination termination = Termination::UserStop;
    double ds_next = 0.0;
};

/// Called after each accepted state with its step number and the ds proposed for the next step.
using AcceptCallback = std::function<void(int step, const SolutionState&, double ds_next)>;

/// Traces the curve from the seed; states[0] is the seed.
ContinuationCurve continue_curve(const Problem& problem, const SolutionState& seed, const ContinuationConfig& cfg,
                                 const AcceptCallback& on_accept = {});

/// Continues after the accepted state `last` (step number `step`). With `previous` the predictor
/// is the secant through both; without it `last` is treated as the seed.
ContinuationCurve resume_curve(const Problem& problem, const SolutionState* previous, const SolutionState& last,
                               int step, double ds_next, const ContinuationConfig& cfg,
                               const AcceptCallback& on_accept = {});

/// True when rho is nonzero on one of the outermost `rings` node rings in r or z.
bool support_reaches_margin(const ScalarField& rho, std::size_t rings);

}  // namespace vps
