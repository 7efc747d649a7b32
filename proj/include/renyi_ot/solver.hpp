#pragma once

#include "renyi_ot/core.hpp"
#include "renyi_ot/projection.hpp"

#include <optional>
#include <utility>
#include <variant>

namespace renyi_ot {

// ---------------------------------------------------------------------------
// Step-size rules for the mirror-descent solvers.

/// Generalized Polyak step (f(P_k) - f_hat_k) / (c |g_k|^2). The target
/// f_hat_k is the best objective seen so far minus a slack delta_k, and
/// delta_k is halved whenever an iteration fails to improve that record by
/// delta_k. delta0 <= 0 selects 1e-2 * f(P_0).
struct PolyakRule {
  double c = 1.0;
  double delta0 = 0.0;
};

/// Fixed eta_k = eta. Heuristic: no convergence guarantee.
struct ConstantRule {
  double eta = 1.0;
};

/// Backtracking on the relative-smoothness bound
///   f(P+) <= f(P) + <g, P+ - P> + KL(P+ | P) / eta,
/// halving eta until it holds and doubling it after every accepted step.
/// A step is also rejected when some entry on supp(r c^T) changes by more
/// than a factor exp(max_log_ratio).
struct ArmijoRule {
  double eta0 = 1.0;
  double shrink = 0.5;
  double grow = 2.0;
  double max_log_ratio = 10.0;
};

using StepRule = std::variant<PolyakRule, ConstantRule, ArmijoRule>;

std::string step_rule_label(const StepRule& rule);

/// (f_curr - f_best_est) / (c |grad|_F^2). Throws ZeroGradient when grad
/// vanishes; returns 0 when f_curr == f_best_est.
double polyak_step(double f_curr, double f_best_est, const Matrix& grad, double c_const);

/// Gradient with its r/c-potential component removed: the Frobenius
/// projection onto the directions tangent to U(r, c) inside supp(r c^T).
/// Adding a_i + b_j to a gradient does not change a projected mirror step, so
/// this is the part the step-size rules measure.
Matrix tangent_gradient(const Matrix& grad, const Histogram& r, const Histogram& c);

struct MirrorDescentConfig {
  StepRule step_rule = ArmijoRule{};
  double iterate_tol = 1e-6;  // Frobenius norm of P_k - P_{k-1}
  int max_iters = 5000;
  SinkhornConfig inner{};
  // Starting plan; r c^T when empty. Must be interior to U(r, c).
  std::optional<Matrix> initial_plan;

  void validate() const;
};

/// Floor applied to on-support entries after every projection.
inline constexpr double kPlanFloor = 1e-300;
/// Lower clamp on the (row-centered) exponent of the multiplicative update.
inline constexpr double kExponentFloor = -700.0;

/// Mirror descent with KL projections for
///   min_{P in U(r,c)} <M,P> + eps R_alpha(P | r c^T).
/// P_0 = r c^T; P_k = SK(P_{k-1} * exp(-eta_k grad f(P_{k-1})), r, c).
/// Stops when |P_k - P_{k-1}|_F <= iterate_tol (IterateResidual), on
/// max_iters (MaxIterations, best iterate returned) or when the step rule
/// can no longer produce a positive step (StepCollapse). Inner projection
/// failures raise InnerProjectionFailure.
SolveReport renyi_mirror_descent(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                                 double alpha, double epsilon,
                                 const MirrorDescentConfig& cfg = {});

/// Same scheme for <M,P> + eps D_q(P | r c^T).
SolveReport tsallis_mirror_descent(const CostMatrix& cost, const Histogram& r,
                                   const Histogram& c, double q, double epsilon,
                                   const MirrorDescentConfig& cfg = {});

/// Same scheme for <M,P> - eps H_q(P) (Tsallis entropy). divergence_value in
/// the report is -H_q(P).
SolveReport tsallis_entropy_mirror_descent(const CostMatrix& cost, const Histogram& r,
                                           const Histogram& c, double q, double epsilon,
                                           const MirrorDescentConfig& cfg = {});

// ---------------------------------------------------------------------------
// Unregularized baseline.

/// Exact min_{P in U(r,c)} <M,P> by the transportation simplex method:
/// north-west-corner basis, u-v potentials, most-negative reduced cost
/// pricing that falls back to Bland's rule (smallest index for entering and
/// leaving cells) during long runs of degenerate pivots. Returns a vertex of
/// U(r, c).
SolveReport exact_ot(const CostMatrix& cost, const Histogram& r, const Histogram& c);

// ---------------------------------------------------------------------------
// Dual subgradient ascent.

struct DualConfig {
  double initial_step = 10.0;
  double shrink = 0.5;
  int max_iters = 20000;
  double grad_tol = 1e-9;  // stop once |grad Phi|_2 falls below this
  double min_step = 1e-16;

  void validate() const;
};

/// Phi(q) = <q, [r; c]> - eps ln <(M - L*q)^(alpha/(alpha-1)), r c^T> + C_{alpha,eps}
/// where (L*q)_ij = q_i + q_{N+j}. Returns -inf outside the open domain
/// L*q < M on supp(r c^T).
double dual_objective(const Vector& q, const CostMatrix& cost, const Histogram& r,
                      const Histogram& c, double alpha, double epsilon);

/// Gradient of dual_objective (in R^{2N}).
Vector dual_gradient(const Vector& q, const CostMatrix& cost, const Histogram& r,
                     const Histogram& c, double alpha, double epsilon);

/// C_{alpha,eps} = -eps alpha/(1-alpha) ln eps - eps C_alpha with
/// C_alpha = alpha/(1-alpha) (ln(alpha/(1-alpha)) - 1).
double dual_constant(double alpha, double epsilon);

struct DualTraceEntry {
  int iteration = 0;
  double value = 0.0;      // Phi(q_k)
  double step = 0.0;       // accepted a_k
  double max_slack = 0.0;  // max_ij (q_i + q_{N+j} - m_ij) over supp(r c^T), < 0
};

struct DualResult {
  Vector q;
  double value = 0.0;  // Phi(q)
  std::vector<DualTraceEntry> dual_trace;
  SolveReport report;  // plan recovered from q
};

/// Subgradient ascent from q_0 = -1: backtracks a_k (from initial_step, by
/// shrink) until q + a g stays strictly feasible and Phi does not decrease.
DualResult dual_subgradient(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                            double alpha, double epsilon, const DualConfig& cfg = {});

struct NewtonConfig {
  int max_iters = 20000;
  double grad_tol = 1e-11;  // stop once |grad Phi|_1 falls below this

  void validate() const;
};

/// Damped Newton ascent on Phi from q_0 = -1. Phi is invariant under
/// q_i += k, q_{N+j} -= k, so the last supported column coordinate is held
/// fixed and the Newton system has at most 2N-1 unknowns. Steps backtrack
/// until q stays strictly feasible and Phi increases (Armijo). For small
/// eps alpha, Phi resembles a weakly weighted log barrier and steps stay
/// short, so runs take thousands of iterations there. Since
/// grad Phi is the marginal residual of the recovered plan, a converged run
/// also certifies the primal optimum through a vanishing duality gap.
DualResult dual_newton(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                       double alpha, double epsilon, const NewtonConfig& cfg = {});

/// p_ij proportional to (m_ij - q_i - q_{N+j})^(1/(alpha-1)) r_i c_j on
/// supp(r c^T), normalized to unit mass. Marginals hold only at the dual
/// optimum; the residual is reported and validated against `tol`. With
/// `reproject` the result is KL-projected onto U(r, c) afterwards.
TransportPlan plan_from_duals(const Vector& q, const CostMatrix& cost, const Histogram& r,
                              const Histogram& c, double alpha, double tol = 2.0,
                              bool reproject = false);

// ---------------------------------------------------------------------------
// Renyi-ball premetric.

struct PremetricConfig {
  // Divergence noise from a looser stopping test exceeds divergence_tol at
  // small eps and breaks the monotonicity check.
  MirrorDescentConfig solver = [] {
    MirrorDescentConfig s;
    s.iterate_tol = 1e-7;
    return s;
  }();
  double eps_lo = 1e-8;
  double eps_hi = 1e8;
  int max_bisections = 60;
  double divergence_tol = 1e-4;
};

struct PremetricResult {
  SolveReport report;
  double epsilon_star = 0.0;
};

/// min <M,P> over {P in U(r,c) : R_alpha(P | r c^T) <= gamma}. Solved
/// through the penalized problem, bisecting eps on a log scale until the
/// divergence of the penalized optimum matches gamma.
PremetricResult premetric_ball_solve(const CostMatrix& cost, const Histogram& r,
                                     const Histogram& c, double alpha, double gamma,
                                     const PremetricConfig& cfg = {});

}  // namespace renyi_ot
