#pragma once

#include "renyi_ot/core.hpp"

namespace renyi_ot {

struct SinkhornConfig {
  double marginal_tol = 1e-4;  // 2-norm of the marginal violation
  int max_sweeps = 10000;
  bool log_domain = false;  // run every sweep through log-sum-exp

  void validate() const;
};

/// Outcome of a diagonal scaling run. `plan` is the last iterate even when
/// the tolerance was not met.
struct ScalingResult {
  Matrix plan;
  double residual = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Raised by sinkhorn_project when the sweep budget runs out; carries the
/// best iterate and its residual.
class SinkhornNotConverged : public Error {
 public:
  explicit SinkhornNotConverged(ScalingResult best);
  const ScalingResult& best() const noexcept { return best_; }

 private:
  ScalingResult best_;
};

/// Scales exp(log_kernel) to diag(u) exp(log_kernel) diag(v) with row sums r
/// and column sums c. Entries equal to -inf are structural zeros. Rows and
/// columns with zero marginal are frozen at zero. Sweeps go rows first, then
/// columns, starting from u = v = 1; the residual is checked after every full
/// sweep. Linear-domain sweeps are used while they are numerically safe; on
/// overflow or underflow the scalings are absorbed into the log kernel and a
/// log-domain sweep is taken. Never throws on non-convergence.
ScalingResult scale_log_kernel(const Matrix& log_kernel, const Histogram& r, const Histogram& c,
                               const SinkhornConfig& cfg);

/// KL projection argmin_{P in U(r,c)} KL(P | X) of a nonnegative matrix X.
/// Throws InfeasibleKernel when a row or column required by r or c is
/// identically zero, and SinkhornNotConverged when max_sweeps is exhausted.
TransportPlan sinkhorn_project(const Matrix& kernel, const Histogram& r, const Histogram& c,
                               const SinkhornConfig& cfg = {});

/// Entropic baseline min_{P in U(r,c)} <M,P> + eps KL(P | r c^T), solved by
/// scaling the kernel r c^T * exp(-M / eps). With log_domain == false the
/// plain kernel must not underflow on any required row or column, otherwise
/// NumericalUnderflow is raised (retry with log_domain = true). A run that
/// exhausts max_sweeps returns its last iterate with termination
/// MaxIterations.
SolveReport kl_regularized_ot(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                              double epsilon, const SinkhornConfig& cfg = {});

/// Picks the log domain for eps <= 1e-2, the linear domain otherwise.
SinkhornConfig kl_baseline_config(double epsilon, SinkhornConfig base = {});

}  // namespace renyi_ot
