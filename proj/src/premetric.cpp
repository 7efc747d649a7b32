#include "renyi_ot/divergence.hpp"
#include "renyi_ot/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace renyi_ot {

namespace {

struct Probe {
  double log_eps = 0.0;
  double divergence = 0.0;
  SolveReport report;
};

SolveReport independent_report(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                               double alpha) {
  SolveReport report{validate_plan(outer_product(r, c), r, c, 1e-12),
                     RegularizerSpec{RegularizerKind::Renyi, alpha, 0.0}};
  report.transport_cost = frobenius_dot(cost.entries(), report.plan.entries());
  report.objective_value = report.transport_cost;
  report.divergence_value = 0.0;
  report.termination = Termination::IterateResidual;
  return report;
}

}  // namespace

PremetricResult premetric_ball_solve(const CostMatrix& cost, const Histogram& r,
                                     const Histogram& c, double alpha, double gamma,
                                     const PremetricConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw Error(ErrorCode::InvalidArgument, "gamma must be a finite nonnegative number");
  if (!(cfg.eps_lo > 0.0 && cfg.eps_lo < cfg.eps_hi) || cfg.max_bisections < 1 ||
      !(cfg.divergence_tol > 0.0))
    throw Error(ErrorCode::InvalidArgument, "invalid bisection settings");
  if (cost.size() != r.size() || c.size() != r.size())
    throw Error(ErrorCode::ShapeMismatch, "cost and marginals have different sizes");

  auto finish = [&](SolveReport report, double eps_star) {
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return PremetricResult{std::move(report), eps_star};
  };

  if (gamma == 0.0)
    return finish(independent_report(cost, r, c, alpha), std::numeric_limits<double>::infinity());

  SolveReport exact = exact_ot(cost, r, c);
  const double exact_div = renyi_to_independent(exact.plan.entries(), r, c, alpha).value;
  if (gamma >= exact_div) {
    exact.divergence_value = exact_div;
    exact.regularizer = RegularizerSpec{RegularizerKind::Renyi, alpha, 0.0};
    return finish(std::move(exact), 0.0);
  }

  auto probe = [&](double log_eps) {
    SolveReport rep = renyi_mirror_descent(cost, r, c, alpha, std::exp(log_eps), cfg.solver);
    const double d = rep.divergence_value;
    return Probe{log_eps, d, std::move(rep)};
  };
  auto close_enough = [&](const Probe& p) {
    return std::abs(p.divergence - gamma) <= cfg.divergence_tol;
  };

  // Divergence decreases as eps grows: lo carries the larger divergence.
  Probe lo = probe(std::log(cfg.eps_lo));
  if (close_enough(lo)) return finish(std::move(lo.report), std::exp(lo.log_eps));
  Probe hi = probe(std::log(cfg.eps_hi));
  if (close_enough(hi)) return finish(std::move(hi.report), std::exp(hi.log_eps));
  if (!(lo.divergence > gamma && hi.divergence < gamma)) {
    std::ostringstream os;
    os << "divergence does not bracket gamma=" << gamma << ": R(eps=" << cfg.eps_lo
       << ")=" << lo.divergence << ", R(eps=" << cfg.eps_hi << ")=" << hi.divergence;
    throw Error(ErrorCode::BisectionFailure, os.str());
  }

  for (int k = 0; k < cfg.max_bisections; ++k) {
    Probe mid = probe(0.5 * (lo.log_eps + hi.log_eps));
    if (close_enough(mid)) return finish(std::move(mid.report), std::exp(mid.log_eps));
    if (mid.divergence > lo.divergence + cfg.divergence_tol ||
        mid.divergence < hi.divergence - cfg.divergence_tol) {
      std::ostringstream os;
      os << "divergence is not monotone in eps near eps=" << std::exp(mid.log_eps);
      throw Error(ErrorCode::BisectionFailure, os.str());
    }
    if (mid.divergence > gamma)
      lo = std::move(mid);
    else
      hi = std::move(mid);
  }
  std::ostringstream os;
  os << "no eps in [" << std::exp(lo.log_eps) << ", " << std::exp(hi.log_eps)
     << "] reached divergence " << gamma << " within " << cfg.divergence_tol;
  throw Error(ErrorCode::BisectionFailure, os.str());
}

}  // namespace renyi_ot
