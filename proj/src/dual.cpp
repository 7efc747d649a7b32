#include "renyi_ot/divergence.hpp"
#include "renyi_ot/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace renyi_ot {

void DualConfig::validate() const {
  if (!(initial_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial_step must be > 0");
  if (!(shrink > 0.0 && shrink < 1.0))
    throw Error(ErrorCode::InvalidArgument, "shrink must lie in (0, 1)");
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "grad_tol must be > 0");
  if (!(min_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "min_step must be > 0");
}

void NewtonConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "grad_tol must be > 0");
}

namespace {

using Index = Eigen::Index;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_inputs(const CostMatrix& cost, const Histogram& r, const Histogram& c, double alpha) {
  if (cost.size() != r.size() || c.size() != r.size())
    throw Error(ErrorCode::ShapeMismatch, "cost and marginals have different sizes");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1)");
}

void check_dual_vector(const Vector& q, const Histogram& r) {
  if (q.size() != static_cast<Index>(2 * r.size()))
    throw Error(ErrorCode::DimensionMismatch, "dual vector must have length 2N");
}

// Largest q_i + q_{N+j} - m_ij over supp(r c^T).
double max_slack(const Vector& q, const Matrix& m, const Histogram& r, const Histogram& c) {
  const Index n = m.rows();
  double worst = kNegInf;
  for (auto i : r.support())
    for (auto j : c.support()) {
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      worst = std::max(worst, q[ii] + q[n + jj] - m(ii, jj));
    }
  return worst;
}

// Log-domain pieces of the dual at q, all restricted to supp(r c^T):
//   log_s  = ln sum (m - L*q)^(alpha/(alpha-1)) r_i c_j
//   log_w  = (1/(alpha-1)) ln(m - L*q) + ln r_i + ln c_j
struct DualTerms {
  bool feasible = false;
  double log_s = kNegInf;
  Matrix log_w;
};

DualTerms dual_terms(const Vector& q, const Matrix& m, const Histogram& r, const Histogram& c,
                     double alpha) {
  const Index n = m.rows();
  DualTerms t;
  t.log_w = Matrix::Constant(n, n, kNegInf);
  const double b = 1.0 / (alpha - 1.0);
  double shift = kNegInf;
  Matrix log_terms = Matrix::Constant(n, n, kNegInf);
  for (auto i : r.support())
    for (auto j : c.support()) {
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      const double d = m(ii, jj) - q[ii] - q[n + jj];
      if (!(d > 0.0)) return t;
      const double log_d = std::log(d);
      const double log_rc = std::log(r[i]) + std::log(c[j]);
      t.log_w(ii, jj) = b * log_d + log_rc;
      log_terms(ii, jj) = t.log_w(ii, jj) + log_d;  // exponent alpha/(alpha-1) = b + 1
      shift = std::max(shift, log_terms(ii, jj));
    }
  CompensatedSum s;
  for (auto i : r.support())
    for (auto j : c.support())
      s.add(std::exp(log_terms(static_cast<Index>(i), static_cast<Index>(j)) - shift));
  t.log_s = shift + std::log(s.value());
  t.feasible = std::isfinite(t.log_s);
  return t;
}

double linear_part(const Vector& q, const Histogram& r, const Histogram& c) {
  const Index n = static_cast<Index>(r.size());
  CompensatedSum s;
  for (Index i = 0; i < n; ++i) {
    if (r.weights()[i] > 0.0) s.add(q[i] * r.weights()[i]);
    if (c.weights()[i] > 0.0) s.add(q[n + i] * c.weights()[i]);
  }
  return s.value();
}

double phi(const Vector& q, const DualTerms& t, const Histogram& r, const Histogram& c,
           double alpha, double epsilon) {
  if (!t.feasible) return kNegInf;
  return linear_part(q, r, c) - epsilon * t.log_s + dual_constant(alpha, epsilon);
}

Vector gradient_from_terms(const DualTerms& t, const Histogram& r, const Histogram& c,
                           double alpha, double epsilon) {
  const Index n = static_cast<Index>(r.size());
  const double factor = epsilon * alpha / (1.0 - alpha);
  Vector row_sum = Vector::Zero(n), col_sum = Vector::Zero(n);
  for (auto i : r.support())
    for (auto j : c.support()) {
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      const double w = std::exp(t.log_w(ii, jj) - t.log_s);
      row_sum[ii] += w;
      col_sum[jj] += w;
    }
  Vector g(2 * n);
  for (Index i = 0; i < n; ++i) {
    g[i] = r.weights()[i] - factor * row_sum[i];
    g[n + i] = c.weights()[i] - factor * col_sum[i];
  }
  return g;
}

}  // namespace

double dual_constant(double alpha, double epsilon) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in (0, 1)");
  const double k = alpha / (1.0 - alpha);
  const double c_alpha = k * (std::log(k) - 1.0);
  return -epsilon * k * std::log(epsilon) - epsilon * c_alpha;
}

double dual_objective(const Vector& q, const CostMatrix& cost, const Histogram& r,
                      const Histogram& c, double alpha, double epsilon) {
  check_inputs(cost, r, c, alpha);
  check_dual_vector(q, r);
  const DualTerms t = dual_terms(q, cost.entries(), r, c, alpha);
  return phi(q, t, r, c, alpha, epsilon);
}

Vector dual_gradient(const Vector& q, const CostMatrix& cost, const Histogram& r,
                     const Histogram& c, double alpha, double epsilon) {
  check_inputs(cost, r, c, alpha);
  check_dual_vector(q, r);
  const DualTerms t = dual_terms(q, cost.entries(), r, c, alpha);
  if (!t.feasible) throw Error(ErrorCode::InfeasibleDuals, "q is not strictly dual feasible");
  return gradient_from_terms(t, r, c, alpha, epsilon);
}

TransportPlan plan_from_duals(const Vector& q, const CostMatrix& cost, const Histogram& r,
                              const Histogram& c, double alpha, double tol, bool reproject) {
  check_inputs(cost, r, c, alpha);
  check_dual_vector(q, r);
  const DualTerms t = dual_terms(q, cost.entries(), r, c, alpha);
  if (!t.feasible) throw Error(ErrorCode::InfeasibleDuals, "q is not strictly dual feasible");
  const Index n = static_cast<Index>(r.size());
  double shift = kNegInf;
  for (auto i : r.support())
    for (auto j : c.support())
      shift = std::max(shift, t.log_w(static_cast<Index>(i), static_cast<Index>(j)));
  Matrix plan = Matrix::Zero(n, n);
  CompensatedSum total;
  for (auto i : r.support())
    for (auto j : c.support()) {
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      plan(ii, jj) = std::exp(t.log_w(ii, jj) - shift);
      total.add(plan(ii, jj));
    }
  plan /= total.value();
  if (reproject) return sinkhorn_project(plan, r, c, SinkhornConfig{});
  return validate_plan(plan, r, c, tol);
}

namespace {

// Fills the report fields shared by both dual solvers.
SolveReport dual_report(const Vector& q, const CostMatrix& cost, const Histogram& r,
                        const Histogram& c, double alpha, double epsilon,
                        std::vector<TraceEntry> trace, int iterations, Termination termination,
                        std::chrono::steady_clock::time_point start) {
  // Marginal residual of the recovered plan is only meaningful at the end.
  TransportPlan plan = plan_from_duals(q, cost, r, c, alpha, std::numeric_limits<double>::max());
  if (!trace.empty()) trace.back().marginal_residual = plan.marginal_residual();

  SolveReport report{std::move(plan), RegularizerSpec::renyi(alpha, epsilon)};
  report.transport_cost = frobenius_dot(cost.entries(), report.plan.entries());
  report.divergence_value = renyi_to_independent(report.plan.entries(), r, c, alpha).value;
  report.objective_value = report.transport_cost + epsilon * report.divergence_value;
  report.iterations = iterations;
  report.trace = std::move(trace);
  report.termination = termination;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

DualResult dual_subgradient(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                            double alpha, double epsilon, const DualConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_inputs(cost, r, c, alpha);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  cfg.validate();
  const Matrix& m = cost.entries();
  const Index n = static_cast<Index>(r.size());

  Vector q = Vector::Constant(2 * n, -1.0);
  DualTerms terms = dual_terms(q, m, r, c, alpha);
  if (!terms.feasible)
    throw Error(ErrorCode::InfeasibleDuals, "q0 = -1 is infeasible (negative costs?)");
  double value = phi(q, terms, r, c, alpha, epsilon);

  std::vector<DualTraceEntry> dual_trace;
  dual_trace.push_back({0, value, 0.0, max_slack(q, m, r, c)});
  std::vector<TraceEntry> trace;
  Termination termination = Termination::MaxIterations;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_iters; ++iter) {
    const Vector g = gradient_from_terms(terms, r, c, alpha, epsilon);
    if (g.norm() <= cfg.grad_tol) {
      termination = Termination::IterateResidual;
      --iter;
      break;
    }
    double a = cfg.initial_step;
    bool accepted = false;
    Vector trial;
    DualTerms trial_terms;
    double trial_value = kNegInf;
    while (a >= cfg.min_step) {
      trial = q + a * g;
      if (max_slack(trial, m, r, c) < 0.0) {
        trial_terms = dual_terms(trial, m, r, c, alpha);
        trial_value = phi(trial, trial_terms, r, c, alpha, epsilon);
        if (trial_terms.feasible && trial_value >= value) {
          accepted = true;
          break;
        }
      }
      a *= cfg.shrink;
    }
    if (!accepted) {
      termination = Termination::StepCollapse;
      --iter;
      break;
    }
    q = std::move(trial);
    terms = std::move(trial_terms);
    value = trial_value;
    dual_trace.push_back({iter, value, a, max_slack(q, m, r, c)});
    trace.push_back({iter, value, a, 0.0});
  }
  if (iter > cfg.max_iters) iter = cfg.max_iters;

  SolveReport report =
      dual_report(q, cost, r, c, alpha, epsilon, std::move(trace), iter, termination, start);
  return DualResult{std::move(q), value, std::move(dual_trace), std::move(report)};
}

DualResult dual_newton(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                       double alpha, double epsilon, const NewtonConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_inputs(cost, r, c, alpha);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  cfg.validate();
  const Matrix& m = cost.entries();
  const Index n = static_cast<Index>(r.size());
  const auto& rows = r.support();
  const auto& cols = c.support();

  // Free coordinates: supported rows, then supported columns but the last.
  std::vector<Index> free;
  for (auto i : rows) free.push_back(static_cast<Index>(i));
  for (std::size_t k = 0; k + 1 < cols.size(); ++k) free.push_back(n + static_cast<Index>(cols[k]));
  const Index dim = static_cast<Index>(free.size());

  Vector q = Vector::Constant(2 * n, -1.0);
  DualTerms terms = dual_terms(q, m, r, c, alpha);
  if (!terms.feasible)
    throw Error(ErrorCode::InfeasibleDuals, "q0 = -1 is infeasible (negative costs?)");

  const double k1 = epsilon * alpha / (1.0 - alpha);  // -eps (b+1), b = 1/(alpha-1)
  const double k2 = k1 / (1.0 - alpha);                // eps (b+1) b
  double value = phi(q, terms, r, c, alpha, epsilon);
  std::vector<DualTraceEntry> dual_trace{{0, value, 0.0, max_slack(q, m, r, c)}};
  std::vector<TraceEntry> trace;
  Termination termination = Termination::MaxIterations;
  int iter = 0;
  while (iter < cfg.max_iters) {
    const Vector g = gradient_from_terms(terms, r, c, alpha, epsilon);
    const double g_norm = g.lpNorm<1>();
    if (g_norm <= cfg.grad_tol) {
      termination = Termination::IterateResidual;
      break;
    }

    // -Hess Phi = k2 * L diag(w/x) L^T - eps (b+1)^2 a a^T with w = u / S
    // the normalized plan, x = m - L*q and a = L w.
    Matrix full = Matrix::Zero(2 * n, 2 * n);
    Vector a = Vector::Zero(2 * n);
    for (auto i : rows)
      for (auto j : cols) {
        const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
        const double w = std::exp(terms.log_w(ii, jj) - terms.log_s);
        const double h = k2 * w / (m(ii, jj) - q[ii] - q[n + jj]);
        full(ii, ii) += h;
        full(n + jj, n + jj) += h;
        full(ii, n + jj) += h;
        full(n + jj, ii) += h;
        a[ii] += w;
        a[n + jj] += w;
      }
    const double a_scale = k1 * k1 / epsilon;
    Matrix hess(dim, dim);
    Vector rhs(dim);
    for (Index u = 0; u < dim; ++u) {
      rhs[u] = g[free[u]];
      for (Index v = 0; v < dim; ++v)
        hess(u, v) = full(free[u], free[v]) - a_scale * a[free[u]] * a[free[v]];
    }
    Vector step = hess.ldlt().solve(rhs);
    if (!step.allFinite() || !(step.dot(rhs) > 0.0)) step = rhs;  // gradient fallback
    Vector direction = Vector::Zero(2 * n);
    for (Index u = 0; u < dim; ++u) direction[free[u]] = step[u];
    const double slope = g.dot(direction);

    // Largest step keeping m - L*q positive, then backtracking.
    double t = 1.0;
    for (auto i : rows)
      for (auto j : cols) {
        const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
        const double dx = direction[ii] + direction[n + jj];
        if (dx > 0.0) t = std::min(t, 0.99 * (m(ii, jj) - q[ii] - q[n + jj]) / dx);
      }
    bool accepted = false;
    Vector trial;
    DualTerms trial_terms;
    double trial_value = kNegInf;
    for (; t >= 1e-12; t *= 0.5) {
      trial = q + t * direction;
      if (!(max_slack(trial, m, r, c) < 0.0)) continue;
      trial_terms = dual_terms(trial, m, r, c, alpha);
      if (!trial_terms.feasible) continue;
      trial_value = phi(trial, trial_terms, r, c, alpha, epsilon);
      if (trial_value >= value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      // Near the optimum Phi changes below its rounding error; a smaller
      // residual is then the only usable signal.
      if (trial_value >= value - 1e-14 * (1.0 + std::abs(value)) &&
          gradient_from_terms(trial_terms, r, c, alpha, epsilon).lpNorm<1>() < g_norm) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      termination = Termination::StepCollapse;
      break;
    }
    ++iter;
    q = std::move(trial);
    terms = std::move(trial_terms);
    value = std::max(value, trial_value);
    dual_trace.push_back({iter, trial_value, t, max_slack(q, m, r, c)});
    trace.push_back({iter, trial_value, t, 0.0});
  }

  SolveReport report =
      dual_report(q, cost, r, c, alpha, epsilon, std::move(trace), iter, termination, start);
  value = phi(q, terms, r, c, alpha, epsilon);
  return DualResult{std::move(q), value, std::move(dual_trace), std::move(report)};
}

}  // namespace renyi_ot
