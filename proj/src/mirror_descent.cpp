#include "renyi_ot/divergence.hpp"
#include "renyi_ot/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

namespace renyi_ot {

void MirrorDescentConfig::validate() const {
  if (!(iterate_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "iterate_tol must be > 0");
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  inner.validate();
  if (const auto* p = std::get_if<PolyakRule>(&step_rule)) {
    if (!(p->c > 0.0)) throw Error(ErrorCode::InvalidArgument, "Polyak c must be > 0");
  } else if (const auto* k = std::get_if<ConstantRule>(&step_rule)) {
    if (!(k->eta > 0.0)) throw Error(ErrorCode::InvalidArgument, "constant eta must be > 0");
  } else if (const auto* a = std::get_if<ArmijoRule>(&step_rule)) {
    if (!(a->eta0 > 0.0) || !(a->shrink > 0.0 && a->shrink < 1.0) || !(a->grow >= 1.0) ||
        !(a->max_log_ratio > 0.0))
      throw Error(ErrorCode::InvalidArgument, "invalid backtracking parameters");
  }
}

namespace {

using Index = Eigen::Index;
using Clock = std::chrono::steady_clock;

struct Objective {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  std::function<double(const Matrix&)> divergence;
  RegularizerSpec spec;
};

class MirrorDescent {
 public:
  MirrorDescent(const Objective& obj, const CostMatrix& cost, const Histogram& r,
                const Histogram& c, const MirrorDescentConfig& cfg)
      : obj_(obj), cost_(cost), r_(r), c_(c), cfg_(cfg), inner_(cfg.inner) {
    // Projections looser than the stopping test make the iterates jitter
    // by more than iterate_tol forever.
    inner_.marginal_tol = std::min(inner_.marginal_tol, 0.1 * cfg.iterate_tol);
  }

  SolveReport run() {
    const auto start = Clock::now();
    Matrix plan = starting_plan();
    double f = obj_.value(plan);
    Matrix best_plan = plan;
    double best_f = f;

    std::vector<TraceEntry> trace;
    trace.push_back({0, f, 0.0, marginal_residual(plan, r_, c_)});

    // Polyak bookkeeping
    double record = f;
    double delta = 0.0;
    if (const auto* p = std::get_if<PolyakRule>(&cfg_.step_rule))
      delta = p->delta0 > 0.0 ? p->delta0 : 1e-2 * std::max(std::abs(f), 1e-12);
    // Backtracking bookkeeping
    double eta_state = 0.0;
    if (const auto* a = std::get_if<ArmijoRule>(&cfg_.step_rule)) eta_state = a->eta0;

    Termination termination = Termination::MaxIterations;
    int iter = 0;
    for (iter = 1; iter <= cfg_.max_iters; ++iter) {
      const Matrix grad = obj_.gradient(plan);
      const Matrix tangent = tangent_gradient(grad, r_, c_);
      if (!(tangent.squaredNorm() > 0.0)) {
        termination = Termination::IterateResidual;  // stationary
        --iter;
        break;
      }

      double eta = 0.0;
      Step step;
      if (const auto* p = std::get_if<PolyakRule>(&cfg_.step_rule)) {
        eta = polyak_step(f, record - delta, tangent, p->c);
        if (!(eta > 0.0) || !std::isfinite(eta)) {
          termination = Termination::StepCollapse;
          --iter;
          break;
        }
        step = take_step(plan, grad, eta);
      } else if (const auto* k = std::get_if<ConstantRule>(&cfg_.step_rule)) {
        eta = k->eta;
        step = take_step(plan, grad, eta);
      } else {
        const auto& a = std::get<ArmijoRule>(cfg_.step_rule);
        eta = eta_state;
        bool accepted = false;
        while (true) {
          // A trial step whose projection fails counts as a rejection.
          step = take_step(plan, grad, eta, /*strict=*/false);
          if (step.projected && sufficient_decrease(plan, f, grad, step, eta, a.max_log_ratio)) {
            accepted = true;
            break;
          }
          eta *= a.shrink;
          if (eta < 1e-300) break;
        }
        if (!accepted) {
          termination = Termination::StepCollapse;
          --iter;
          break;
        }
        eta_state = eta * a.grow;
      }

      const double diff = (step.plan - plan).norm();
      if (std::get_if<PolyakRule>(&cfg_.step_rule) != nullptr) {
        if (step.value > record - delta) delta *= 0.5;
        record = std::min(record, step.value);
      }
      trace.push_back({iter, step.value, eta, step.residual});
      plan = std::move(step.plan);
      f = step.value;
      if (f < best_f) {
        best_f = f;
        best_plan = plan;
      }
      if (diff <= cfg_.iterate_tol) {
        termination = Termination::IterateResidual;
        break;
      }
    }
    if (iter > cfg_.max_iters) iter = cfg_.max_iters;

    Matrix final_plan = termination == Termination::MaxIterations ? best_plan : plan;
    final_plan /= final_plan.sum();
    const double residual = marginal_residual(final_plan, r_, c_);
    TransportPlan validated =
        validate_plan(final_plan, r_, c_, std::max(cfg_.inner.marginal_tol, residual));
    SolveReport report{std::move(validated), obj_.spec};
    report.transport_cost = frobenius_dot(cost_.entries(), report.plan.entries());
    report.divergence_value = obj_.divergence(report.plan.entries());
    report.objective_value =
        report.transport_cost + obj_.spec.epsilon * report.divergence_value;
    report.iterations = iter;
    report.trace = std::move(trace);
    report.termination = termination;
    report.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    return report;
  }

 private:
  struct Step {
    Matrix plan;
    double value = 0.0;
    double residual = 0.0;
    bool projected = true;
  };

  Matrix starting_plan() const {
    if (!cfg_.initial_plan) return outer_product(r_, c_);
    const Matrix& init = *cfg_.initial_plan;
    const Index n = static_cast<Index>(r_.size());
    if (init.rows() != n || init.cols() != n)
      throw Error(ErrorCode::ShapeMismatch, "initial plan has the wrong size");
    Matrix log_kernel = Matrix::Constant(n, n, -std::numeric_limits<double>::infinity());
    for (auto i : r_.support())
      for (auto j : c_.support()) {
        const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
        if (!(init(ii, jj) > 0.0))
          throw Error(ErrorCode::BoundaryPoint, "initial plan must be positive on supp(r c^T)");
        log_kernel(ii, jj) = std::log(init(ii, jj));
      }
    return project(log_kernel).plan;
  }

  Step take_step(const Matrix& plan, const Matrix& grad, double eta, bool strict = true) const {
    const Index n = plan.rows();
    Matrix log_kernel = Matrix::Constant(n, n, -std::numeric_limits<double>::infinity());
    for (auto i : r_.support()) {
      const auto ii = static_cast<Index>(i);
      double gmin = std::numeric_limits<double>::infinity();
      for (auto j : c_.support()) gmin = std::min(gmin, grad(ii, static_cast<Index>(j)));
      for (auto j : c_.support()) {
        const auto jj = static_cast<Index>(j);
        const double exponent = std::max(-eta * (grad(ii, jj) - gmin), kExponentFloor);
        log_kernel(ii, jj) = std::log(plan(ii, jj)) + exponent;
      }
    }
    ScalingResult scaled = project(log_kernel, strict);
    Step s;
    s.projected = scaled.converged;
    if (!s.projected) return s;
    s.residual = scaled.residual;
    s.plan = std::move(scaled.plan);
    s.value = obj_.value(s.plan);
    return s;
  }

  ScalingResult project(const Matrix& log_kernel, bool strict = true) const {
    ScalingResult scaled = scale_log_kernel(log_kernel, r_, c_, inner_);
    if (!scaled.converged && !strict) return scaled;
    if (!scaled.converged)
      throw Error(ErrorCode::InnerProjectionFailure,
                  "KL projection stopped at residual " + std::to_string(scaled.residual) +
                      " after " + std::to_string(scaled.sweeps) + " sweeps");
    for (auto i : r_.support())
      for (auto j : c_.support()) {
        double& x = scaled.plan(static_cast<Index>(i), static_cast<Index>(j));
        if (x < kPlanFloor) x = kPlanFloor;
      }
    return scaled;
  }

  bool sufficient_decrease(const Matrix& plan, double f, const Matrix& grad, const Step& step,
                           double eta, double max_log_ratio) const {
    if (!std::isfinite(step.value)) return false;
    CompensatedSum linear, bregman;
    for (auto i : r_.support())
      for (auto j : c_.support()) {
        const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
        const double p = plan(ii, jj), q = step.plan(ii, jj);
        if (std::abs(std::log(q / p)) > max_log_ratio) return false;
        linear.add(grad(ii, jj) * (q - p));
        bregman.add(q * std::log(q / p) - q + p);
      }
    const double model = f + linear.value() + bregman.value() / eta;
    return step.value <= model + 1e-12 * (1.0 + std::abs(f));
  }

  const Objective& obj_;
  const CostMatrix& cost_;
  const Histogram& r_;
  const Histogram& c_;
  const MirrorDescentConfig& cfg_;
  SinkhornConfig inner_;
};

void check_problem(const CostMatrix& cost, const Histogram& r, const Histogram& c) {
  if (cost.size() != r.size() || c.size() != r.size())
    throw Error(ErrorCode::ShapeMismatch, "cost and marginals have different sizes");
}

}  // namespace

SolveReport renyi_mirror_descent(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                                 double alpha, double epsilon, const MirrorDescentConfig& cfg) {
  check_problem(cost, r, c);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  const RegularizerSpec spec = RegularizerSpec::renyi(alpha, epsilon);
  cfg.validate();
  Objective obj{
      [&](const Matrix& p) { return renyi_objective(p, cost, r, c, alpha, epsilon); },
      [&](const Matrix& p) { return renyi_gradient(p, cost, r, c, alpha, epsilon); },
      [&](const Matrix& p) { return renyi_to_independent(p, r, c, alpha).value; },
      spec,
  };
  return MirrorDescent(obj, cost, r, c, cfg).run();
}

SolveReport tsallis_mirror_descent(const CostMatrix& cost, const Histogram& r,
                                   const Histogram& c, double q, double epsilon,
                                   const MirrorDescentConfig& cfg) {
  check_problem(cost, r, c);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  const RegularizerSpec spec = RegularizerSpec::tsallis(q, epsilon);
  cfg.validate();
  Objective obj{
      [&](const Matrix& p) { return tsallis_objective(p, cost, r, c, q, epsilon); },
      [&](const Matrix& p) { return tsallis_gradient(p, cost, r, c, q, epsilon); },
      [&](const Matrix& p) { return tsallis_to_independent(p, r, c, q).value; },
      spec,
  };
  return MirrorDescent(obj, cost, r, c, cfg).run();
}

SolveReport tsallis_entropy_mirror_descent(const CostMatrix& cost, const Histogram& r,
                                           const Histogram& c, double q, double epsilon,
                                           const MirrorDescentConfig& cfg) {
  check_problem(cost, r, c);
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  const RegularizerSpec spec = RegularizerSpec::tsallis_entropy(q, epsilon);
  cfg.validate();
  Objective obj{
      [&](const Matrix& p) { return tsallis_entropy_objective(p, cost, r, c, q, epsilon); },
      [&](const Matrix& p) { return tsallis_entropy_gradient(p, cost, r, c, q, epsilon); },
      [&](const Matrix& p) { return -tsallis_entropy(as_span(p), q); },
      spec,
  };
  return MirrorDescent(obj, cost, r, c, cfg).run();
}

}  // namespace renyi_ot
