#include "renyi_ot/projection.hpp"

#include "renyi_ot/divergence.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace renyi_ot {

void SinkhornConfig::validate() const {
  if (!(marginal_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "marginal_tol must be > 0");
  if (max_sweeps < 1) throw Error(ErrorCode::InvalidArgument, "max_sweeps must be >= 1");
}

SinkhornNotConverged::SinkhornNotConverged(ScalingResult best)
    : Error(ErrorCode::MaxSweepsExceeded,
            "Sinkhorn stopped after " + std::to_string(best.sweeps) + " sweeps at residual " +
                std::to_string(best.residual)),
      best_(std::move(best)) {}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Scalings outside [e^-200, e^200] are folded back into the log kernel.
constexpr double kAbsorbBound = 200.0;

using Index = Eigen::Index;

class Scaler {
 public:
  Scaler(const Matrix& log_kernel, const Histogram& r, const Histogram& c)
      : log_kernel_(log_kernel), r_(r), c_(c) {
    const Index n = static_cast<Index>(r.size());
    if (static_cast<Index>(c.size()) != n || log_kernel.rows() != n || log_kernel.cols() != n)
      throw Error(ErrorCode::ShapeMismatch, "kernel and marginals have different sizes");
    row_active_.assign(static_cast<std::size_t>(n), false);
    col_active_.assign(static_cast<std::size_t>(n), false);
    for (auto i : r.support()) row_active_[i] = true;
    for (auto j : c.support()) col_active_[j] = true;
    log_r_ = Vector::Constant(n, kNegInf);
    log_c_ = Vector::Constant(n, kNegInf);
    for (auto i : r.support()) log_r_[static_cast<Index>(i)] = std::log(r[i]);
    for (auto j : c.support()) log_c_[static_cast<Index>(j)] = std::log(c[j]);
    check_feasible();
    a_ = Vector::Zero(n);
    b_ = Vector::Zero(n);
    u_ = Vector::Zero(n);
    v_ = Vector::Zero(n);
    for (auto i : r.support()) u_[static_cast<Index>(i)] = 1.0;
    for (auto j : c.support()) v_[static_cast<Index>(j)] = 1.0;
  }

  ScalingResult run(const SinkhornConfig& cfg) {
    const Index n = log_kernel_.rows();
    rebuild_kernel();
    ScalingResult out;
    // The raw kernel may already satisfy the marginals.
    if (kernel_finite_) {
      const double res0 = marginal_residual(kernel_, r_, c_);
      if (res0 <= cfg.marginal_tol && std::abs(kernel_.sum() - 1.0) <= 1e-12) {
        out.plan = kernel_;
        out.residual = res0;
        out.converged = true;
        return out;
      }
    }
    bool log_mode = cfg.log_domain;
    Vector kv(n), ktu(n);
    int sweeps = 0;
    double residual = std::numeric_limits<double>::infinity();
    while (true) {
      if (log_mode) {
        log_sweep();
        ++sweeps;
        residual = log_row_residual();
        if (!cfg.log_domain) {
          rebuild_kernel();
          log_mode = false;
        }
      } else {
        if (sweeps > 0) {
          kv.noalias() = kernel_ * v_;
          residual = row_residual(kv);
        }
        if (sweeps > 0 && residual <= cfg.marginal_tol) break;
        if (sweeps >= cfg.max_sweeps) break;
        if (sweeps == 0) kv.noalias() = kernel_ * v_;
        if (!update(kv, log_r_, row_active_, u_)) {
          absorb();
          log_mode = true;
          continue;
        }
        ktu.noalias() = kernel_.transpose() * u_;
        if (!update(ktu, log_c_, col_active_, v_)) {
          absorb();
          log_mode = true;
          continue;
        }
        ++sweeps;
        if (needs_absorb()) {
          absorb();
          rebuild_kernel();
        }
        continue;
      }
      if (residual <= cfg.marginal_tol || sweeps >= cfg.max_sweeps) break;
    }
    out.plan = current_plan(log_mode);
    out.sweeps = sweeps;
    out.residual = marginal_residual(out.plan, r_, c_);
    out.converged = out.residual <= cfg.marginal_tol;
    return out;
  }

 private:
  void check_feasible() const {
    const Index n = log_kernel_.rows();
    for (Index i = 0; i < n; ++i) {
      if (!row_active_[static_cast<std::size_t>(i)]) continue;
      bool any = false;
      for (Index j = 0; j < n && !any; ++j)
        any = col_active_[static_cast<std::size_t>(j)] && log_kernel_(i, j) > kNegInf;
      if (!any)
        throw Error(ErrorCode::InfeasibleKernel,
                    "row " + std::to_string(i) + " has no admissible entry");
    }
    for (Index j = 0; j < n; ++j) {
      if (!col_active_[static_cast<std::size_t>(j)]) continue;
      bool any = false;
      for (Index i = 0; i < n && !any; ++i)
        any = row_active_[static_cast<std::size_t>(i)] && log_kernel_(i, j) > kNegInf;
      if (!any)
        throw Error(ErrorCode::InfeasibleKernel,
                    "column " + std::to_string(j) + " has no admissible entry");
    }
  }

  bool active(Index i, Index j) const {
    return row_active_[static_cast<std::size_t>(i)] && col_active_[static_cast<std::size_t>(j)];
  }

  void rebuild_kernel() {
    const Index n = log_kernel_.rows();
    kernel_.resize(n, n);
    kernel_finite_ = true;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (!active(i, j)) {
          kernel_(i, j) = 0.0;
          continue;
        }
        const double x = log_kernel_(i, j) + a_[i] + b_[j];
        kernel_(i, j) = std::exp(x);
        if (x > 700.0) kernel_finite_ = false;
      }
    }
  }

  // scale_k = target_k / sums_k on active indices; false on zero or
  // non-finite sums.
  static bool update(const Vector& sums, const Vector& log_target,
                     const std::vector<bool>& active, Vector& scale) {
    for (Index k = 0; k < sums.size(); ++k) {
      if (!active[static_cast<std::size_t>(k)]) continue;
      const double s = sums[k];
      if (!(s > 0.0) || !std::isfinite(s)) return false;
      const double x = std::exp(log_target[k]) / s;
      if (!(x > 0.0) || !std::isfinite(x)) return false;
      scale[k] = x;
    }
    return true;
  }

  bool needs_absorb() const {
    const double hi = std::exp(kAbsorbBound), lo = std::exp(-kAbsorbBound);
    for (Index k = 0; k < u_.size(); ++k) {
      if (row_active_[static_cast<std::size_t>(k)] && (u_[k] > hi || u_[k] < lo)) return true;
      if (col_active_[static_cast<std::size_t>(k)] && (v_[k] > hi || v_[k] < lo)) return true;
    }
    return false;
  }

  void absorb() {
    for (Index k = 0; k < u_.size(); ++k) {
      if (row_active_[static_cast<std::size_t>(k)]) {
        if (u_[k] > 0.0 && std::isfinite(u_[k])) a_[k] += std::log(u_[k]);
        u_[k] = 1.0;
      }
      if (col_active_[static_cast<std::size_t>(k)]) {
        if (v_[k] > 0.0 && std::isfinite(v_[k])) b_[k] += std::log(v_[k]);
        v_[k] = 1.0;
      }
    }
  }

  void log_sweep() {
    const Index n = log_kernel_.rows();
    for (Index i = 0; i < n; ++i) {
      if (!row_active_[static_cast<std::size_t>(i)]) continue;
      a_[i] = log_r_[i] - row_lse(i);
    }
    for (Index j = 0; j < n; ++j) {
      if (!col_active_[static_cast<std::size_t>(j)]) continue;
      b_[j] = log_c_[j] - col_lse(j);
    }
  }

  double row_lse(Index i) const {
    const Index n = log_kernel_.cols();
    double mx = kNegInf;
    for (Index j = 0; j < n; ++j)
      if (col_active_[static_cast<std::size_t>(j)]) mx = std::max(mx, log_kernel_(i, j) + b_[j]);
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      if (col_active_[static_cast<std::size_t>(j)]) s += std::exp(log_kernel_(i, j) + b_[j] - mx);
    return mx + std::log(s);
  }

  double col_lse(Index j) const {
    const Index n = log_kernel_.rows();
    double mx = kNegInf;
    for (Index i = 0; i < n; ++i)
      if (row_active_[static_cast<std::size_t>(i)]) mx = std::max(mx, log_kernel_(i, j) + a_[i]);
    double s = 0.0;
    for (Index i = 0; i < n; ++i)
      if (row_active_[static_cast<std::size_t>(i)]) s += std::exp(log_kernel_(i, j) + a_[i] - mx);
    return mx + std::log(s);
  }

  double log_row_residual() const {
    double acc = 0.0;
    for (auto i : r_.support()) {
      const auto ii = static_cast<Index>(i);
      const double d = std::exp(row_lse_with_a(ii)) - r_[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  }

  double row_lse_with_a(Index i) const { return row_lse(i) + a_[i]; }

  double row_residual(const Vector& kv) const {
    double acc = 0.0;
    for (auto i : r_.support()) {
      const auto ii = static_cast<Index>(i);
      const double d = u_[ii] * kv[ii] - r_[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  }

  Matrix current_plan(bool log_mode) {
    const Index n = log_kernel_.rows();
    Matrix p = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (!active(i, j)) continue;
        p(i, j) = log_mode ? std::exp(log_kernel_(i, j) + a_[i] + b_[j])
                           : u_[i] * kernel_(i, j) * v_[j];
      }
    }
    return p;
  }

  const Matrix& log_kernel_;
  const Histogram& r_;
  const Histogram& c_;
  std::vector<bool> row_active_, col_active_;
  Vector log_r_, log_c_;
  Vector a_, b_;  // absorbed log scalings
  Vector u_, v_;  // pending linear scalings
  Matrix kernel_;
  bool kernel_finite_ = true;
};

}  // namespace

ScalingResult scale_log_kernel(const Matrix& log_kernel, const Histogram& r, const Histogram& c,
                               const SinkhornConfig& cfg) {
  cfg.validate();
  Scaler scaler(log_kernel, r, c);
  return scaler.run(cfg);
}

TransportPlan sinkhorn_project(const Matrix& kernel, const Histogram& r, const Histogram& c,
                               const SinkhornConfig& cfg) {
  const Index n = kernel.rows();
  if (kernel.cols() != n) throw Error(ErrorCode::ShapeMismatch, "kernel must be square");
  Matrix log_kernel(n, n);
  for (Index k = 0; k < kernel.size(); ++k) {
    const double x = kernel.data()[k];
    if (!(x >= 0.0) || !std::isfinite(x))
      throw Error(ErrorCode::InvalidArgument, "kernel entries must be finite and nonnegative");
    log_kernel.data()[k] = x > 0.0 ? std::log(x) : kNegInf;
  }
  ScalingResult res = scale_log_kernel(log_kernel, r, c, cfg);
  if (!res.converged) throw SinkhornNotConverged(std::move(res));
  return validate_plan(res.plan, r, c, cfg.marginal_tol);
}

SinkhornConfig kl_baseline_config(double epsilon, SinkhornConfig base) {
  base.log_domain = epsilon <= 1e-2;
  return base;
}

SolveReport kl_regularized_ot(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                              double epsilon, const SinkhornConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::InvalidArgument, "KL baseline needs epsilon > 0");
  cfg.validate();
  const Index n = static_cast<Index>(r.size());
  if (cost.size() != r.size() || c.size() != r.size())
    throw Error(ErrorCode::ShapeMismatch, "cost and marginals have different sizes");

  Matrix log_kernel = Matrix::Constant(n, n, kNegInf);
  for (auto i : r.support())
    for (auto j : c.support()) {
      const auto ii = static_cast<Index>(i), jj = static_cast<Index>(j);
      log_kernel(ii, jj) = std::log(r[i] * c[j]) - cost.entries()(ii, jj) / epsilon;
    }

  if (!cfg.log_domain) {
    // The plain kernel r c^T exp(-M/eps) must stay representable.
    for (auto i : r.support()) {
      bool any = false;
      for (auto j : c.support())
        any = any || std::exp(log_kernel(static_cast<Index>(i), static_cast<Index>(j))) > 0.0;
      if (!any)
        throw Error(ErrorCode::NumericalUnderflow,
                    "kernel row " + std::to_string(i) + " underflows; use the log domain");
    }
    for (auto j : c.support()) {
      bool any = false;
      for (auto i : r.support())
        any = any || std::exp(log_kernel(static_cast<Index>(i), static_cast<Index>(j))) > 0.0;
      if (!any)
        throw Error(ErrorCode::NumericalUnderflow,
                    "kernel column " + std::to_string(j) + " underflows; use the log domain");
    }
  }

  ScalingResult res = scale_log_kernel(log_kernel, r, c, cfg);
  const double tol = std::max(cfg.marginal_tol, res.residual);
  TransportPlan plan = validate_plan(res.plan, r, c, tol);
  const double transport = frobenius_dot(cost.entries(), plan.entries());
  const DivergenceValue kl = kl_to_independent(plan.entries(), r, c);
  SolveReport report{std::move(plan), RegularizerSpec::kl(epsilon)};
  report.transport_cost = transport;
  report.divergence_value = kl.value;
  report.objective_value = transport + epsilon * kl.value;
  report.iterations = res.sweeps;
  report.trace.push_back({res.sweeps, report.objective_value, 0.0, res.residual});
  report.termination = res.converged ? Termination::IterateResidual : Termination::MaxIterations;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace renyi_ot
