#include "renyi_ot/divergence.hpp"

#include <algorithm>
#include <cmath>

namespace renyi_ot {

namespace {

void check_shapes(std::span<const double> s, std::span<const double> t) {
  if (s.size() != t.size())
    throw Error(ErrorCode::ShapeMismatch, "divergence arguments have different lengths");
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw Error(ErrorCode::AlphaOutOfRange, "alpha must lie in (0,1)");
}

void check_q(double q) {
  if (!(q > 0.0) || q == 1.0 || !std::isfinite(q))
    throw Error(ErrorCode::QOutOfRange, "q must be positive and != 1");
}

// Result of sum_k s_k^a t_k^(1-a) - 1, accumulated as
//   sum_k s_k expm1((1-a) ln(t_k/s_k)) + (sum_k s_k - 1)
// which stays accurate when s and t are close. `overlap` reports whether any
// index carries mass in both arguments; `blowup` is set when a = q > 1 meets
// s_k > 0 with t_k = 0.
struct PowerSum {
  double minus_one = 0.0;
  bool overlap = false;
  bool blowup = false;
};

template <typename MassAt>
PowerSum power_sum(std::size_t n, double a, MassAt mass_at) {
  CompensatedSum deviation;
  CompensatedSum total;
  PowerSum out;
  const double b = 1.0 - a;
  for (std::size_t k = 0; k < n; ++k) {
    const auto [s, t] = mass_at(k);
    if (s <= 0.0) continue;
    total.add(s);
    if (t > 0.0) {
      out.overlap = true;
      deviation.add(s * std::expm1(b * std::log(t / s)));
    } else if (b < 0.0) {
      out.blowup = true;
    } else {
      deviation.add(-s);
    }
  }
  total.add(-1.0);
  out.minus_one = deviation.value() + total.value();
  return out;
}

template <typename MassAt>
DivergenceValue renyi_impl(std::size_t n, double alpha, MassAt mass_at) {
  const PowerSum ps = power_sum(n, alpha, mass_at);
  if (!ps.overlap) return DivergenceValue::infinite();
  const double value = std::log1p(ps.minus_one) / (alpha - 1.0);
  return {std::max(0.0, value), true};
}

template <typename MassAt>
DivergenceValue tsallis_impl(std::size_t n, double q, MassAt mass_at) {
  const PowerSum ps = power_sum(n, q, mass_at);
  if (ps.blowup) return DivergenceValue::infinite();
  return {std::max(0.0, ps.minus_one / (q - 1.0)), true};
}

template <typename MassAt>
DivergenceValue kl_impl(std::size_t n, MassAt mass_at) {
  CompensatedSum acc;
  for (std::size_t k = 0; k < n; ++k) {
    const auto [s, t] = mass_at(k);
    if (s <= 0.0) continue;
    if (t <= 0.0) return DivergenceValue::infinite();
    acc.add(s * std::log(s / t));
  }
  return {std::max(0.0, acc.value()), true};
}

struct PlanAgainstIndependent {
  const Matrix& plan;
  const Histogram& r;
  const Histogram& c;

  std::pair<double, double> operator()(std::size_t k) const {
    const auto n = static_cast<std::size_t>(plan.cols());
    const std::size_t i = k / n, j = k % n;
    return {plan.data()[k], r[i] * c[j]};
  }
};

void check_plan(const Matrix& plan, const Histogram& r, const Histogram& c) {
  const auto n = static_cast<Eigen::Index>(r.size());
  if (static_cast<Eigen::Index>(c.size()) != n || plan.rows() != n || plan.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, "plan and marginals have different sizes");
}

}  // namespace

DivergenceValue renyi_divergence(std::span<const double> s, std::span<const double> t,
                                 double alpha) {
  check_shapes(s, t);
  check_alpha(alpha);
  return renyi_impl(s.size(), alpha, [&](std::size_t k) { return std::pair{s[k], t[k]}; });
}

DivergenceValue tsallis_divergence(std::span<const double> s, std::span<const double> t,
                                   double q) {
  check_shapes(s, t);
  check_q(q);
  return tsallis_impl(s.size(), q, [&](std::size_t k) { return std::pair{s[k], t[k]}; });
}

DivergenceValue kl_divergence(std::span<const double> s, std::span<const double> t) {
  check_shapes(s, t);
  return kl_impl(s.size(), [&](std::size_t k) { return std::pair{s[k], t[k]}; });
}

double tsallis_entropy(std::span<const double> s, double q) {
  check_q(q);
  CompensatedSum acc;
  for (double x : s)
    if (x > 0.0) acc.add(std::pow(x, q));
  return (1.0 - acc.value()) / (q - 1.0);
}

double mutual_information_alpha(const Matrix& plan, const Histogram& r, const Histogram& c,
                                double alpha) {
  check_plan(plan, r, c);
  check_alpha(alpha);
  CompensatedSum acc;
  for (auto i : r.support()) {
    for (auto j : c.support()) {
      const double p = plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (p > 0.0) acc.add(std::pow(p, alpha) * std::pow(r[i] * c[j], 1.0 - alpha));
    }
  }
  return acc.value();
}

DivergenceValue renyi_to_independent(const Matrix& plan, const Histogram& r, const Histogram& c,
                                     double alpha) {
  check_plan(plan, r, c);
  check_alpha(alpha);
  return renyi_impl(static_cast<std::size_t>(plan.size()), alpha,
                    PlanAgainstIndependent{plan, r, c});
}

DivergenceValue tsallis_to_independent(const Matrix& plan, const Histogram& r,
                                       const Histogram& c, double q) {
  check_plan(plan, r, c);
  check_q(q);
  return tsallis_impl(static_cast<std::size_t>(plan.size()), q,
                      PlanAgainstIndependent{plan, r, c});
}

DivergenceValue kl_to_independent(const Matrix& plan, const Histogram& r, const Histogram& c) {
  check_plan(plan, r, c);
  return kl_impl(static_cast<std::size_t>(plan.size()), PlanAgainstIndependent{plan, r, c});
}

namespace {

double regularized(double cost, double epsilon, const DivergenceValue& d) {
  if (epsilon == 0.0) return cost;
  return cost + epsilon * d.value;
}

}  // namespace

double renyi_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                       const Histogram& c, double alpha, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  check_plan(plan, r, c);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  return regularized(frobenius_dot(cost.entries(), plan), epsilon,
                     renyi_to_independent(plan, r, c, alpha));
}

double tsallis_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                         const Histogram& c, double q, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  check_plan(plan, r, c);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  return regularized(frobenius_dot(cost.entries(), plan), epsilon,
                     tsallis_to_independent(plan, r, c, q));
}

double tsallis_entropy_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                                 const Histogram& c, double q, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  check_plan(plan, r, c);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  const double transport = frobenius_dot(cost.entries(), plan);
  if (epsilon == 0.0) return transport;
  return transport - epsilon * tsallis_entropy(as_span(plan), q);
}

double kl_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                    const Histogram& c, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  check_plan(plan, r, c);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  return regularized(frobenius_dot(cost.entries(), plan), epsilon, kl_to_independent(plan, r, c));
}

Matrix renyi_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                      const Histogram& c, double alpha, double epsilon) {
  check_plan(plan, r, c);
  check_alpha(alpha);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  const auto n = static_cast<Eigen::Index>(r.size());
  Matrix grad = Matrix::Zero(n, n);
  for (auto i : r.support()) {
    for (auto j : c.support()) {
      if (plan(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0.0)
        throw Error(ErrorCode::BoundaryPoint, "plan vanishes at (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") inside supp(r c^T)");
    }
  }
  const double info = mutual_information_alpha(plan, r, c, alpha);
  const double coef = epsilon * alpha / (alpha - 1.0) / info;
  for (auto i : r.support()) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (auto j : c.support()) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double ratio = r[i] * c[j] / plan(ii, jj);
      grad(ii, jj) = cost.entries()(ii, jj) + coef * std::pow(ratio, 1.0 - alpha);
    }
  }
  return grad;
}

Matrix tsallis_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                        const Histogram& c, double q, double epsilon) {
  check_plan(plan, r, c);
  check_q(q);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  const auto n = static_cast<Eigen::Index>(r.size());
  Matrix grad = Matrix::Zero(n, n);
  const double coef = epsilon * q / (q - 1.0);
  for (auto i : r.support()) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (auto j : c.support()) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double p = plan(ii, jj);
      if (p <= 0.0 && q < 1.0)
        throw Error(ErrorCode::BoundaryPoint, "plan vanishes at (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") inside supp(r c^T)");
      const double powered = p > 0.0 ? std::pow(p / (r[i] * c[j]), q - 1.0) : 0.0;
      grad(ii, jj) = cost.entries()(ii, jj) + coef * powered;
    }
  }
  return grad;
}

Matrix tsallis_entropy_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                                const Histogram& c, double q, double epsilon) {
  check_plan(plan, r, c);
  check_q(q);
  if (cost.size() != r.size()) throw Error(ErrorCode::ShapeMismatch, "cost size differs");
  const auto n = static_cast<Eigen::Index>(r.size());
  Matrix grad = Matrix::Zero(n, n);
  const double coef = epsilon * q / (q - 1.0);
  for (auto i : r.support()) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (auto j : c.support()) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double p = plan(ii, jj);
      if (p <= 0.0 && q < 1.0)
        throw Error(ErrorCode::BoundaryPoint, "plan vanishes at (" + std::to_string(i) + "," +
                                                  std::to_string(j) + ") inside supp(r c^T)");
      grad(ii, jj) = cost.entries()(ii, jj) + coef * (p > 0.0 ? std::pow(p, q - 1.0) : 0.0);
    }
  }
  return grad;
}

}  // namespace renyi_ot
