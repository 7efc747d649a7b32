#include "renyi_ot/solver.hpp"

#include <sstream>

namespace renyi_ot {

double polyak_step(double f_curr, double f_best_est, const Matrix& grad, double c_const) {
  if (!(c_const > 0.0)) throw Error(ErrorCode::InvalidArgument, "Polyak constant must be > 0");
  const double g2 = grad.squaredNorm();
  if (!(g2 > 0.0)) throw Error(ErrorCode::ZeroGradient, "gradient vanishes");
  const double gap = f_curr - f_best_est;
  if (gap <= 0.0) return 0.0;
  return gap / (c_const * g2);
}

Matrix tangent_gradient(const Matrix& grad, const Histogram& r, const Histogram& c) {
  const auto& rows = r.support();
  const auto& cols = c.support();
  const auto n = grad.rows();
  Matrix out = Matrix::Zero(n, n);
  if (rows.empty() || cols.empty()) return out;
  Vector row_mean = Vector::Zero(n), col_mean = Vector::Zero(n);
  double grand = 0.0;
  for (auto i : rows)
    for (auto j : cols) {
      const double g = grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      row_mean[static_cast<Eigen::Index>(i)] += g;
      col_mean[static_cast<Eigen::Index>(j)] += g;
      grand += g;
    }
  const double nr = static_cast<double>(rows.size()), nc = static_cast<double>(cols.size());
  row_mean /= nc;
  col_mean /= nr;
  grand /= nr * nc;
  for (auto i : rows)
    for (auto j : cols) {
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      out(ii, jj) = grad(ii, jj) - row_mean[ii] - col_mean[jj] + grand;
    }
  return out;
}

std::string step_rule_label(const StepRule& rule) {
  std::ostringstream os;
  if (const auto* p = std::get_if<PolyakRule>(&rule))
    os << "polyak(c=" << p->c << ",delta0=" << p->delta0 << ")";
  else if (const auto* k = std::get_if<ConstantRule>(&rule))
    os << "constant(eta=" << k->eta << ")";
  else if (const auto* a = std::get_if<ArmijoRule>(&rule))
    os << "armijo(eta0=" << a->eta0 << ")";
  return os.str();
}

}  // namespace renyi_ot
