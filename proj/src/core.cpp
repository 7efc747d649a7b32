#include "renyi_ot/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace renyi_ot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NegativeMass: return "NegativeMass";
    case ErrorCode::ZeroTotalMass: return "ZeroTotalMass";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MarginalViolation: return "MarginalViolation";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::QOutOfRange: return "QOutOfRange";
    case ErrorCode::BoundaryPoint: return "BoundaryPoint";
    case ErrorCode::InfeasibleKernel: return "InfeasibleKernel";
    case ErrorCode::MaxSweepsExceeded: return "MaxSweepsExceeded";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::InnerProjectionFailure: return "InnerProjectionFailure";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::InfeasibleDuals: return "InfeasibleDuals";
    case ErrorCode::BisectionFailure: return "BisectionFailure";
    case ErrorCode::DegenerateFamily: return "DegenerateFamily";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::OutOfRangeScore: return "OutOfRangeScore";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

// ---------------------------------------------------------------------------
// Histogram

namespace {

constexpr double kSumTolerance = 1e-6;

Vector checked_copy(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "histogram needs at least one value");
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = values[i];
    if (!std::isfinite(x))
      throw Error(ErrorCode::InvalidArgument, "non-finite mass at index " + std::to_string(i));
    if (x < 0.0)
      throw Error(ErrorCode::NegativeMass, "negative mass at index " + std::to_string(i));
    v[static_cast<Eigen::Index>(i)] = x;
  }
  return v;
}

double compensated_total(const Vector& v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value();
}

}  // namespace

Histogram::Histogram(Vector normalized) : weights_(std::move(normalized)) {
  for (Eigen::Index i = 0; i < weights_.size(); ++i)
    if (weights_[i] > 0.0) support_.push_back(static_cast<std::size_t>(i));
}

Histogram histogram_from_samples(std::span<const double> values) {
  Vector v = checked_copy(values);
  const double total = compensated_total(v);
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalMass, "all masses are zero");
  v /= total;
  return Histogram(std::move(v));
}

Histogram Histogram::from_weights(std::span<const double> weights) {
  Vector v = checked_copy(weights);
  const double total = compensated_total(v);
  if (!(total > 0.0)) throw Error(ErrorCode::ZeroTotalMass, "all masses are zero");
  if (std::abs(total - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os << "weights sum to " << total << ", more than " << kSumTolerance << " away from 1";
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  return histogram_from_samples(weights);
}

Histogram Histogram::uniform(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::EmptyInput, "uniform histogram of size 0");
  return histogram_from_samples(std::vector<double>(n, 1.0));
}

// ---------------------------------------------------------------------------
// CostMatrix

CostMatrix::CostMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
    throw Error(ErrorCode::ShapeMismatch, "cost matrix must be square and nonempty");
  for (Eigen::Index k = 0; k < entries_.size(); ++k) {
    const double x = entries_.data()[k];
    if (!std::isfinite(x) || x < 0.0)
      throw Error(ErrorCode::InvalidArgument, "cost entries must be finite and nonnegative");
  }
  max_entry_ = entries_.maxCoeff();
  symmetric_ = (entries_ == entries_.transpose());
}

CostMatrix CostMatrix::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw Error(ErrorCode::InvalidArgument, "cost scale must be positive");
  return CostMatrix(entries_ * factor);
}

CostMatrix CostMatrix::transposed() const { return CostMatrix(entries_.transpose()); }

// ---------------------------------------------------------------------------
// TransportPlan

TransportPlan::TransportPlan(Matrix entries, Histogram r, Histogram c, double residual, double tol)
    : entries_(std::move(entries)),
      row_(std::move(r)),
      col_(std::move(c)),
      residual_(residual),
      tolerance_(tol) {}

double marginal_residual(const Matrix& plan, const Histogram& r, const Histogram& c) {
  const Vector rows = plan.rowwise().sum();
  const Vector cols = plan.colwise().sum().transpose();
  return std::sqrt((rows - r.weights()).squaredNorm() + (cols - c.weights()).squaredNorm());
}

TransportPlan validate_plan(const Matrix& plan, const Histogram& r, const Histogram& c,
                            double tol) {
  const auto n = static_cast<Eigen::Index>(r.size());
  if (static_cast<Eigen::Index>(c.size()) != n || plan.rows() != n || plan.cols() != n)
    throw Error(ErrorCode::ShapeMismatch, "plan and marginals have different sizes");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");

  Matrix p = plan;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      double& x = p(i, j);
      if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "non-finite plan entry");
      if (x < -1e-15) {
        std::ostringstream os;
        os << "entry (" << i << "," << j << ") = " << x;
        throw Error(ErrorCode::NegativeEntry, os.str());
      }
      if (x < 0.0) x = 0.0;
      if (x > 0.0 && r.weights()[i] * c.weights()[j] == 0.0) {
        std::ostringstream os;
        os << "mass " << x << " at (" << i << "," << j << ") outside supp(r c^T)";
        throw Error(ErrorCode::SupportViolation, os.str());
      }
    }
  }
  const double total = p.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::MarginalViolation, "plan has zero total mass");
  if (std::abs(total - 1.0) > 1e-10) p /= total;

  const double res = marginal_residual(p, r, c);
  if (res > tol) {
    std::ostringstream os;
    os << "marginal residual " << res << " exceeds tolerance " << tol;
    throw Error(ErrorCode::MarginalViolation, os.str());
  }
  return TransportPlan(std::move(p), r, c, res, tol);
}

Matrix outer_product(const Histogram& r, const Histogram& c) {
  if (r.size() != c.size()) throw Error(ErrorCode::ShapeMismatch, "marginal sizes differ");
  return r.weights() * c.weights().transpose();
}

double min_support_mass(const Histogram& r, const Histogram& c) {
  double rmin = 1.0, cmin = 1.0;
  for (auto i : r.support()) rmin = std::min(rmin, r[i]);
  for (auto j : c.support()) cmin = std::min(cmin, c[j]);
  return rmin * cmin;
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, "frobenius product of different shapes");
  CompensatedSum s;
  for (Eigen::Index k = 0; k < a.size(); ++k) s.add(a.data()[k] * b.data()[k]);
  return s.value();
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorCode::ShapeMismatch, "difference of different shapes");
  return (a - b).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// RegularizerSpec

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::Renyi: return "renyi";
    case RegularizerKind::Tsallis: return "tsallis";
    case RegularizerKind::KL: return "kl";
    case RegularizerKind::None: return "none";
    case RegularizerKind::TsallisEntropy: return "tsallis-entropy";
  }
  return "unknown";
}

RegularizerSpec RegularizerSpec::renyi(double alpha, double epsilon) {
  RegularizerSpec s{RegularizerKind::Renyi, alpha, epsilon};
  s.validate();
  return s;
}

RegularizerSpec RegularizerSpec::tsallis(double q, double epsilon) {
  RegularizerSpec s{RegularizerKind::Tsallis, q, epsilon};
  s.validate();
  return s;
}

RegularizerSpec RegularizerSpec::tsallis_entropy(double q, double epsilon) {
  RegularizerSpec s{RegularizerKind::TsallisEntropy, q, epsilon};
  s.validate();
  return s;
}

RegularizerSpec RegularizerSpec::kl(double epsilon) {
  RegularizerSpec s{RegularizerKind::KL, 1.0, epsilon};
  s.validate();
  return s;
}

RegularizerSpec RegularizerSpec::none() { return RegularizerSpec{RegularizerKind::None, 0.0, 0.0}; }

void RegularizerSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::InvalidArgument, "epsilon must be finite and nonnegative");
  switch (kind) {
    case RegularizerKind::Renyi:
      if (!(order > 0.0 && order < 1.0))
        throw Error(ErrorCode::AlphaOutOfRange, "Renyi order must lie in (0,1)");
      break;
    case RegularizerKind::Tsallis:
    case RegularizerKind::TsallisEntropy:
      if (!(order > 0.0) || order == 1.0 || !std::isfinite(order))
        throw Error(ErrorCode::QOutOfRange, "Tsallis order must be positive and != 1");
      break;
    case RegularizerKind::KL:
      break;
    case RegularizerKind::None:
      if (epsilon != 0.0)
        throw Error(ErrorCode::InvalidArgument, "unregularized problem requires epsilon == 0");
      break;
  }
}

std::string RegularizerSpec::label() const {
  std::ostringstream os;
  os << to_string(kind);
  if (kind == RegularizerKind::Renyi) os << "(alpha=" << order << ")";
  if (kind == RegularizerKind::Tsallis || kind == RegularizerKind::TsallisEntropy)
    os << "(q=" << order << ")";
  if (kind != RegularizerKind::None) os << " eps=" << epsilon;
  return os.str();
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::IterateResidual: return "IterateResidual";
    case Termination::MaxIterations: return "MaxIterations";
    case Termination::StepCollapse: return "StepCollapse";
  }
  return "Unknown";
}

}  // namespace renyi_ot
