#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace renyi_ot {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ErrorCode {
  EmptyInput,
  NegativeMass,
  ZeroTotalMass,
  ShapeMismatch,
  MarginalViolation,
  NegativeEntry,
  SupportViolation,
  InvalidArgument,
  AlphaOutOfRange,
  QOutOfRange,
  BoundaryPoint,
  InfeasibleKernel,
  MaxSweepsExceeded,
  NumericalUnderflow,
  InnerProjectionFailure,
  ZeroGradient,
  InfeasibleDuals,
  BisectionFailure,
  DegenerateFamily,
  DimensionMismatch,
  ParseError,
  LengthMismatch,
  NonSquare,
  OutOfRangeScore,
  IoError,
  UsageError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Probability vector on a grid of N points.
///
/// Weights are nonnegative and sum to one; the support is the set of indices
/// with strictly positive weight. Immutable once built.
class Histogram {
 public:
  /// Accepts weights that already sum to one up to 1e-6 and renormalizes
  /// them exactly; larger deviations are rejected as likely data errors.
  static Histogram from_weights(std::span<const double> weights);

  /// Uniform histogram on n points.
  static Histogram uniform(std::size_t n);

  const Vector& weights() const noexcept { return weights_; }
  const std::vector<std::size_t>& support() const noexcept { return support_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  double operator[](std::size_t i) const { return weights_[static_cast<Eigen::Index>(i)]; }
  std::span<const double> span() const noexcept {
    return {weights_.data(), static_cast<std::size_t>(weights_.size())};
  }

 private:
  friend Histogram histogram_from_samples(std::span<const double> values);
  explicit Histogram(Vector normalized);

  Vector weights_;
  std::vector<std::size_t> support_;
};

/// Normalizes arbitrary nonnegative masses into a Histogram.
Histogram histogram_from_samples(std::span<const double> values);

/// Nonnegative N x N matrix of pairwise transport costs.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix entries);

  const Matrix& entries() const noexcept { return entries_; }
  bool symmetric() const noexcept { return symmetric_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  double max_entry() const noexcept { return max_entry_; }

  CostMatrix scaled(double factor) const;
  CostMatrix transposed() const;

 private:
  Matrix entries_;
  bool symmetric_ = false;
  double max_entry_ = 0.0;
};

/// Element of the transport polytope U(r, c), validated at a declared
/// tolerance. Entries outside supp(r c^T) are exactly zero.
class TransportPlan {
 public:
  const Matrix& entries() const noexcept { return entries_; }
  const Histogram& row_marginal() const noexcept { return row_; }
  const Histogram& col_marginal() const noexcept { return col_; }
  double marginal_residual() const noexcept { return residual_; }
  double tolerance() const noexcept { return tolerance_; }
  std::size_t size() const noexcept { return row_.size(); }

 private:
  friend TransportPlan validate_plan(const Matrix& plan, const Histogram& r, const Histogram& c,
                                     double tol);
  TransportPlan(Matrix entries, Histogram r, Histogram c, double residual, double tol);

  Matrix entries_;
  Histogram row_;
  Histogram col_;
  double residual_;
  double tolerance_;
};

/// sqrt(|P 1 - r|^2 + |P^T 1 - c|^2)
double marginal_residual(const Matrix& plan, const Histogram& r, const Histogram& c);

/// Checks P against U(r, c). Entries in [-1e-15, 0) are clamped to zero and a
/// total mass off by more than 1e-10 is rescaled to one before the marginal
/// residual is measured.
TransportPlan validate_plan(const Matrix& plan, const Histogram& r, const Histogram& c, double tol);

/// The independent coupling r c^T.
Matrix outer_product(const Histogram& r, const Histogram& c);

/// Smallest nonzero entry of r c^T.
double min_support_mass(const Histogram& r, const Histogram& c);

double frobenius_dot(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

// TsallisEntropy regularizes with the negative Tsallis entropy -H_q(P)
// instead of a divergence to r c^T.
enum class RegularizerKind { Renyi, Tsallis, KL, None, TsallisEntropy };

std::string_view to_string(RegularizerKind kind);

/// Which divergence regularizes the transport problem, and how strongly.
struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::None;
  double order = 0.0;  // alpha for Renyi, q for Tsallis(Entropy), unused otherwise
  double epsilon = 0.0;

  static RegularizerSpec renyi(double alpha, double epsilon);
  static RegularizerSpec tsallis(double q, double epsilon);
  static RegularizerSpec tsallis_entropy(double q, double epsilon);
  static RegularizerSpec kl(double epsilon);
  static RegularizerSpec none();

  void validate() const;
  std::string label() const;
};

enum class Termination { IterateResidual, MaxIterations, StepCollapse };

std::string_view to_string(Termination t);

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;
  double step_size = 0.0;
  double marginal_residual = 0.0;
};

struct SolveReport {
  SolveReport(TransportPlan p, RegularizerSpec reg) : plan(std::move(p)), regularizer(reg) {}

  TransportPlan plan;
  RegularizerSpec regularizer;
  double objective_value = 0.0;
  double transport_cost = 0.0;
  double divergence_value = 0.0;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  Termination termination = Termination::IterateResidual;
  double wall_time = 0.0;  // seconds

  bool converged() const noexcept { return termination == Termination::IterateResidual; }
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline std::span<const double> as_span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace renyi_ot
