#pragma once

#include "renyi_ot/core.hpp"

#include <limits>
#include <span>

namespace renyi_ot {

/// Divergence in nats. `finite` is false exactly when the value is +inf.
struct DivergenceValue {
  double value = 0.0;
  bool finite = true;

  static DivergenceValue infinite() {
    return {std::numeric_limits<double>::infinity(), false};
  }
};

// All divergences use the conventions 0 * inf = 0, 0 ln 0 = 0 and ln 0 = -inf.
// Arguments are flat mass vectors; plans are passed through as_span().

/// (1/(alpha-1)) ln sum_k s_k^alpha t_k^(1-alpha), alpha in (0,1).
DivergenceValue renyi_divergence(std::span<const double> s, std::span<const double> t,
                                 double alpha);

/// (1/(q-1)) (sum_k s_k^q t_k^(1-q) - 1), q > 0, q != 1.
DivergenceValue tsallis_divergence(std::span<const double> s, std::span<const double> t,
                                   double q);

/// sum_k s_k ln(s_k / t_k).
DivergenceValue kl_divergence(std::span<const double> s, std::span<const double> t);

/// (1/(q-1)) (1 - sum_k s_k^q).
double tsallis_entropy(std::span<const double> s, double q);

inline DivergenceValue renyi_divergence(const Histogram& s, const Histogram& t, double alpha) {
  return renyi_divergence(s.span(), t.span(), alpha);
}
inline DivergenceValue tsallis_divergence(const Histogram& s, const Histogram& t, double q) {
  return tsallis_divergence(s.span(), t.span(), q);
}
inline DivergenceValue kl_divergence(const Histogram& s, const Histogram& t) {
  return kl_divergence(s.span(), t.span());
}

/// alpha-mutual information sum_ij p_ij^alpha (r_i c_j)^(1-alpha) over supp(r c^T).
double mutual_information_alpha(const Matrix& plan, const Histogram& r, const Histogram& c,
                                double alpha);

/// Renyi divergence of a plan against the independent coupling r c^T.
DivergenceValue renyi_to_independent(const Matrix& plan, const Histogram& r, const Histogram& c,
                                     double alpha);
DivergenceValue tsallis_to_independent(const Matrix& plan, const Histogram& r,
                                       const Histogram& c, double q);
DivergenceValue kl_to_independent(const Matrix& plan, const Histogram& r, const Histogram& c);

/// <M, P>_F + epsilon R_alpha(P | r c^T).
double renyi_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                       const Histogram& c, double alpha, double epsilon);

/// <M, P>_F + epsilon D_q(P | r c^T).
double tsallis_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                         const Histogram& c, double q, double epsilon);

/// <M, P>_F - epsilon H_q(P) with the Tsallis entropy H_q.
double tsallis_entropy_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                                 const Histogram& c, double q, double epsilon);

/// <M, P>_F + epsilon KL(P | r c^T).
double kl_objective(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                    const Histogram& c, double epsilon);

/// Gradient of renyi_objective on the interior of U(r, c):
///   M + eps * alpha/(alpha-1) * (r c^T / P)^(1-alpha) / <P^alpha, (r c^T)^(1-alpha)>.
/// Entries off supp(r c^T) are zero. Throws BoundaryPoint if some p_ij = 0 on
/// the support.
Matrix renyi_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                      const Histogram& c, double alpha, double epsilon);

/// M + eps * q/(q-1) * p^(q-1) (r c^T)^(1-q) on supp(r c^T). For q < 1 a zero
/// entry on the support is a BoundaryPoint; for q > 1 the gradient extends
/// continuously to the boundary.
Matrix tsallis_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                        const Histogram& c, double q, double epsilon);

/// M + eps * q/(q-1) * p^(q-1) on supp(r c^T), the gradient of
/// tsallis_entropy_objective. Boundary rules as for tsallis_gradient.
Matrix tsallis_entropy_gradient(const Matrix& plan, const CostMatrix& cost, const Histogram& r,
                                const Histogram& c, double q, double epsilon);

}  // namespace renyi_ot
