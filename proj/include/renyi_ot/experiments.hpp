#pragma once

#include "renyi_ot/core.hpp"
#include "renyi_ot/solver.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace renyi_ot {

// ---------------------------------------------------------------------------
// Marginal generators

struct GaussianGrid {
  double mean = 0.5;
  double std = 0.1;
};

struct MixedPoissonGrid {
  std::vector<double> rates;        // absolute rates in grid-index units
  std::vector<double> mix_weights;  // normalized on construction
};

struct UniformGrid {};

struct FromFile {
  std::string path;
  bool second = false;  // take the `c` column instead of `r`
};

struct MarginalFamily {
  std::variant<GaussianGrid, MixedPoissonGrid, UniformGrid, FromFile> kind;
  std::size_t n = 50;

  void validate() const;
};

/// Density (or pmf for the Poisson mixture) evaluated on the grid
/// x_k = k / (n - 1), k = 0..n-1, then normalized. The analytic families do
/// not consume randomness; `seed` is accepted for interface uniformity.
Histogram generate_marginal(const MarginalFamily& fam, std::uint64_t seed = 0);

/// Default Gaussian pair: means 0.35 and 0.65, std 0.1.
std::pair<MarginalFamily, MarginalFamily> default_gaussian_pair(std::size_t n);

/// Default Poisson-mixture pair: rates {0.3 n, 0.7 n}; mixture weights
/// (0.7, 0.3) for r and (0.3, 0.7) for c.
std::pair<MarginalFamily, MarginalFamily> default_poisson_pair(std::size_t n);

// ---------------------------------------------------------------------------
// Cost matrices

enum class VoterPhi { Eucl, SqEucl, Riesz, RBF, Res };

std::string_view to_string(VoterPhi phi);

struct SqEuclidUnscaled {};
struct SqEuclidScaled {};
struct EuclidGrid {};
struct VoterCost {
  VoterPhi phi = VoterPhi::Eucl;
  double gamma = 1.0;  // RBF and Res only
  std::vector<std::vector<double>> similarity_vectors;
};

using CostFamily = std::variant<SqEuclidUnscaled, SqEuclidScaled, EuclidGrid, VoterCost>;

/// phi(r) for the voter metrics.
double apply_phi(VoterPhi phi, double r, double gamma);

/// n is ignored for the voter family (size = number of vectors).
CostMatrix build_cost_matrix(const CostFamily& fam, std::size_t n);

// ---------------------------------------------------------------------------
// Error metrics

struct ErrorMetrics {
  double abs_mean = 0.0;
  double abs_std = 0.0;
  double kl_error = 0.0;
  double mse = 0.0;
  double transport_distance = 0.0;
};

/// Entrywise comparison of `plan` against `reference`. abs_std is the
/// population standard deviation; kl_error = KL(plan | reference), +inf
/// when plan has mass where the reference has none.
ErrorMetrics plan_error_metrics(const TransportPlan& plan, const TransportPlan& reference,
                                const CostMatrix& cost);

// ---------------------------------------------------------------------------
// Sweeps

struct ExperimentConfig {
  MirrorDescentConfig solver{};
  SinkhornConfig kl_inner{};  // for the KL baseline; the domain is picked per eps
  double cost_scale = 1.0;    // cost used is cost_scale * M
  int threads = 0;            // 0: RENYI_OT_THREADS, else hardware concurrency

  void validate() const;
};

/// Worker count for a sweep: cfg.threads if positive, else RENYI_OT_THREADS
/// when set, else the hardware concurrency; capped by RENYI_OT_THREADS.
int sweep_threads(const ExperimentConfig& cfg);

struct SweepCell {
  double alpha = 0.0;
  double epsilon = 0.0;
  bool ok = false;
  std::string error;  // set when !ok
  ErrorMetrics vs_exact{};
  std::optional<ErrorMetrics> vs_kl;  // empty when the KL baseline failed
  double objective = 0.0;
  double transport_cost = 0.0;
  double divergence = 0.0;
  int iterations = 0;
  Termination termination = Termination::IterateResidual;
};

struct SweepGrid {
  std::vector<double> alphas;
  std::vector<double> epsilons;
  std::vector<SweepCell> cells;  // alpha-major: cells[a * epsilons.size() + e]
  double exact_cost = 0.0;

  const SweepCell& at(std::size_t a, std::size_t e) const {
    return cells[a * epsilons.size() + e];
  }
};

/// Runs renyi_mirror_descent on every (alpha, eps) pair and compares each
/// plan against the exact plan and the KL plan at the same eps. Solver
/// failures are stored in the cell; the grid stays rectangular.
SweepGrid convergence_sweep(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                            const std::vector<double>& alphas,
                            const std::vector<double>& epsilons,
                            const ExperimentConfig& cfg = {});

struct ComparisonRow {
  RegularizerSpec spec;
  bool ok = false;
  std::string error;
  ErrorMetrics metrics{};
  double objective = 0.0;
  int iterations = 0;
  Termination termination = Termination::IterateResidual;
};

/// Solves one problem per spec and measures each plan against exact_ot.
/// Rows are sorted by mse (stable); failed rows go last.
std::vector<ComparisonRow> regularizer_comparison(const CostMatrix& cost, const Histogram& r,
                                                  const Histogram& c,
                                                  const std::vector<RegularizerSpec>& specs,
                                                  const ExperimentConfig& cfg = {});

/// Dispatches on spec.kind: Renyi/Tsallis mirror descent, KL scaling,
/// None -> exact_ot.
SolveReport solve_regularized(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                              const RegularizerSpec& spec, const ExperimentConfig& cfg = {});

}  // namespace renyi_ot
