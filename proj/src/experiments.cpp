#include "renyi_ot/experiments.hpp"

#include "renyi_ot/divergence.hpp"
#include "renyi_ot/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <thread>

namespace renyi_ot {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Histogram normalized(const std::vector<double>& w, const char* what) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0) || !std::isfinite(total))
    throw Error(ErrorCode::DegenerateFamily, std::string(what) + ": all grid weights vanish");
  return histogram_from_samples(w);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

std::optional<TransportPlan> kl_plan(const CostMatrix& cost, const Histogram& r,
                                     const Histogram& c, double eps, const SinkhornConfig& base) {
  SinkhornConfig cfg = kl_baseline_config(eps, base);
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      SolveReport rep = kl_regularized_ot(cost, r, c, eps, cfg);
      if (rep.termination != Termination::IterateResidual) return std::nullopt;
      return rep.plan;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalUnderflow || cfg.log_domain) return std::nullopt;
      cfg.log_domain = true;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

void MarginalFamily::validate() const {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 2");
  std::visit(Overloaded{
                 [](const GaussianGrid& g) {
                   if (!(g.std > 0.0) || !std::isfinite(g.mean))
                     throw Error(ErrorCode::InvalidArgument, "Gaussian needs std > 0");
                 },
                 [](const MixedPoissonGrid& p) {
                   if (p.rates.empty() || p.rates.size() != p.mix_weights.size())
                     throw Error(ErrorCode::InvalidArgument,
                                 "Poisson mixture needs one weight per rate");
                   for (double l : p.rates)
                     if (!(l > 0.0))
                       throw Error(ErrorCode::InvalidArgument, "Poisson rates must be > 0");
                   (void)Histogram::from_weights(
                       std::vector<double>(p.mix_weights.begin(), p.mix_weights.end()));
                 },
                 [](const UniformGrid&) {},
                 [](const FromFile& f) {
                   if (f.path.empty()) throw Error(ErrorCode::InvalidArgument, "empty path");
                 },
             },
             kind);
}

Histogram generate_marginal(const MarginalFamily& fam, std::uint64_t /*seed*/) {
  fam.validate();
  const std::size_t n = fam.n;
  const double step = 1.0 / static_cast<double>(n - 1);
  return std::visit(
      Overloaded{
          [&](const GaussianGrid& g) {
            std::vector<double> w(n);
            for (std::size_t k = 0; k < n; ++k) {
              const double z = (static_cast<double>(k) * step - g.mean) / g.std;
              w[k] = std::exp(-0.5 * z * z);
            }
            return normalized(w, "Gaussian");
          },
          [&](const MixedPoissonGrid& p) {
            // Mixture weights must form a histogram, but tiny deviations in
            // user input are tolerated by renormalizing.
            double wsum = 0.0;
            for (double x : p.mix_weights) wsum += x;
            std::vector<double> w(n, 0.0);
            for (std::size_t m = 0; m < p.rates.size(); ++m) {
              const double lambda = p.rates[m];
              const double weight = p.mix_weights[m] / wsum;
              if (weight == 0.0) continue;
              for (std::size_t k = 0; k < n; ++k) {
                const double kk = static_cast<double>(k);
                w[k] += weight * std::exp(kk * std::log(lambda) - lambda - std::lgamma(kk + 1.0));
              }
            }
            return normalized(w, "Poisson mixture");
          },
          [&](const UniformGrid&) { return Histogram::uniform(n); },
          [&](const FromFile& f) {
            MarginalData data = ingest_marginals(f.path);
            const Histogram& h = f.second ? data.c : data.r;
            if (h.size() != n)
              throw Error(ErrorCode::LengthMismatch, "marginal file has " +
                                                        std::to_string(h.size()) +
                                                        " rows, expected " + std::to_string(n));
            return h;
          },
      },
      fam.kind);
}

std::pair<MarginalFamily, MarginalFamily> default_gaussian_pair(std::size_t n) {
  return {MarginalFamily{GaussianGrid{0.35, 0.1}, n}, MarginalFamily{GaussianGrid{0.65, 0.1}, n}};
}

std::pair<MarginalFamily, MarginalFamily> default_poisson_pair(std::size_t n) {
  const double dn = static_cast<double>(n);
  const std::vector<double> rates{0.3 * dn, 0.7 * dn};
  return {MarginalFamily{MixedPoissonGrid{rates, {0.7, 0.3}}, n},
          MarginalFamily{MixedPoissonGrid{rates, {0.3, 0.7}}, n}};
}

// ---------------------------------------------------------------------------

std::string_view to_string(VoterPhi phi) {
  switch (phi) {
    case VoterPhi::Eucl: return "eucl";
    case VoterPhi::SqEucl: return "sqeucl";
    case VoterPhi::Riesz: return "riesz";
    case VoterPhi::RBF: return "rbf";
    case VoterPhi::Res: return "res";
  }
  return "?";
}

double apply_phi(VoterPhi phi, double r, double gamma) {
  switch (phi) {
    case VoterPhi::Eucl: return r;
    case VoterPhi::SqEucl: return r * r;
    case VoterPhi::Riesz: return std::sqrt(2.0 * r);
    case VoterPhi::RBF: return std::sqrt(2.0 * -std::expm1(-gamma * r * r));
    case VoterPhi::Res: {
      // 1/gamma - 1/sqrt(gamma^2 + r^2) = r^2 / (gamma s (s + gamma)), s = sqrt(gamma^2 + r^2)
      const double s = std::hypot(gamma, r);
      return std::sqrt(2.0 * r * r / (gamma * s * (s + gamma)));
    }
  }
  return 0.0;
}

CostMatrix build_cost_matrix(const CostFamily& fam, std::size_t n) {
  return std::visit(
      Overloaded{
          [&](const SqEuclidUnscaled&) {
            if (n < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 2");
            Matrix m(n, n);
            const double d = static_cast<double>(n - 1);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) {
                const double x = (static_cast<double>(i) - static_cast<double>(j)) / d;
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x * x;
              }
            return CostMatrix(std::move(m));
          },
          [&](const SqEuclidScaled&) {
            const CostMatrix base = build_cost_matrix(SqEuclidUnscaled{}, n);
            const double d = static_cast<double>(n - 1);
            return base.scaled(d * d / static_cast<double>(n));
          },
          [&](const EuclidGrid&) {
            if (n < 2) throw Error(ErrorCode::InvalidArgument, "grid size must be >= 2");
            Matrix m(n, n);
            const double d = static_cast<double>(n - 1);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::abs(static_cast<double>(i) - static_cast<double>(j)) / d;
            return CostMatrix(std::move(m));
          },
          [&](const VoterCost& v) {
            const auto& vecs = v.similarity_vectors;
            if (vecs.empty()) throw Error(ErrorCode::InvalidArgument, "no similarity vectors");
            for (const auto& x : vecs)
              if (x.size() != vecs.front().size())
                throw Error(ErrorCode::DimensionMismatch,
                            "similarity vectors have different lengths");
            if ((v.phi == VoterPhi::RBF || v.phi == VoterPhi::Res) && !(v.gamma > 0.0))
              throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
            const std::size_t k = vecs.size();
            Matrix m = Matrix::Zero(k, k);
            for (std::size_t i = 0; i < k; ++i)
              for (std::size_t j = i + 1; j < k; ++j) {
                double ss = 0.0;
                for (std::size_t t = 0; t < vecs[i].size(); ++t) {
                  const double d = vecs[i][t] - vecs[j][t];
                  ss += d * d;
                }
                const double val = apply_phi(v.phi, std::sqrt(ss), v.gamma);
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = val;
                m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = val;
              }
            return CostMatrix(std::move(m));
          },
      },
      fam);
}

// ---------------------------------------------------------------------------

ErrorMetrics plan_error_metrics(const TransportPlan& plan, const TransportPlan& reference,
                                const CostMatrix& cost) {
  const Matrix& p = plan.entries();
  const Matrix& q = reference.entries();
  if (p.rows() != q.rows() || p.cols() != q.cols() ||
      static_cast<std::size_t>(p.rows()) != cost.size())
    throw Error(ErrorCode::ShapeMismatch, "plans and cost differ in shape");
  const double count = static_cast<double>(p.size());
  CompensatedSum abs_sum, sq_sum;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double d = p.data()[k] - q.data()[k];
    abs_sum.add(std::abs(d));
    sq_sum.add(d * d);
  }
  ErrorMetrics m;
  m.abs_mean = abs_sum.value() / count;
  CompensatedSum dev;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double a = std::abs(p.data()[k] - q.data()[k]) - m.abs_mean;
    dev.add(a * a);
  }
  m.abs_std = std::sqrt(std::max(0.0, dev.value() / count));
  m.mse = sq_sum.value() / count;
  const DivergenceValue kl = kl_divergence(as_span(p), as_span(q));
  m.kl_error = kl.finite ? kl.value : std::numeric_limits<double>::infinity();
  m.transport_distance = frobenius_dot(cost.entries(), p);
  return m;
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  solver.validate();
  kl_inner.validate();
  if (!(cost_scale > 0.0) || !std::isfinite(cost_scale))
    throw Error(ErrorCode::InvalidArgument, "cost_scale must be > 0");
  if (threads < 0) throw Error(ErrorCode::InvalidArgument, "threads must be >= 0");
}

int sweep_threads(const ExperimentConfig& cfg) {
  int cap = 0;
  if (const char* env = std::getenv("RENYI_OT_THREADS")) cap = std::atoi(env);
  int n = cfg.threads > 0 ? cfg.threads
                          : (cap > 0 ? cap : static_cast<int>(std::thread::hardware_concurrency()));
  if (cap > 0) n = std::min(n, cap);
  return std::max(n, 1);
}

SolveReport solve_regularized(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                              const RegularizerSpec& spec, const ExperimentConfig& cfg) {
  spec.validate();
  const CostMatrix scaled = cfg.cost_scale == 1.0 ? cost : cost.scaled(cfg.cost_scale);
  switch (spec.kind) {
    case RegularizerKind::Renyi:
      return renyi_mirror_descent(scaled, r, c, spec.order, spec.epsilon, cfg.solver);
    case RegularizerKind::Tsallis:
      return tsallis_mirror_descent(scaled, r, c, spec.order, spec.epsilon, cfg.solver);
    case RegularizerKind::TsallisEntropy:
      return tsallis_entropy_mirror_descent(scaled, r, c, spec.order, spec.epsilon, cfg.solver);
    case RegularizerKind::KL: {
      SinkhornConfig inner = kl_baseline_config(spec.epsilon, cfg.kl_inner);
      try {
        return kl_regularized_ot(scaled, r, c, spec.epsilon, inner);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NumericalUnderflow || inner.log_domain) throw;
        inner.log_domain = true;
        return kl_regularized_ot(scaled, r, c, spec.epsilon, inner);
      }
    }
    case RegularizerKind::None:
      return exact_ot(scaled, r, c);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown regularizer");
}

SweepGrid convergence_sweep(const CostMatrix& cost, const Histogram& r, const Histogram& c,
                            const std::vector<double>& alphas,
                            const std::vector<double>& epsilons, const ExperimentConfig& cfg) {
  if (alphas.empty() || epsilons.empty())
    throw Error(ErrorCode::InvalidArgument, "sweep grids must be nonempty");
  cfg.validate();
  const CostMatrix scaled = cfg.cost_scale == 1.0 ? cost : cost.scaled(cfg.cost_scale);
  const SolveReport exact = exact_ot(scaled, r, c);
  const int threads = sweep_threads(cfg);

  std::vector<std::optional<TransportPlan>> kl_plans(epsilons.size());
  parallel_for(epsilons.size(), threads, [&](std::size_t e) {
    kl_plans[e] = kl_plan(scaled, r, c, epsilons[e], cfg.kl_inner);
  });

  SweepGrid grid;
  grid.alphas = alphas;
  grid.epsilons = epsilons;
  grid.exact_cost = exact.transport_cost;
  grid.cells.resize(alphas.size() * epsilons.size());
  parallel_for(grid.cells.size(), threads, [&](std::size_t k) {
    const std::size_t a = k / epsilons.size(), e = k % epsilons.size();
    SweepCell& cell = grid.cells[k];
    cell.alpha = alphas[a];
    cell.epsilon = epsilons[e];
    try {
      const SolveReport rep =
          renyi_mirror_descent(scaled, r, c, cell.alpha, cell.epsilon, cfg.solver);
      cell.vs_exact = plan_error_metrics(rep.plan, exact.plan, scaled);
      if (kl_plans[e]) cell.vs_kl = plan_error_metrics(rep.plan, *kl_plans[e], scaled);
      cell.objective = rep.objective_value;
      cell.transport_cost = rep.transport_cost;
      cell.divergence = rep.divergence_value;
      cell.iterations = rep.iterations;
      cell.termination = rep.termination;
      cell.ok = true;
    } catch (const std::exception& ex) {
      cell.ok = false;
      cell.error = ex.what();
    }
  });
  return grid;
}

std::vector<ComparisonRow> regularizer_comparison(const CostMatrix& cost, const Histogram& r,
                                                  const Histogram& c,
                                                  const std::vector<RegularizerSpec>& specs,
                                                  const ExperimentConfig& cfg) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "no regularizers to compare");
  cfg.validate();
  const CostMatrix scaled = cfg.cost_scale == 1.0 ? cost : cost.scaled(cfg.cost_scale);
  const SolveReport exact = exact_ot(scaled, r, c);
  ExperimentConfig unscaled = cfg;
  unscaled.cost_scale = 1.0;

  std::vector<ComparisonRow> rows(specs.size());
  parallel_for(specs.size(), sweep_threads(cfg), [&](std::size_t k) {
    ComparisonRow& row = rows[k];
    row.spec = specs[k];
    try {
      const SolveReport rep = solve_regularized(scaled, r, c, specs[k], unscaled);
      row.metrics = plan_error_metrics(rep.plan, exact.plan, scaled);
      row.objective = rep.objective_value;
      row.iterations = rep.iterations;
      row.termination = rep.termination;
      row.ok = true;
    } catch (const std::exception& ex) {
      row.ok = false;
      row.error = ex.what();
    }
  });
  std::stable_sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    if (a.ok != b.ok) return a.ok;
    return a.ok && a.metrics.mse < b.metrics.mse;
  });
  return rows;
}

}  // namespace renyi_ot
