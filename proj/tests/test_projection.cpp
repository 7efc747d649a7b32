#include <doctest.h>

#include "oracles.hpp"
#include "renyi_ot/divergence.hpp"
#include "renyi_ot/projection.hpp"

#include <random>

using namespace renyi_ot;

TEST_CASE("random positive kernels project into the polytope") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> size(1, 64);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = size(rng);
    Histogram r = oracle::random_histogram(rng, n);
    Histogram c = oracle::random_histogram(rng, n);
    Matrix k(n, n);
    for (Eigen::Index e = 0; e < k.size(); ++e) k.data()[e] = u(rng);
    TransportPlan p = sinkhorn_project(k, r, c);
    CHECK(p.marginal_residual() <= 1e-4);
    CHECK_NOTHROW(validate_plan(p.entries(), r, c, 1e-4));
  }
}

TEST_CASE("constant kernel projects to the independent coupling") {
  std::mt19937_64 rng(2);
  Histogram r = oracle::random_histogram(rng, 12);
  Histogram c = oracle::random_histogram(rng, 12);
  TransportPlan p = sinkhorn_project(Matrix::Constant(12, 12, 3.0), r, c);
  CHECK(max_abs_diff(p.entries(), outer_product(r, c)) <= 1e-10);
}

TEST_CASE("projection is idempotent on the polytope") {
  std::mt19937_64 rng(4);
  Histogram r = oracle::random_histogram(rng, 10);
  Histogram c = oracle::random_histogram(rng, 10);
  Matrix k = Matrix::Random(10, 10).cwiseAbs().array() + 0.1;
  SinkhornConfig tight;
  tight.marginal_tol = 1e-12;
  TransportPlan once = sinkhorn_project(k, r, c, tight);
  TransportPlan twice = sinkhorn_project(once.entries(), r, c, tight);
  CHECK(max_abs_diff(once.entries(), twice.entries()) <= 1e-8);
}

TEST_CASE("projection is the KL minimizer over a 2x2 polytope") {
  // U(r,c) for N=2 is a segment parametrized by p11; scan it.
  Histogram r = histogram_from_samples(std::vector<double>{0.3, 0.7});
  Histogram c = histogram_from_samples(std::vector<double>{0.6, 0.4});
  Matrix k(2, 2);
  k << 2.0, 0.5, 1.0, 3.0;
  SinkhornConfig tight;
  tight.marginal_tol = 1e-13;
  TransportPlan p = sinkhorn_project(k, r, c, tight);
  const Matrix kn = k / k.sum();
  double best = 1e300, arg = 0.0;
  const double lo = 0.0, hi = 0.3;
  for (int s = 1; s < 300000; ++s) {
    const double t = lo + (hi - lo) * s / 300000.0;
    Matrix q(2, 2);
    q << t, 0.3 - t, 0.6 - t, 0.1 + t;
    const double v = kl_divergence(as_span(q), as_span(kn)).value;
    if (v < best) best = v, arg = t;
  }
  CHECK(p.entries()(0, 0) == doctest::Approx(arg).epsilon(1e-5));
}

TEST_CASE("zero rows and infeasible kernels") {
  Histogram r = histogram_from_samples(std::vector<double>{1, 0, 1});
  Histogram c = Histogram::uniform(3);
  Matrix k = Matrix::Ones(3, 3);
  TransportPlan p = sinkhorn_project(k, r, c);
  CHECK(p.entries().row(1).sum() == 0.0);

  Matrix bad = Matrix::Ones(3, 3);
  bad.row(0).setZero();
  CHECK_THROWS_AS(sinkhorn_project(bad, r, c), Error);
}

TEST_CASE("sweep budget exhaustion carries the best iterate") {
  std::mt19937_64 rng(8);
  Histogram r = oracle::random_histogram(rng, 6);
  Histogram c = oracle::random_histogram(rng, 6);
  Matrix k = Matrix::Ones(6, 6);
  k(0, 0) = 1e6;
  SinkhornConfig cfg;
  cfg.max_sweeps = 1;
  cfg.marginal_tol = 1e-14;
  try {
    sinkhorn_project(k, r, c, cfg);
    FAIL("expected SinkhornNotConverged");
  } catch (const SinkhornNotConverged& e) {
    CHECK(e.code() == ErrorCode::MaxSweepsExceeded);
    CHECK(e.best().sweeps == 1);
  }
}

TEST_CASE("entropic OT: linear and log domains agree") {
  std::mt19937_64 rng(31);
  Histogram r = oracle::random_histogram(rng, 15);
  Histogram c = oracle::random_histogram(rng, 15);
  CostMatrix m = oracle::random_sq_cost(rng, 15);
  SinkhornConfig lin, lg;
  lin.marginal_tol = lg.marginal_tol = 1e-12;
  lg.log_domain = true;
  SolveReport a = kl_regularized_ot(m, r, c, 0.05, lin);
  SolveReport b = kl_regularized_ot(m, r, c, 0.05, lg);
  CHECK(max_abs_diff(a.plan.entries(), b.plan.entries()) < 1e-10);
  CHECK(a.objective_value == doctest::Approx(b.objective_value).epsilon(1e-10));
  CHECK(a.converged());
}

TEST_CASE("entropic OT underflow needs the log domain") {
  Histogram r = Histogram::uniform(3);
  Matrix m(3, 3);
  m << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  m.row(0).array() += 1.0;
  CostMatrix cost(m);
  CHECK_THROWS_AS(kl_regularized_ot(cost, r, r, 1e-4), Error);
  SolveReport rep = kl_regularized_ot(cost, r, r, 1e-4, kl_baseline_config(1e-4));
  CHECK(rep.plan.marginal_residual() <= 1e-4);
}
