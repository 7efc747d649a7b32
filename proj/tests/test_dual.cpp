#include <doctest.h>

#include "oracles.hpp"
#include "renyi_ot/divergence.hpp"
#include "renyi_ot/solver.hpp"

#include <cmath>
#include <random>

using namespace renyi_ot;

namespace {

struct Problem {
  Histogram r;
  Histogram c;
  CostMatrix m;
};

Problem random_problem(std::mt19937_64& rng, std::size_t n) {
  Histogram r = oracle::random_histogram(rng, n);
  Histogram c = oracle::random_histogram(rng, n);
  return {r, c, oracle::random_cost(rng, n)};
}

}  // namespace

TEST_CASE("dual gradient matches central differences") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    Problem P = random_problem(rng, 4);
    const double a = 0.2 + 0.06 * trial, e = 0.3;
    Vector q = Vector::Constant(8, -0.5) + 0.1 * Vector::Random(8);
    Vector g = dual_gradient(q, P.m, P.r, P.c, a, e);
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      Vector qp = q, qm = q;
      qp[k] += 1e-6;
      qm[k] -= 1e-6;
      const double fd = (dual_objective(qp, P.m, P.r, P.c, a, e) -
                         dual_objective(qm, P.m, P.r, P.c, a, e)) / 2e-6;
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("dual objective outside the domain") {
  std::mt19937_64 rng(89);
  Problem P = random_problem(rng, 3);
  Vector q = Vector::Constant(6, 5.0);
  CHECK(std::isinf(dual_objective(q, P.m, P.r, P.c, 0.5, 1.0)));
  CHECK_THROWS_AS(dual_gradient(q, P.m, P.r, P.c, 0.5, 1.0), Error);
  CHECK_THROWS_AS(dual_objective(Vector::Zero(5), P.m, P.r, P.c, 0.5, 1.0), Error);
}

TEST_CASE("dual constant") {
  const double a = 0.3, e = 2.0, k = a / (1 - a);
  CHECK(dual_constant(a, e) == doctest::Approx(-e * k * std::log(e) - e * k * (std::log(k) - 1)));
}

TEST_CASE("weak duality at arbitrary feasible points") {
  std::mt19937_64 rng(97);
  Problem P = random_problem(rng, 5);
  const double a = 0.5, e = 0.5;
  MirrorDescentConfig cfg;
  cfg.iterate_tol = 1e-10;
  cfg.inner.marginal_tol = 1e-12;
  const double primal = renyi_mirror_descent(P.m, P.r, P.c, a, e, cfg).objective_value;
  for (int t = 0; t < 20; ++t) {
    Vector q = -Vector::Random(10).cwiseAbs() - Vector::Constant(10, 0.01);
    CHECK(dual_objective(q, P.m, P.r, P.c, a, e) <= primal + 1e-9);
  }
}

TEST_CASE("dual ascent closes the gap") {
  std::mt19937_64 rng(101);
  Problem P = random_problem(rng, 6);
  const double a = 0.5, e = 0.5;
  MirrorDescentConfig cfg;
  cfg.iterate_tol = 1e-10;
  cfg.inner.marginal_tol = 1e-12;
  const double primal = renyi_mirror_descent(P.m, P.r, P.c, a, e, cfg).objective_value;
  DualResult d = dual_subgradient(P.m, P.r, P.c, a, e);
  CHECK(std::abs(d.value - primal) <= 1e-3 * (1 + std::abs(primal)));
  for (std::size_t k = 1; k < d.dual_trace.size(); ++k) {
    CHECK(d.dual_trace[k].value >= d.dual_trace[k - 1].value);
    CHECK(d.dual_trace[k].max_slack < 0.0);
  }
  TransportPlan p = plan_from_duals(d.q, P.m, P.r, P.c, a, 1e-2);
  CHECK(p.marginal_residual() <= 1e-2);
  TransportPlan pr = plan_from_duals(d.q, P.m, P.r, P.c, a, 1e-4, true);
  CHECK(pr.marginal_residual() <= 1e-4);
}

TEST_CASE("dual newton matches mirror descent and certifies optimality") {
  std::mt19937_64 rng(127);
  MirrorDescentConfig cfg;
  cfg.iterate_tol = 1e-10;
  cfg.max_iters = 50000;
  cfg.inner.marginal_tol = 1e-12;
  for (double a : {0.05, 0.5, 0.9}) {
    for (double e : {0.1, 1.0}) {
      Problem P = random_problem(rng, 6);
      const double primal = renyi_mirror_descent(P.m, P.r, P.c, a, e, cfg).objective_value;
      DualResult d = dual_newton(P.m, P.r, P.c, a, e);
      CHECK(d.report.converged());
      CHECK(d.report.objective_value == doctest::Approx(primal).epsilon(1e-8));
      CHECK(std::abs(d.report.objective_value - d.value) <= 1e-10);
      CHECK(d.report.plan.marginal_residual() <= 1e-10);
      for (std::size_t k = 1; k < d.dual_trace.size(); ++k) {
        CHECK(d.dual_trace[k].value >= d.dual_trace[k - 1].value - 1e-14);
        CHECK(d.dual_trace[k].max_slack < 0.0);
      }
    }
  }
}

TEST_CASE("dual newton handles empty support rows") {
  Histogram r = histogram_from_samples(std::vector<double>{0.0, 1.0, 2.0});
  Histogram c = histogram_from_samples(std::vector<double>{1.0, 1.0, 0.0});
  Matrix m(3, 3);
  m << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  DualResult d = dual_newton(CostMatrix(m), r, c, 0.3, 0.2);
  CHECK(d.report.converged());
  CHECK(d.report.plan.entries().row(0).sum() == 0.0);
  CHECK(d.report.plan.entries().col(2).sum() == 0.0);
  CHECK(d.report.plan.marginal_residual() <= 1e-10);
}

TEST_CASE("dual newton argument checks") {
  std::mt19937_64 rng(131);
  Problem P = random_problem(rng, 3);
  CHECK_THROWS_AS(dual_newton(P.m, P.r, P.c, 1.0, 0.1), Error);
  CHECK_THROWS_AS(dual_newton(P.m, P.r, P.c, 0.5, 0.0), Error);
  NewtonConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(dual_newton(P.m, P.r, P.c, 0.5, 0.1, bad), Error);
}

TEST_CASE("premetric: gamma zero gives the independent coupling") {
  std::mt19937_64 rng(103);
  Problem P = random_problem(rng, 5);
  PremetricResult res = premetric_ball_solve(P.m, P.r, P.c, 0.5, 0.0);
  CHECK(max_abs_diff(res.report.plan.entries(), outer_product(P.r, P.c)) < 1e-15);
  CHECK(std::isinf(res.epsilon_star));
}

TEST_CASE("premetric: large gamma gives the exact cost") {
  std::mt19937_64 rng(107);
  Problem P = random_problem(rng, 5);
  SolveReport ex = exact_ot(P.m, P.r, P.c);
  const double rad = renyi_to_independent(ex.plan.entries(), P.r, P.c, 0.5).value;
  PremetricResult res = premetric_ball_solve(P.m, P.r, P.c, 0.5, rad + 1.0);
  CHECK(res.report.transport_cost == doctest::Approx(ex.transport_cost).epsilon(1e-12));
  CHECK(res.epsilon_star == 0.0);
}

TEST_CASE("premetric: intermediate gamma is attained") {
  std::mt19937_64 rng(109);
  Problem P = random_problem(rng, 5);
  SolveReport ex = exact_ot(P.m, P.r, P.c);
  const double rad = renyi_to_independent(ex.plan.entries(), P.r, P.c, 0.5).value;
  PremetricConfig cfg;
  cfg.solver.iterate_tol = 1e-9;
  cfg.solver.inner.marginal_tol = 1e-10;
  PremetricResult res = premetric_ball_solve(P.m, P.r, P.c, 0.5, 0.4 * rad, cfg);
  CHECK(std::abs(res.report.divergence_value - 0.4 * rad) <= 1e-4);
  CHECK(res.epsilon_star > 0.0);
  CHECK(res.report.transport_cost >= ex.transport_cost - 1e-12);
}

TEST_CASE("premetric argument checks") {
  std::mt19937_64 rng(113);
  Problem P = random_problem(rng, 3);
  CHECK_THROWS_AS(premetric_ball_solve(P.m, P.r, P.c, 1.0, 0.1), Error);
  CHECK_THROWS_AS(premetric_ball_solve(P.m, P.r, P.c, 0.5, -0.1), Error);
}
