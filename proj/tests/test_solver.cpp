#include <doctest.h>

#include "oracles.hpp"
#include "renyi_ot/divergence.hpp"
#include "renyi_ot/solver.hpp"

#include <functional>
#include <random>

using namespace renyi_ot;

namespace {

MirrorDescentConfig tight() {
  MirrorDescentConfig cfg;
  cfg.iterate_tol = 1e-10;
  cfg.max_iters = 20000;
  cfg.inner.marginal_tol = 1e-12;
  return cfg;
}

// U(r, c) for N = 2 is the segment p11 = t in [max(0, r1 - c2), min(r1, c1)].
Matrix plan2(double t, const Histogram& r, const Histogram& c) {
  Matrix p(2, 2);
  p << t, r[0] - t, c[0] - t, r[1] - c[0] + t;
  return p;
}

double scan_min(const std::function<double(const Matrix&)>& f, const Histogram& r,
                const Histogram& c) {
  const double lo = std::max(0.0, r[0] - c[1]), hi = std::min(r[0], c[0]);
  auto at = [&](double t) { return f(plan2(t, r, c)); };
  // Uniform grid including the endpoints, then log-spaced points hugging
  // each end, then golden-section refinement around the best grid point.
  const int steps = 20000;
  double best = 1e300, arg = lo, width = (hi - lo) / steps;
  auto probe = [&](double t) {
    const double v = at(t);
    if (v < best) best = v, arg = t;
  };
  for (int s = 0; s <= steps; ++s) probe(lo + (hi - lo) * s / steps);
  for (int k = 1; k <= 300; ++k) {
    const double d = (hi - lo) * std::pow(10.0, -0.05 * k);
    probe(lo + d);
    probe(hi - d);
  }
  double a = std::max(lo, arg - width), b = std::min(hi, arg + width);
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (at(x1) < at(x2)) b = x2; else a = x1;
  }
  probe(0.5 * (a + b));
  return best;
}

struct Instance2 {
  Histogram r = histogram_from_samples(std::vector<double>{0.35, 0.65});
  Histogram c = histogram_from_samples(std::vector<double>{0.55, 0.45});
  CostMatrix m = [] {
    Matrix x(2, 2);
    x << 0.0, 1.0, 0.7, 0.2;
    return CostMatrix(x);
  }();
};

}  // namespace

TEST_CASE("renyi mirror descent matches a 2x2 grid scan") {
  Instance2 I;
  for (double a : {0.1, 0.5, 0.9}) {
    for (double e : {0.05, 0.5, 5.0}) {
      SolveReport rep = renyi_mirror_descent(I.m, I.r, I.c, a, e, tight());
      const double ref = scan_min(
          [&](const Matrix& p) { return renyi_objective(p, I.m, I.r, I.c, a, e); }, I.r, I.c);
      CHECK(rep.objective_value == doctest::Approx(ref).epsilon(1e-7));
      CHECK(rep.objective_value >= ref - 1e-9);
    }
  }
}

TEST_CASE("tsallis mirror descent matches a 2x2 grid scan") {
  Instance2 I;
  for (double q : {0.3, 1.6}) {
    SolveReport rep = tsallis_mirror_descent(I.m, I.r, I.c, q, 0.3, tight());
    const double ref = scan_min(
        [&](const Matrix& p) { return tsallis_objective(p, I.m, I.r, I.c, q, 0.3); }, I.r, I.c);
    CHECK(rep.objective_value == doctest::Approx(ref).epsilon(1e-7));
  }
  SolveReport ent = tsallis_entropy_mirror_descent(I.m, I.r, I.c, 1.6, 0.3, tight());
  const double ref = scan_min(
      [&](const Matrix& p) { return tsallis_entropy_objective(p, I.m, I.r, I.c, 1.6, 0.3); },
      I.r, I.c);
  CHECK(ent.objective_value == doctest::Approx(ref).epsilon(1e-7));
  CHECK(ent.regularizer.kind == RegularizerKind::TsallisEntropy);
}

TEST_CASE("regularized objective sits between exact cost and the independent coupling") {
  std::mt19937_64 rng(61);
  Histogram r = oracle::random_histogram(rng, 12);
  Histogram c = oracle::random_histogram(rng, 12);
  CostMatrix m = oracle::random_sq_cost(rng, 12);
  SolveReport ex = exact_ot(m, r, c);
  SolveReport rep = renyi_mirror_descent(m, r, c, 0.5, 0.1);
  CHECK(rep.objective_value >= ex.transport_cost - 1e-9);
  CHECK(rep.objective_value <= frobenius_dot(outer_product(r, c), m.entries()) + 1e-12);
  CHECK(rep.converged());
  CHECK(rep.plan.marginal_residual() <= 1e-4);
  CHECK(rep.trace.size() == static_cast<std::size_t>(rep.iterations) + 1);
  CHECK(rep.divergence_value >= 0.0);
}

TEST_CASE("step rules reach the same optimum") {
  std::mt19937_64 rng(67);
  Histogram r = oracle::random_histogram(rng, 6);
  Histogram c = oracle::random_histogram(rng, 6);
  CostMatrix m = oracle::random_sq_cost(rng, 6);
  MirrorDescentConfig armijo = tight();
  MirrorDescentConfig constant = tight();
  constant.step_rule = ConstantRule{0.5};
  const double a = renyi_mirror_descent(m, r, c, 0.5, 1.0, armijo).objective_value;
  const double b = renyi_mirror_descent(m, r, c, 0.5, 1.0, constant).objective_value;
  CHECK(a == doctest::Approx(b).epsilon(1e-7));
}

TEST_CASE("polyak rule runs and stays feasible") {
  std::mt19937_64 rng(71);
  Histogram r = oracle::random_histogram(rng, 6);
  Histogram c = oracle::random_histogram(rng, 6);
  CostMatrix m = oracle::random_sq_cost(rng, 6);
  MirrorDescentConfig cfg;
  cfg.step_rule = PolyakRule{};
  SolveReport rep = renyi_mirror_descent(m, r, c, 0.5, 1.0, cfg);
  CHECK(rep.plan.marginal_residual() <= 1e-4);
  CHECK(rep.objective_value <= frobenius_dot(outer_product(r, c), m.entries()) + 1e-12);
}

TEST_CASE("max iterations returns the best iterate") {
  std::mt19937_64 rng(73);
  Histogram r = oracle::random_histogram(rng, 10);
  Histogram c = oracle::random_histogram(rng, 10);
  CostMatrix m = oracle::random_sq_cost(rng, 10);
  MirrorDescentConfig cfg;
  cfg.max_iters = 3;
  SolveReport rep = renyi_mirror_descent(m, r, c, 0.3, 0.01, cfg);
  CHECK(rep.termination == Termination::MaxIterations);
  double best = 1e300;
  for (const auto& t : rep.trace) best = std::min(best, t.objective);
  CHECK(rep.objective_value <= best + 1e-9);
}

TEST_CASE("polyak step formula") {
  Matrix g(2, 2);
  g << 1, 0, 0, 1;
  CHECK(polyak_step(3.0, 1.0, g, 2.0) == doctest::Approx(0.5));
  CHECK(polyak_step(1.0, 1.0, g, 1.0) == 0.0);
  CHECK_THROWS_AS(polyak_step(2.0, 1.0, Matrix::Zero(2, 2), 1.0), Error);
}

TEST_CASE("tangent gradient ignores potentials") {
  std::mt19937_64 rng(79);
  Histogram r = oracle::random_histogram(rng, 5);
  Histogram c = oracle::random_histogram(rng, 5);
  Matrix g = Matrix::Random(5, 5);
  Matrix shifted = g;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) shifted(i, j) += 0.3 * i - 1.7 * j;
  CHECK(max_abs_diff(tangent_gradient(g, r, c), tangent_gradient(shifted, r, c)) < 1e-12);
  Matrix t = tangent_gradient(g, r, c);
  CHECK(t.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(t.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("config validation") {
  Instance2 I;
  MirrorDescentConfig bad;
  bad.max_iters = 0;
  CHECK_THROWS_AS(renyi_mirror_descent(I.m, I.r, I.c, 0.5, 1.0, bad), Error);
  CHECK_THROWS_AS(renyi_mirror_descent(I.m, I.r, I.c, 1.5, 1.0), Error);
  MirrorDescentConfig start;
  start.initial_plan = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(renyi_mirror_descent(I.m, I.r, I.c, 0.5, 1.0, start), Error);
  CHECK(step_rule_label(ConstantRule{2.0}) == "constant(eta=2)");
}
