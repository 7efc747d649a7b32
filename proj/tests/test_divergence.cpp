#include <doctest.h>

#include "oracles.hpp"
#include "renyi_ot/divergence.hpp"

#include <cmath>
#include <random>

using namespace renyi_ot;

TEST_CASE("divergences agree with the 60-digit oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> size(1, 16);
  std::uniform_real_distribution<double> order(0.02, 0.98);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = size(rng);
    auto s = oracle::random_simplex(rng, n);
    auto t = oracle::random_simplex(rng, n);
    const double a = order(rng);
    auto rv = renyi_divergence(s, t, a);
    auto tv = tsallis_divergence(s, t, a);
    auto kv = kl_divergence(s, t);
    REQUIRE(rv.finite);
    worst = std::max({worst, oracle::rel_err(rv.value, oracle::big_renyi(s, t, a)),
                      oracle::rel_err(tv.value, oracle::big_tsallis(s, t, a)),
                      oracle::rel_err(kv.value, oracle::big_kl(s, t))});
    CHECK(rv.value >= tv.value);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("tsallis with q above one against the oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = oracle::random_simplex(rng, 7);
    auto t = oracle::random_simplex(rng, 7);
    const double q = 1.6;
    CHECK(oracle::rel_err(tsallis_divergence(s, t, q).value, oracle::big_tsallis(s, t, q)) <
          1e-12);
  }
}

TEST_CASE("divergence of a distribution to itself is zero") {
  std::vector<double> s{0.2, 0.3, 0.5};
  CHECK(std::abs(renyi_divergence(s, s, 0.3).value) < 1e-15);
  CHECK(std::abs(tsallis_divergence(s, s, 0.3).value) < 1e-15);
  CHECK(std::abs(kl_divergence(s, s).value) < 1e-15);
}

TEST_CASE("support conventions") {
  std::vector<double> s{0.5, 0.5, 0.0};
  std::vector<double> t{0.0, 0.5, 0.5};
  // KL is infinite when s has mass where t has none.
  CHECK_FALSE(kl_divergence(s, t).finite);
  // Renyi with alpha < 1 only sees the common support.
  auto r = renyi_divergence(s, t, 0.5);
  CHECK(r.finite);
  CHECK(r.value == doctest::Approx(-2.0 * std::log(0.5)));
  // Disjoint supports: Renyi is +inf.
  std::vector<double> u{1.0, 0.0};
  std::vector<double> v{0.0, 1.0};
  CHECK_FALSE(renyi_divergence(u, v, 0.5).finite);
}

TEST_CASE("renyi increases with the order") {
  std::mt19937_64 rng(3);
  auto s = oracle::random_simplex(rng, 9);
  auto t = oracle::random_simplex(rng, 9);
  double prev = 0.0;
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double v = renyi_divergence(s, t, a).value;
    CHECK(v >= prev);
    prev = v;
  }
  CHECK(prev <= kl_divergence(s, t).value + 1e-12);
}

TEST_CASE("parameter errors") {
  std::vector<double> s{0.5, 0.5};
  CHECK_THROWS_AS(renyi_divergence(s, s, 1.0), Error);
  CHECK_THROWS_AS(tsallis_divergence(s, s, 1.0), Error);
  std::vector<double> t{1.0};
  CHECK_THROWS_AS(kl_divergence(s, t), Error);
}

TEST_CASE("tsallis entropy") {
  std::vector<double> s{0.25, 0.25, 0.25, 0.25};
  CHECK(tsallis_entropy(s, 2.0) == doctest::Approx(0.75));
}

namespace {

Matrix random_interior_plan(std::mt19937_64& rng, const Histogram& r, const Histogram& c) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Matrix p = outer_product(r, c);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] *= u(rng);
  return p / p.sum();
}

double max_rel(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double a = analytic.data()[k], b = numeric.data()[k];
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  return worst;
}

template <class Obj>
Matrix fd_gradient(Obj&& f, const Matrix& p) {
  Matrix g(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      g(i, j) = oracle::central_difference(f, p, i, j, 1e-6);
  return g;
}

}  // namespace

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  std::uniform_real_distribution<double> order(0.1, 0.9);
  std::uniform_real_distribution<double> eps(0.05, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = size(rng);
    Histogram r = oracle::random_histogram(rng, n);
    Histogram c = oracle::random_histogram(rng, n);
    CostMatrix m = oracle::random_cost(rng, n);
    Matrix p = random_interior_plan(rng, r, c);
    const double a = order(rng), e = eps(rng);
    worst = std::max(worst, max_rel(renyi_gradient(p, m, r, c, a, e),
                                    fd_gradient([&](const Matrix& x) {
                                      return renyi_objective(x, m, r, c, a, e);
                                    }, p)));
    worst = std::max(worst, max_rel(tsallis_gradient(p, m, r, c, a, e),
                                    fd_gradient([&](const Matrix& x) {
                                      return tsallis_objective(x, m, r, c, a, e);
                                    }, p)));
    worst = std::max(worst, max_rel(tsallis_entropy_gradient(p, m, r, c, 1.6, e),
                                    fd_gradient([&](const Matrix& x) {
                                      return tsallis_entropy_objective(x, m, r, c, 1.6, e);
                                    }, p)));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("renyi gradient rejects boundary points") {
  Histogram r = Histogram::uniform(2);
  Matrix p(2, 2);
  p << 0.5, 0.0, 0.0, 0.5;
  CostMatrix m(Matrix::Zero(2, 2));
  CHECK_THROWS_AS(renyi_gradient(p, m, r, r, 0.5, 1.0), Error);
  // q > 1 extends to the boundary.
  CHECK_NOTHROW(tsallis_gradient(p, m, r, r, 1.6, 1.0));
}

TEST_CASE("objectives at the independent coupling") {
  Histogram r = histogram_from_samples(std::vector<double>{1, 2});
  Histogram c = histogram_from_samples(std::vector<double>{2, 1});
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  CostMatrix cost(m);
  Matrix p = outer_product(r, c);
  const double transport = frobenius_dot(p, m);
  CHECK(renyi_objective(p, cost, r, c, 0.4, 3.0) == doctest::Approx(transport));
  CHECK(kl_objective(p, cost, r, c, 3.0) == doctest::Approx(transport));
  CHECK(tsallis_objective(p, cost, r, c, 0.4, 3.0) == doctest::Approx(transport));
  CHECK(mutual_information_alpha(p, r, c, 0.3) == doctest::Approx(1.0));
}
