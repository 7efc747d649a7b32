#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner.

#include "renyi_ot/core.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

using renyi_ot::CostMatrix;
using renyi_ot::Histogram;
using renyi_ot::Matrix;

// 60 decimal digits.
using Big = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<60>>;

inline Big big_renyi(const std::vector<double>& s, const std::vector<double>& t, double alpha) {
  Big acc = 0, a = alpha;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == 0.0 || t[k] == 0.0) continue;
    acc += pow(Big(s[k]), a) * pow(Big(t[k]), Big(1) - a);
  }
  return log(acc) / (a - 1);
}

inline Big big_tsallis(const std::vector<double>& s, const std::vector<double>& t, double q) {
  Big acc = 0, qq = q;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == 0.0) continue;
    acc += pow(Big(s[k]), qq) * pow(Big(t[k]), Big(1) - qq);
  }
  return (acc - 1) / (qq - 1);
}

inline Big big_kl(const std::vector<double>& s, const std::vector<double>& t) {
  Big acc = 0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] == 0.0) continue;
    acc += Big(s[k]) * log(Big(s[k]) / Big(t[k]));
  }
  return acc;
}

inline double rel_err(double x, const Big& ref) {
  const Big d = abs(Big(x) - ref);
  const Big scale = abs(ref) > 0 ? abs(ref) : Big(1);
  return static_cast<double>(d / scale);
}

/// Positive probability vector with entries drawn from U(0.05, 1).
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  return v;
}

inline Histogram random_histogram(std::mt19937_64& rng, std::size_t n) {
  return renyi_ot::histogram_from_samples(random_simplex(rng, n));
}

/// Squared distances |x_i - y_j|^2 between random points of [0,1].
inline CostMatrix random_sq_cost(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = u(rng);
  for (auto& v : y) v = u(rng);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (x[i] - y[j]) * (x[i] - y[j]);
  return CostMatrix(m);
}

/// Uniform random entries in [0, 1).
inline CostMatrix random_cost(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return CostMatrix(m);
}

/// Minimum of <M, P> over U(r, c) by enumerating spanning trees of the
/// bipartite graph K_{n,n}. Every vertex of U(r, c) is supported on some
/// spanning tree (2n - 1 edges), and each tree determines a unique flow; the
/// nonnegative flows are exactly the vertices.
inline double vertex_enumeration(const CostMatrix& cost, const Histogram& r, const Histogram& c) {
  const int n = static_cast<int>(r.size());
  const int edges = n * n;
  const int pick = 2 * n - 1;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> chosen;

  auto evaluate = [&]() {
    // Solve the tree flow by repeatedly peeling leaves.
    std::vector<double> rr(n), cc(n);
    for (int i = 0; i < n; ++i) rr[i] = r[i], cc[i] = c[i];
    std::vector<bool> used(pick, false);
    std::vector<double> flow(pick, 0.0);
    for (int round = 0; round < pick; ++round) {
      // Find a node of degree one among unused edges.
      bool found = false;
      for (int node = 0; node < 2 * n && !found; ++node) {
        int deg = 0, last = -1;
        for (int e = 0; e < pick; ++e) {
          if (used[e]) continue;
          const int i = chosen[e] / n, j = chosen[e] % n;
          if ((node < n && i == node) || (node >= n && j == node - n)) ++deg, last = e;
        }
        if (deg != 1) continue;
        const int i = chosen[last] / n, j = chosen[last] % n;
        const double f = node < n ? rr[i] : cc[j];
        flow[last] = f;
        rr[i] -= f;
        cc[j] -= f;
        used[last] = true;
        found = true;
      }
      if (!found) return;  // contains a cycle: not a tree
    }
    double total = 0.0;
    for (int e = 0; e < pick; ++e) {
      if (flow[e] < -1e-13) return;
      total += flow[e] * cost.entries()(chosen[e] / n, chosen[e] % n);
    }
    for (int i = 0; i < n; ++i)
      if (std::abs(rr[i]) > 1e-12 || std::abs(cc[i]) > 1e-12) return;
    best = std::min(best, total);
  };

  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(chosen.size()) == pick) {
      evaluate();
      return;
    }
    for (int e = start; e < edges; ++e) {
      if (edges - e < pick - static_cast<int>(chosen.size())) break;
      chosen.push_back(e);
      rec(e + 1);
      chosen.pop_back();
    }
  };
  rec(0);
  return best;
}

/// Central difference of f at x along the matrix unit direction (i, j).
template <class F>
double central_difference(F&& f, const Matrix& x, Eigen::Index i, Eigen::Index j, double h) {
  Matrix xp = x, xm = x;
  xp(i, j) += h;
  xm(i, j) -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

}  // namespace oracle
