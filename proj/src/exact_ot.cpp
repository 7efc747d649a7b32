#include "renyi_ot/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>

namespace renyi_ot {

namespace {

using Index = Eigen::Index;

// Transportation simplex on the complete bipartite graph rows x cols. Nodes
// 0..n-1 are rows, n..2n-1 are columns; a basis is a spanning tree of 2n-1
// cells.
class TransportationSimplex {
 public:
  TransportationSimplex(const Matrix& cost, const Vector& supply, const Vector& demand)
      : cost_(cost), n_(static_cast<int>(cost.rows())) {
    flow_ = Matrix::Zero(n_, n_);
    basic_.assign(static_cast<std::size_t>(n_ * n_), false);
    north_west_corner(supply, demand);
    const double scale = std::max(1.0, cost.cwiseAbs().maxCoeff());
    tol_ = 1e-13 * scale;
  }

  int solve() {
    int pivots = 0;
    int degenerate_run = 0;
    while (true) {
      compute_potentials();
      const bool bland = degenerate_run > 2 * n_;
      const int entering = bland ? first_improving() : most_improving();
      if (entering < 0) break;
      const double theta = pivot(entering);
      degenerate_run = theta > 0.0 ? 0 : degenerate_run + 1;
      ++pivots;
    }
    return pivots;
  }

  const Matrix& flow() const { return flow_; }

 private:
  void north_west_corner(const Vector& supply, const Vector& demand) {
    Vector s = supply, d = demand;
    int i = 0, j = 0;
    while (true) {
      const double x = std::max(0.0, std::min(s[i], d[j]));
      set_basic(i, j, true);
      flow_(i, j) = x;
      s[i] -= x;
      d[j] -= x;
      if (i == n_ - 1 && j == n_ - 1) break;
      if (j == n_ - 1 || (i < n_ - 1 && s[i] <= d[j]))
        ++i;
      else
        ++j;
    }
    // The last cell absorbs rounding so that the corner totals match.
    flow_(n_ - 1, n_ - 1) = std::max(0.0, flow_(n_ - 1, n_ - 1) + std::min(s[n_ - 1], d[n_ - 1]));
  }

  void set_basic(int i, int j, bool on) { basic_[static_cast<std::size_t>(i * n_ + j)] = on; }
  bool is_basic(int i, int j) const { return basic_[static_cast<std::size_t>(i * n_ + j)]; }

  void build_tree() {
    adj_.assign(static_cast<std::size_t>(2 * n_), {});
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (is_basic(i, j)) {
          adj_[static_cast<std::size_t>(i)].push_back(n_ + j);
          adj_[static_cast<std::size_t>(n_ + j)].push_back(i);
        }
  }

  void compute_potentials() {
    build_tree();
    u_.assign(static_cast<std::size_t>(n_), 0.0);
    v_.assign(static_cast<std::size_t>(n_), 0.0);
    std::vector<bool> seen(static_cast<std::size_t>(2 * n_), false);
    std::queue<int> q;
    q.push(0);
    seen[0] = true;
    while (!q.empty()) {
      const int node = q.front();
      q.pop();
      for (int next : adj_[static_cast<std::size_t>(node)]) {
        if (seen[static_cast<std::size_t>(next)]) continue;
        seen[static_cast<std::size_t>(next)] = true;
        if (node < n_) {
          const int j = next - n_;
          v_[static_cast<std::size_t>(j)] = cost_(node, j) - u_[static_cast<std::size_t>(node)];
        } else {
          const int j = node - n_;
          u_[static_cast<std::size_t>(next)] = cost_(next, j) - v_[static_cast<std::size_t>(j)];
        }
        q.push(next);
      }
    }
  }

  double reduced_cost(int i, int j) const {
    return cost_(i, j) - u_[static_cast<std::size_t>(i)] - v_[static_cast<std::size_t>(j)];
  }

  int first_improving() const {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (!is_basic(i, j) && reduced_cost(i, j) < -tol_) return i * n_ + j;
    return -1;
  }

  int most_improving() const {
    int best = -1;
    double best_rc = -tol_;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        if (is_basic(i, j)) continue;
        const double rc = reduced_cost(i, j);
        if (rc < best_rc) {
          best_rc = rc;
          best = i * n_ + j;
        }
      }
    return best;
  }

  // Path of cells from row node `from` to column node `to` through the tree.
  std::vector<int> tree_path(int from, int to) const {
    std::vector<int> parent(static_cast<std::size_t>(2 * n_), -1);
    std::queue<int> q;
    q.push(from);
    parent[static_cast<std::size_t>(from)] = from;
    while (!q.empty()) {
      const int node = q.front();
      q.pop();
      if (node == to) break;
      for (int next : adj_[static_cast<std::size_t>(node)]) {
        if (parent[static_cast<std::size_t>(next)] != -1) continue;
        parent[static_cast<std::size_t>(next)] = node;
        q.push(next);
      }
    }
    std::vector<int> cells;  // ordered from `to` back to `from`
    int node = to;
    while (node != from) {
      const int prev = parent[static_cast<std::size_t>(node)];
      const int i = node < n_ ? node : prev;
      const int j = node < n_ ? prev - n_ : node - n_;
      cells.push_back(i * n_ + j);
      node = prev;
    }
    return cells;
  }

  double pivot(int entering) {
    const int ei = entering / n_, ej = entering % n_;
    const std::vector<int> path = tree_path(ei, n_ + ej);
    // Cells alternate -, +, -, ... starting next to the entering column.
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const int cell = path[k];
      const double x = flow_(cell / n_, cell % n_);
      if (x < theta || (x == theta && cell < leaving)) {
        theta = x;
        leaving = cell;
      }
    }
    theta = std::max(theta, 0.0);
    for (std::size_t k = 0; k < path.size(); ++k) {
      const int cell = path[k];
      double& x = flow_(cell / n_, cell % n_);
      x = (k % 2 == 0) ? std::max(0.0, x - theta) : x + theta;
    }
    flow_(ei, ej) = theta;
    flow_(leaving / n_, leaving % n_) = 0.0;
    set_basic(ei, ej, true);
    set_basic(leaving / n_, leaving % n_, false);
    return theta;
  }

  const Matrix& cost_;
  int n_;
  double tol_ = 0.0;
  Matrix flow_;
  std::vector<bool> basic_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> u_, v_;
};

}  // namespace

SolveReport exact_ot(const CostMatrix& cost, const Histogram& r, const Histogram& c) {
  const auto start = std::chrono::steady_clock::now();
  if (cost.size() != r.size() || c.size() != r.size())
    throw Error(ErrorCode::ShapeMismatch, "cost and marginals have different sizes");
  TransportationSimplex simplex(cost.entries(), r.weights(), c.weights());
  const int pivots = simplex.solve();

  Matrix plan = simplex.flow();
  for (Index i = 0; i < plan.rows(); ++i)
    for (Index j = 0; j < plan.cols(); ++j)
      if (r.weights()[i] * c.weights()[j] == 0.0) plan(i, j) = 0.0;

  TransportPlan validated = validate_plan(plan, r, c, 1e-9);
  SolveReport report{std::move(validated), RegularizerSpec::none()};
  report.transport_cost = frobenius_dot(cost.entries(), report.plan.entries());
  report.objective_value = report.transport_cost;
  report.divergence_value = 0.0;
  report.iterations = pivots;
  report.trace.push_back({pivots, report.objective_value, 0.0, report.plan.marginal_residual()});
  report.termination = Termination::IterateResidual;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace renyi_ot
