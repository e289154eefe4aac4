#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"

namespace otrank {

// Dense n x n matrix of finite, nonnegative assignment costs (row-major).
class CostMatrix {
 public:
  CostMatrix() = default;

  CostMatrix(std::size_t n, std::vector<double> entries) : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n_ * n_) throw ShapeError("cost matrix: not square");
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      if (!std::isfinite(entries_[k]) || entries_[k] < 0.0) {
        throw DataError("cost matrix: entry (" + std::to_string(k / n_ + 1) + "," +
                        std::to_string(k % n_ + 1) + ") is not a finite nonnegative value");
      }
    }
  }

  CostMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    std::vector<double> e;
    for (const auto& r : rows) {
      if (r.size() != rows.size()) throw ShapeError("cost matrix: not square");
      e.insert(e.end(), r.begin(), r.end());
    }
    *this = CostMatrix(rows.size(), std::move(e));
  }

  std::size_t n() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  const std::vector<double>& entries() const noexcept { return entries_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> entries_;
};

/// Solution of an assignment problem.
///
/// perm[i] is the 0-based column (grid index) matched to row i. The solver
/// also fills the dual potentials: row_potential[i] + col_potential[j] <=
/// cost(i, j) everywhere, with equality on the matched cells. brute_force
/// leaves them empty.
struct Assignment {
  std::vector<std::size_t> perm;
  double total_cost = 0.0;
  std::vector<double> row_potential;
  std::vector<double> col_potential;
};

inline double assignment_cost(const CostMatrix& cost, const std::vector<std::size_t>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += cost(i, perm[i]);
  return s;
}

inline bool is_permutation_of_range(const std::vector<std::size_t>& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = 1;
  }
  return true;
}

// entry (i, j) = |x_i - h_j|^2.
inline CostMatrix build_cost(const PointCloud& data, const RankGrid& grid) {
  if (data.n() != grid.n() || data.d() != grid.d()) {
    throw ShapeError("build_cost: data is " + std::to_string(data.n()) + "x" +
                     std::to_string(data.d()) + " but grid is " + std::to_string(grid.n()) +
                     "x" + std::to_string(grid.d()));
  }
  data.require_finite();
  const std::size_t n = data.n();
  std::vector<double> e(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.row(i);
    for (std::size_t j = 0; j < n; ++j) e[i * n + j] = squared_distance(x, grid.points().row(j));
  }
  return CostMatrix(n, std::move(e));
}

/// Exact minimum-cost assignment by shortest augmenting paths.
///
/// Rows are inserted one at a time in index order; each insertion runs a
/// Dijkstra-style search over reduced costs and augments along the shortest
/// path. Column ties in the search are broken toward the lowest index, and no
/// tolerances are used, so identical inputs always produce identical outputs.
/// O(n^3) time, O(n) extra memory beyond the cost matrix.
inline Assignment solve(const CostMatrix& cost) {
  const std::size_t n = cost.n();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based internally; column 0 is the virtual root of each search.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* row = cost.entries().data() + (i0 - 1) * n;
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.perm.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.perm[match[j] - 1] = j - 1;
  out.total_cost = assignment_cost(cost, out.perm);
  out.row_potential.assign(u.begin() + 1, u.end());
  out.col_potential.assign(v.begin() + 1, v.end());
  assert(is_permutation_of_range(out.perm));
  return out;
}

inline constexpr std::size_t kBruteForceMaxN = 10;

// Exhaustive search over all n! permutations in lexicographic order; the first
// minimizer wins ties.
inline Assignment brute_force(const CostMatrix& cost) {
  const std::size_t n = cost.n();
  if (n > kBruteForceMaxN) {
    throw CapacityError("brute_force: n = " + std::to_string(n) + " exceeds " +
                        std::to_string(kBruteForceMaxN));
  }
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Assignment best;
  best.perm = p;
  best.total_cost = assignment_cost(cost, p);
  while (std::next_permutation(p.begin(), p.end())) {
    const double c = assignment_cost(cost, p);
    if (c < best.total_cost) {
      best.total_cost = c;
      best.perm = p;
    }
  }
  return best;
}

}  // namespace otrank
