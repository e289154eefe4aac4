#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "otrank/assign.hpp"
#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"
#include "otrank/rng.hpp"

namespace otrank {

/// Empirical rank map: observation i is sent to grid point perm[i].
///
/// `ranks` holds the assigned grid points in observation order, so it is a
/// row permutation of grid.points(). Warnings record input conditions that
/// break the continuity assumption (duplicate rows) without failing.
struct RankMap {
  RankGrid grid;
  std::vector<std::size_t> perm;
  PointCloud ranks;
  std::vector<std::string> warnings;
};

// Number of rows equal to an earlier row, and the first such pair (1-based).
inline std::size_t count_duplicate_rows(const PointCloud& data, std::size_t* first_a = nullptr,
                                        std::size_t* first_b = nullptr) {
  std::vector<std::size_t> order(data.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = data.row(a);
    const auto rb = data.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t dups = 0;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto a = data.row(order[k - 1]);
    const auto b = data.row(order[k]);
    if (std::equal(a.begin(), a.end(), b.begin())) {
      if (dups == 0 && first_a && first_b) {
        *first_a = std::min(order[k - 1], order[k]) + 1;
        *first_b = std::max(order[k - 1], order[k]) + 1;
      }
      ++dups;
    }
  }
  return dups;
}

inline RankMap empirical_ranks(const PointCloud& data, const RankGrid& grid) {
  const CostMatrix cost = build_cost(data, grid);
  Assignment a = solve(cost);
  PointCloud ranks = grid.points().permute_rows(a.perm);
  RankMap out{grid, std::move(a.perm), std::move(ranks), {}};
  std::size_t ia = 0, ib = 0;
  if (const std::size_t dups = count_duplicate_rows(data, &ia, &ib); dups > 0) {
    out.warnings.push_back("ties: " + std::to_string(dups) + " duplicate observation(s) (rows " +
                           std::to_string(ia) + " and " + std::to_string(ib) +
                           " coincide); ranks follow the solver's deterministic tie-break");
  }
  return out;
}

struct PooledRanks {
  RankMap map;                     // rank map of the concatenated sample
  std::vector<PointCloud> slices;  // ranks of each input sample, in input order
};

// One rank map for the concatenation (sample 1, sample 2, ...), re-split.
inline PooledRanks pooled_ranks(std::span<const PointCloud> samples, const RankGrid& grid) {
  if (samples.empty()) throw ShapeError("pooled_ranks: no samples");
  std::size_t total = 0;
  for (const auto& s : samples) {
    if (s.d() != grid.d()) {
      throw ShapeError("pooled_ranks: sample dimension " + std::to_string(s.d()) +
                       " != grid dimension " + std::to_string(grid.d()));
    }
    total += s.n();
  }
  if (total != grid.n()) {
    throw ShapeError("pooled_ranks: " + std::to_string(total) + " pooled observations but grid has " +
                     std::to_string(grid.n()) + " points");
  }
  PooledRanks out{empirical_ranks(concat_rows(samples), grid), {}};
  std::size_t offset = 0;
  for (const auto& s : samples) {
    out.slices.push_back(out.map.ranks.slice_rows(offset, s.n()));
    offset += s.n();
  }
  return out;
}

/// Two-point transport between {x, -x} and the grid halves {a, b}.
///
/// Returns true when x is sent to b (the swapped pairing), which happens only
/// when the swap is strictly cheaper; ties keep x -> a.
inline bool symmetric_pair_swapped(std::span<const double> x, std::span<const double> a,
                                   std::span<const double> b) {
  double keep = 0.0;
  double swap = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double xa = x[k] - a[k], nxb = -x[k] - b[k];
    const double xb = x[k] - b[k], nxa = -x[k] - a[k];
    keep += xa * xa + nxb * nxb;
    swap += xb * xb + nxa * nxa;
  }
  return swap < keep;
}

struct SymmetryRanks {
  RankGrid grid;          // halton_grid(n, 2d)
  PointCloud of_x;        // rank of X_i
  PointCloud of_neg_x;    // rank of -X_i
  PointCloud pair_first;  // first d coordinates of each grid point, grid order
  PointCloud pair_second; // last d coordinates of each grid point, grid order
  std::vector<std::string> warnings;
};

// Assigns the pairs {X_i, -X_i} to the points (a, b) of a 2d-dimensional
// Halton grid and orients each pair between X_i and -X_i.
//
// Each pair costs the cheaper of its two orientations, so both stages are
// solved together. Transporting Z_i = (X_i, -X_i) first and orienting after
// ties the orientation to the data: the step-one optimum favours grid points
// with x.(a - b) > 0, which step two then keeps, and the flips are far from
// fair under a symmetric law. With the orientation-free cost, replacing X_i
// by -X_i leaves the unordered assignment unchanged and only relabels the
// halves.
inline SymmetryRanks paired_symmetry_ranks(const PointCloud& data) {
  if (data.n() == 0 || data.d() == 0) throw ShapeError("symmetry ranks: empty data");
  data.require_finite();
  const std::size_t n = data.n();
  const std::size_t d = data.d();
  RankGrid grid = halton_grid(n, 2 * d);
  SymmetryRanks out{grid, PointCloud(n, d), PointCloud(n, d), grid.points().slice_cols(0, d),
                    grid.points().slice_cols(d, d), {}};
  std::vector<double> entries(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = data.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = out.pair_first.row(j);
      const auto b = out.pair_second.row(j);
      double keep = 0.0, swap = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double xa = x[k] - a[k], nxb = -x[k] - b[k];
        const double xb = x[k] - b[k], nxa = -x[k] - a[k];
        keep += xa * xa + nxb * nxb;
        swap += xb * xb + nxa * nxa;
      }
      entries[i * n + j] = std::min(keep, swap);
    }
  }
  const Assignment sol = solve(CostMatrix(n, std::move(entries)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = out.pair_first.row(sol.perm[i]);
    const auto b = out.pair_second.row(sol.perm[i]);
    const bool swapped = symmetric_pair_swapped(data.row(i), a, b);
    const auto to_x = swapped ? b : a;
    const auto to_neg = swapped ? a : b;
    std::copy(to_x.begin(), to_x.end(), out.of_x.row(i).begin());
    std::copy(to_neg.begin(), to_neg.end(), out.of_neg_x.row(i).begin());
  }
  std::size_t ia = 0, ib = 0;
  if (const std::size_t dups = count_duplicate_rows(data, &ia, &ib); dups > 0) {
    out.warnings.push_back("ties: " + std::to_string(dups) + " duplicate observation(s) (rows " +
                           std::to_string(ia) + " and " + std::to_string(ib) +
                           " coincide); ranks follow the solver's deterministic tie-break");
  }
  return out;
}

struct PrerankResult {
  PointCloud data;
  std::vector<std::string> warnings;
};

// Each column replaced by its 1-D ranks / n; tied values share the mean rank.
inline PrerankResult coordinatewise_prerank(const PointCloud& data) {
  const std::size_t n = data.n();
  PrerankResult out{PointCloud(n, data.d()), {}};
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < data.d(); ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data(a, j) < data(b, j); });
    std::size_t ties = 0;
    for (std::size_t start = 0; start < n;) {
      std::size_t end = start + 1;
      while (end < n && data(order[end], j) == data(order[start], j)) ++end;
      // ranks start+1 .. end share their average
      const double avg = 0.5 * static_cast<double>(start + 1 + end);
      for (std::size_t k = start; k < end; ++k) {
        out.data(order[k], j) = avg / static_cast<double>(n);
      }
      if (end - start > 1) ties += end - start - 1;
      start = end;
    }
    if (ties > 0) {
      out.warnings.push_back("ties: column " + std::to_string(j + 1) + " has " +
                             std::to_string(ties) + " tied value(s); average ranks used");
    }
  }
  return out;
}

// Adds independent Uniform(-scale, scale) noise to every entry. Distinct
// inputs sharing a seed should use distinct streams.
inline PointCloud jitter(const PointCloud& data, double scale, std::uint64_t seed,
                         std::uint64_t stream = 0x6a17) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw DataError("jitter: scale must be >= 0");
  Rng rng(seed, stream);
  PointCloud out = data;
  for (std::size_t i = 0; i < out.n(); ++i) {
    for (std::size_t j = 0; j < out.d(); ++j) out(i, j) += rng.uniform(-scale, scale);
  }
  return out;
}

}  // namespace otrank
