#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"

namespace otrank {

// Kahan-compensated accumulator; summation order is whatever the caller uses.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const noexcept { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline constexpr double kNegativeSlack = 1e-12;

// Values in [-1e-12, 0) become 0; anything more negative is a bug.
inline double clamp_nonnegative(double v, const char* what) {
  if (v >= 0.0) return v;
  if (v >= -kNegativeSlack) return 0.0;
  throw ConsistencyError(std::string(what) + " evaluated to " + std::to_string(v) +
                         " (must be nonnegative)");
}

// Full n x n Euclidean distance matrix, row-major.
inline std::vector<double> distance_matrix(const PointCloud& p) {
  const std::size_t n = p.n();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      const double v = distance(p.row(k), p.row(l));
      dist[k * n + l] = v;
      dist[l * n + k] = v;
    }
  }
  return dist;
}

// In place: a_kl - rowmean_k - colmean_l + grandmean (matrix is symmetric).
inline void double_center(std::vector<double>& dist, std::size_t n) {
  std::vector<double> mean(n);
  KahanSum grand;
  for (std::size_t k = 0; k < n; ++k) {
    KahanSum s;
    for (std::size_t l = 0; l < n; ++l) s.add(dist[k * n + l]);
    mean[k] = s.value() / static_cast<double>(n);
    grand.add(s.value());
  }
  const double g = grand.value() / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) dist[k * n + l] += g - mean[k] - mean[l];
  }
}

/// Squared sample distance covariance S1 + S2 - 2 S3 of paired clouds.
///
/// Evaluated as the mean of products of double-centered distance matrices,
/// which equals the three-sum form identically and costs O(n^2 (d1 + d2)).
inline double dcov_sq_unclamped(const PointCloud& x, const PointCloud& y) {
  if (x.n() != y.n()) {
    throw ShapeError("dcov: " + std::to_string(x.n()) + " vs " + std::to_string(y.n()) +
                     " observations");
  }
  const std::size_t n = x.n();
  if (n == 0) throw ShapeError("dcov: empty input");
  auto a = distance_matrix(x);
  auto b = distance_matrix(y);
  double_center(a, n);
  double_center(b, n);
  KahanSum s;
  for (std::size_t k = 0; k < n * n; ++k) s.add(a[k] * b[k]);
  return s.value() / (static_cast<double>(n) * static_cast<double>(n));
}

inline double dcov_sq(const PointCloud& x, const PointCloud& y) {
  return clamp_nonnegative(dcov_sq_unclamped(x, y), "dcov_sq");
}

// Sum of |a_i - b_j| over all pairs (i in a, j in b), row-major order.
inline double sum_pairwise_distances(const PointCloud& a, const PointCloud& b) {
  KahanSum s;
  for (std::size_t i = 0; i < a.n(); ++i) {
    for (std::size_t j = 0; j < b.n(); ++j) s.add(distance(a.row(i), b.row(j)));
  }
  return s.value();
}

/// Squared energy distance
/// (2/mn) sum |x_i - y_j| - (1/m^2) sum |x_i - x_j| - (1/n^2) sum |y_i - y_j|.
inline double energy_sq_unclamped(const PointCloud& x, const PointCloud& y) {
  if (x.d() != y.d()) {
    throw ShapeError("energy: dimension " + std::to_string(x.d()) + " vs " +
                     std::to_string(y.d()));
  }
  if (x.n() == 0 || y.n() == 0) throw ShapeError("energy: empty sample");
  const double m = static_cast<double>(x.n());
  const double n = static_cast<double>(y.n());
  return 2.0 * sum_pairwise_distances(x, y) / (m * n) -
         sum_pairwise_distances(x, x) / (m * m) - sum_pairwise_distances(y, y) / (n * n);
}

inline double energy_sq(const PointCloud& x, const PointCloud& y) {
  return clamp_nonnegative(energy_sq_unclamped(x, y), "energy_sq");
}

// Sum over j < K of dcov_sq(block j, blocks j+1..K side by side).
inline double k_indep_dcov_sq(std::span<const PointCloud> blocks) {
  if (blocks.size() < 2) throw ShapeError("k-indep statistic: need at least 2 blocks");
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < blocks.size(); ++j) {
    total += dcov_sq(blocks[j], concat_cols(blocks.subspan(j + 1)));
  }
  return total;
}

// Sum over consecutive pairs of energy_sq(sample j, sample j+1).
inline double k_sample_energy_sq(std::span<const PointCloud> samples) {
  if (samples.size() < 2) throw ShapeError("k-sample statistic: need at least 2 samples");
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < samples.size(); ++j) {
    total += energy_sq(samples[j], samples[j + 1]);
  }
  return total;
}

/// (1/n^2) sum_ij (F_xy(x_i, y_j) - F_x(x_i) F_y(y_j))^2 with <= empirical CDFs.
///
/// Closed-form d = 1 companion of dcov_sq on lattice ranks (the latter equals
/// four times this value for tie-free data).
inline double hoeffding_integral(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("hoeffding_integral: length mismatch");
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("hoeffding_integral: empty input");
  const double inv_n = 1.0 / static_cast<double>(n);
  // Integer counts keep each CDF exact before the final square.
  std::vector<std::size_t> fx(n), fy(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      fx[i] += x[k] <= x[i];
      fy[i] += y[k] <= y[i];
    }
  }
  KahanSum s;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::size_t joint = 0;
      for (std::size_t k = 0; k < n; ++k) joint += (x[k] <= x[i]) && (y[k] <= y[j]);
      const double diff = static_cast<double>(joint) * inv_n -
                          static_cast<double>(fx[i]) * inv_n * static_cast<double>(fy[j]) * inv_n;
      s.add(diff * diff);
    }
  }
  return s.value() * inv_n * inv_n;
}

/// Two-sample Cramer-von Mises integral (1/(m+n)) sum_t (F_m(t) - G_n(t))^2
/// over the pooled observations t, with <= empirical CDFs.
inline double cvm_integral(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ShapeError("cvm_integral: empty sample");
  std::vector<double> xs(x.begin(), x.end()), ys(y.begin(), y.end());
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  std::vector<double> pooled(xs);
  pooled.insert(pooled.end(), ys.begin(), ys.end());
  KahanSum s;
  for (double t : pooled) {
    const auto cx = std::upper_bound(xs.begin(), xs.end(), t) - xs.begin();
    const auto cy = std::upper_bound(ys.begin(), ys.end(), t) - ys.begin();
    const double diff = static_cast<double>(cx) / static_cast<double>(xs.size()) -
                        static_cast<double>(cy) / static_cast<double>(ys.size());
    s.add(diff * diff);
  }
  return s.value() / static_cast<double>(pooled.size());
}

}  // namespace otrank
