#pragma once

// Independent reference computations for the test suites. Everything here is
// written directly from the defining formulas, without the library's
// shortcuts (double centering, distance-matrix reuse, solver).

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "otrank/assign.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"

namespace oracle {

using otrank::PointCloud;

inline double dist(const PointCloud& a, std::size_t i, const PointCloud& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.d(); ++k) {
    const double t = a(i, k) - b(j, k);
    s += t * t;
  }
  return std::sqrt(s);
}

// S1 + S2 - 2 S3 with the O(n^3) triple sum for S3.
inline double dcov_three_sums(const PointCloud& x, const PointCloud& y) {
  const std::size_t n = x.n();
  const double N = static_cast<double>(n);
  double s1 = 0.0, sa = 0.0, sb = 0.0, s3 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      const double a = dist(x, k, x, l);
      const double b = dist(y, k, y, l);
      s1 += a * b;
      sa += a;
      sb += b;
      for (std::size_t m = 0; m < n; ++m) s3 += a * dist(y, k, y, m);
    }
  }
  return s1 / (N * N) + (sa / (N * N)) * (sb / (N * N)) - 2.0 * s3 / (N * N * N);
}

inline double energy_direct(const PointCloud& x, const PointCloud& y) {
  const double m = static_cast<double>(x.n());
  const double n = static_cast<double>(y.n());
  double cross = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.n(); ++i) {
    for (std::size_t j = 0; j < y.n(); ++j) cross += dist(x, i, y, j);
    for (std::size_t j = 0; j < x.n(); ++j) xx += dist(x, i, x, j);
  }
  for (std::size_t i = 0; i < y.n(); ++i) {
    for (std::size_t j = 0; j < y.n(); ++j) yy += dist(y, i, y, j);
  }
  return 2.0 * cross / (m * n) - xx / (m * m) - yy / (n * n);
}

// Ranks by exhaustive search over all assignments (n <= 8).
inline PointCloud brute_force_ranks(const PointCloud& data, const otrank::RankGrid& grid) {
  std::vector<std::size_t> p(data.n());
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::vector<std::size_t> best = p;
  double best_cost = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      c += otrank::squared_distance(data.row(i), grid.points().row(p[i]));
    }
    if (c < best_cost) {
      best_cost = c;
      best = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return grid.points().permute_rows(best);
}

// 1-based classical ranks of a tie-free vector.
inline std::vector<double> classical_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::size_t below = 0;
    for (double w : v) below += w < v[i];
    r[i] = static_cast<double>(below + 1);
  }
  return r;
}

/// Two-sample Kolmogorov-Smirnov p-value from the asymptotic Kolmogorov law
/// with the usual small-sample correction of the effective size.
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double en = std::sqrt(na * nb / (na + nb));
  const double lambda = (en + 0.12 + 0.11 / en) * d;
  double p = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double chi_square_quantile(double df, double q) {
  return boost::math::quantile(boost::math::chi_squared(df), q);
}

inline double chi_square_upper_p(double stat, double df) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), stat));
}

/// Exact law on a finite support: value -> probability. Values closer than
/// `tol` are merged.
struct ExactLaw {
  std::vector<double> values;
  std::vector<double> probs;
};

inline ExactLaw law_from_outcomes(std::vector<double> outcomes, double tol = 1e-9) {
  std::sort(outcomes.begin(), outcomes.end());
  ExactLaw law;
  const double w = 1.0 / static_cast<double>(outcomes.size());
  for (double v : outcomes) {
    if (!law.values.empty() && v - law.values.back() <= tol) {
      law.probs.back() += w;
    } else {
      law.values.push_back(v);
      law.probs.push_back(w);
    }
  }
  return law;
}

struct FitResult {
  bool in_support = true;  // every sample lies on a support point
  double chi2 = 0.0;
  double df = 0.0;
  double p = 1.0;
};

/// Chi-square goodness of fit of sampled values against an exact law.
inline FitResult fit_to_law(const std::vector<double>& samples, const ExactLaw& law,
                            double tol = 1e-9) {
  FitResult r;
  std::vector<double> counts(law.values.size(), 0.0);
  for (double s : samples) {
    const auto it = std::lower_bound(law.values.begin(), law.values.end(), s - tol);
    if (it == law.values.end() || std::abs(*it - s) > tol) {
      r.in_support = false;
      continue;
    }
    counts[static_cast<std::size_t>(it - law.values.begin())] += 1.0;
  }
  const double total = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double e = total * law.probs[k];
    r.chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  r.df = static_cast<double>(counts.size()) - 1.0;
  r.p = r.df > 0 ? chi_square_upper_p(r.chi2, r.df) : 1.0;
  return r;
}

// Calls fn(perm) for every permutation of {0..n-1}.
template <typename Fn>
void for_each_permutation(std::size_t n, Fn fn) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  do {
    fn(p);
  } while (std::next_permutation(p.begin(), p.end()));
}

}  // namespace oracle
