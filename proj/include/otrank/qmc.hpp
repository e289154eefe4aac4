#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "otrank/csv.hpp"
#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"

namespace otrank {

enum class GridKind { halton, lattice1d, custom };

inline const char* to_string(GridKind k) {
  switch (k) {
    case GridKind::halton: return "halton";
    case GridKind::lattice1d: return "lattice1d";
    case GridKind::custom: return "custom";
  }
  return "?";
}

inline constexpr std::array<std::uint32_t, 64> kPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,  47,  53,
    59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107, 109, 113, 127, 131,
    137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223,
    227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311};

inline constexpr std::size_t kMaxHaltonDim = kPrimes.size();

// Digits of k in `base` reversed behind the radix point. Digits are extracted
// exactly in integer arithmetic, then folded with one Horner pass from the most
// significant digit, so each step is a single add and divide.
inline double radical_inverse(std::uint64_t k, std::uint32_t base) {
  std::array<std::uint32_t, 64> digits{};
  std::size_t count = 0;
  while (k > 0) {
    digits[count++] = static_cast<std::uint32_t>(k % base);
    k /= base;
  }
  double r = 0.0;
  const double b = static_cast<double>(base);
  for (std::size_t i = count; i-- > 0;) r = (static_cast<double>(digits[i]) + r) / b;
  return r;
}

/// Fixed reference set of n rank vectors in [0,1]^d.
///
/// Immutable after construction; build through halton_grid, lattice1d or
/// validate_custom.
class RankGrid {
 public:
  const PointCloud& points() const noexcept { return points_; }
  std::size_t n() const noexcept { return points_.n(); }
  std::size_t d() const noexcept { return points_.d(); }
  GridKind kind() const noexcept { return kind_; }

  // Stable identifier used in table metadata: kind, plus a content hash for
  // custom grids.
  std::string descriptor() const {
    if (kind_ != GridKind::custom) return to_string(kind_);
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (double v : points_.values()) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffU;
        h *= 1099511628211ULL;
      }
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "custom-%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  friend bool operator==(const RankGrid&, const RankGrid&) = default;

 private:
  RankGrid(PointCloud points, GridKind kind) : points_(std::move(points)), kind_(kind) {}

  friend RankGrid halton_grid(std::size_t, std::size_t);
  friend RankGrid lattice1d(std::size_t);
  friend RankGrid validate_custom(PointCloud);

  PointCloud points_;
  GridKind kind_ = GridKind::custom;
};

// Point i (1-based) has coordinate j equal to radical_inverse(i, j-th prime).
inline RankGrid halton_grid(std::size_t n, std::size_t d) {
  if (n == 0 || d == 0) throw DataError("halton_grid: n and d must be positive");
  if (d > kMaxHaltonDim) {
    throw CapacityError("halton_grid: d = " + std::to_string(d) + " exceeds the " +
                        std::to_string(kMaxHaltonDim) + "-prime table");
  }
  PointCloud pts(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) pts(i, j) = radical_inverse(i + 1, kPrimes[j]);
  }
  return RankGrid(std::move(pts), GridKind::halton);
}

// {1/n, 2/n, ..., n/n}.
inline RankGrid lattice1d(std::size_t n) {
  if (n == 0) throw DataError("lattice1d: n must be positive");
  PointCloud pts(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    pts(i, 0) = static_cast<double>(i + 1) / static_cast<double>(n);
  }
  return RankGrid(std::move(pts), GridKind::lattice1d);
}

// Checks that every coordinate lies in [0,1] and that points are distinct.
inline RankGrid validate_custom(PointCloud points) {
  if (points.n() == 0 || points.d() == 0) throw DataError("custom grid: empty");
  for (std::size_t i = 0; i < points.n(); ++i) {
    for (std::size_t j = 0; j < points.d(); ++j) {
      const double v = points(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("custom grid: point " + std::to_string(i + 1) + ", coordinate " +
                        std::to_string(j + 1) + " outside [0,1]");
      }
    }
  }
  std::vector<std::size_t> order(points.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row_less = [&](std::size_t a, std::size_t b) {
    const auto ra = points.row(a);
    const auto rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto a = points.row(order[k - 1]);
    const auto b = points.row(order[k]);
    if (std::equal(a.begin(), a.end(), b.begin())) {
      throw DataError("custom grid: point " + std::to_string(order[k] + 1) +
                      " duplicates point " + std::to_string(order[k - 1] + 1));
    }
  }
  return RankGrid(std::move(points), GridKind::custom);
}

// Halton for d >= 2, the 1-D lattice for d = 1.
inline RankGrid default_grid(std::size_t n, std::size_t d) {
  return d == 1 ? lattice1d(n) : halton_grid(n, d);
}

inline std::string grid_to_csv(const RankGrid& grid) { return to_csv(grid.points()); }

inline RankGrid grid_from_csv(std::string_view text) {
  return validate_custom(parse_csv_text(text, false));
}

}  // namespace otrank
