#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otrank/error.hpp"

namespace otrank {

/// An ordered set of n observations in d-dimensional space, stored row-major.
///
/// Every row has exactly d entries. Finiteness is checked by
/// `require_finite()`; the rank grids built on top of this type also allow
/// the class to hold grid points, which are finite by construction.
class PointCloud {
 public:
  PointCloud() = default;

  PointCloud(std::size_t n, std::size_t d) : n_(n), d_(d), values_(n * d, 0.0) {}

  PointCloud(std::size_t n, std::size_t d, std::vector<double> values)
      : n_(n), d_(d), values_(std::move(values)) {
    if (values_.size() != n_ * d_) {
      throw ShapeError("point cloud: " + std::to_string(values_.size()) +
                       " values cannot fill " + std::to_string(n_) + "x" +
                       std::to_string(d_));
    }
  }

  // Rows given as nested lists; rejects ragged input.
  PointCloud(std::initializer_list<std::initializer_list<double>> rows) {
    n_ = rows.size();
    d_ = n_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(n_ * d_);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != d_) {
        throw ShapeError("point cloud: row " + std::to_string(i + 1) + " has " +
                         std::to_string(row.size()) + " entries, expected " +
                         std::to_string(d_));
      }
      values_.insert(values_.end(), row.begin(), row.end());
      ++i;
    }
  }

  static PointCloud from_rows(const std::vector<std::vector<double>>& rows) {
    PointCloud out;
    out.n_ = rows.size();
    out.d_ = rows.empty() ? 0 : rows.front().size();
    out.values_.reserve(out.n_ * out.d_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != out.d_) {
        throw ShapeError("point cloud: row " + std::to_string(i + 1) + " has " +
                         std::to_string(rows[i].size()) + " entries, expected " +
                         std::to_string(out.d_));
      }
      out.values_.insert(out.values_.end(), rows[i].begin(), rows[i].end());
    }
    return out;
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }
  bool empty() const noexcept { return n_ == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * d_, d_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * d_, d_}; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * d_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * d_ + j]; }

  const std::vector<double>& values() const noexcept { return values_; }

  void require_finite(const char* what = "data") const {
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw DataError(std::string(what) + ": non-finite value at row " +
                        std::to_string(k / d_ + 1) + ", column " +
                        std::to_string(k % d_ + 1));
      }
    }
  }

  // Rows [first, first + count).
  PointCloud slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > n_) throw ShapeError("point cloud: row slice out of range");
    return PointCloud(count, d_,
                      std::vector<double>(values_.begin() + first * d_,
                                          values_.begin() + (first + count) * d_));
  }

  // Columns [first, first + count) of every row.
  PointCloud slice_cols(std::size_t first, std::size_t count) const {
    if (first + count > d_) throw ShapeError("point cloud: column slice out of range");
    PointCloud out(n_, count);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < count; ++j) out(i, j) = (*this)(i, first + j);
    }
    return out;
  }

  // out.row(i) = row(order[i]).
  PointCloud permute_rows(std::span<const std::size_t> order) const {
    PointCloud out(order.size(), d_);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto src = row(order[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> values_;
};

// Stacks clouds vertically; all must share d.
inline PointCloud concat_rows(std::span<const PointCloud> parts) {
  if (parts.empty()) return {};
  const std::size_t d = parts.front().d();
  std::size_t n = 0;
  std::vector<double> values;
  for (const auto& p : parts) {
    if (p.d() != d) {
      throw ShapeError("concat: dimension " + std::to_string(p.d()) + " != " +
                       std::to_string(d));
    }
    n += p.n();
    values.insert(values.end(), p.values().begin(), p.values().end());
  }
  return PointCloud(n, d, std::move(values));
}

// Places clouds side by side; all must share n.
inline PointCloud concat_cols(std::span<const PointCloud> parts) {
  if (parts.empty()) return {};
  const std::size_t n = parts.front().n();
  std::size_t d = 0;
  for (const auto& p : parts) {
    if (p.n() != n) {
      throw ShapeError("concat: row count " + std::to_string(p.n()) + " != " +
                       std::to_string(n));
    }
    d += p.d();
  }
  PointCloud out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      for (std::size_t j = 0; j < p.d(); ++j) out(i, offset + j) = p(i, j);
      offset += p.d();
    }
  }
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

}  // namespace otrank
