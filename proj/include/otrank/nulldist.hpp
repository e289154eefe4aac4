#pragma once

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <exception>
#include <span>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "otrank/csv.hpp"
#include "otrank/error.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"
#include "otrank/rng.hpp"
#include "otrank/stats.hpp"

namespace otrank {

enum class NullMode { rdcov, energy, k_indep, k_sample, symmetry };

inline const char* to_string(NullMode m) {
  switch (m) {
    case NullMode::rdcov: return "rdcov";
    case NullMode::energy: return "energy";
    case NullMode::k_indep: return "k_indep";
    case NullMode::k_sample: return "k_sample";
    case NullMode::symmetry: return "symmetry";
  }
  return "?";
}

inline NullMode null_mode_from_string(std::string_view s) {
  if (s == "rdcov") return NullMode::rdcov;
  if (s == "energy" || s == "re") return NullMode::energy;
  if (s == "k_indep") return NullMode::k_indep;
  if (s == "k_sample") return NullMode::k_sample;
  if (s == "symmetry") return NullMode::symmetry;
  throw DataError("unknown null mode '" + std::string(s) + "'");
}

inline constexpr int kTableFormatVersion = 1;

/// Everything a null table depends on.
///
/// counts: {n} for rdcov, k_indep and symmetry; {m, n} for energy; the group
/// sizes for k_sample. dims: {d1, d2} for rdcov, the block dimensions for
/// k_indep, {d} otherwise. grids: one descriptor per grid used.
struct TableMeta {
  NullMode mode = NullMode::rdcov;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> dims;
  std::vector<std::string> grids;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::string generator = kRngName;

  std::size_t total_n() const {
    std::size_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  friend bool operator==(const TableMeta&, const TableMeta&) = default;
};

struct NullTable {
  TableMeta meta;
  std::vector<double> samples;  // ascending
};

inline unsigned resolve_threads(unsigned threads) {
  if (threads != 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Calls fn(begin, end) on contiguous chunks of [0, count), one per thread.
template <typename Fn>
void parallel_chunks(std::size_t count, unsigned threads, Fn fn) {
  const std::size_t t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (t <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  const std::size_t step = (count + t - 1) / t;
  for (std::size_t k = 0; k < t; ++k) {
    const std::size_t begin = std::min(count, k * step);
    const std::size_t end = std::min(count, begin + step);
    pool.emplace_back([&, k, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

inline void require_replicates(std::size_t B) {
  if (B == 0) throw DataError("null table: B must be at least 1");
}

inline NullTable finish(TableMeta meta, std::vector<double> samples) {
  for (double& v : samples) v = clamp_nonnegative(v, "null statistic");
  std::sort(samples.begin(), samples.end());
  return {std::move(meta), std::move(samples)};
}

// Energy statistic of a two-way split of points whose pairwise distances are
// `dist` (row-major, N x N); xs and ys index the two samples and together
// cover every point once. `total` is the sum of all N^2 entries, so the cross
// sum follows from total = S_xx + S_yy + 2 S_xy.
inline double split_energy(const std::vector<double>& dist, std::size_t N,
                           const std::vector<std::size_t>& xs, const std::vector<std::size_t>& ys,
                           double total) {
  auto within = [&](const std::vector<std::size_t>& idx) {
    KahanSum s;
    for (std::size_t a : idx) {
      const double* row = dist.data() + a * N;
      double r = 0.0;
      for (std::size_t b : idx) r += row[b];
      s.add(r);
    }
    return s.value();
  };
  const double sxx = within(xs);
  const double syy = within(ys);
  const double m = static_cast<double>(xs.size());
  const double n = static_cast<double>(ys.size());
  const double sxy = 0.5 * (total - sxx - syy);
  return 2.0 * sxy / (m * n) - sxx / (m * m) - syy / (n * n);
}

inline double matrix_total(const std::vector<double>& dist) {
  KahanSum s;
  for (double v : dist) s.add(v);
  return s.value();
}

}  // namespace detail

/// Null law of n * dcov_sq(ranks of X, ranks of Y) under independence.
///
/// grid1 stays in index order; replicate b permutes grid2 with the stream
/// (seed, b). Uses precomputed double-centered distance matrices, so a
/// replicate costs O(n^2) regardless of dimension.
inline NullTable null_sample_rdcov(const RankGrid& grid1, const RankGrid& grid2, std::size_t B,
                                   std::uint64_t seed, unsigned threads = 0) {
  if (grid1.n() != grid2.n()) throw ShapeError("null rdcov: grids differ in size");
  detail::require_replicates(B);
  const std::size_t n = grid1.n();
  auto a = distance_matrix(grid1.points());
  auto b = distance_matrix(grid2.points());
  double_center(a, n);
  double_center(b, n);
  std::vector<double> out(B);
  const double nn = static_cast<double>(n);
  parallel_chunks(B, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(seed, r);
      const auto pi = rng.permutation(n);
      KahanSum s;
      for (std::size_t k = 0; k < n; ++k) {
        const double* ar = a.data() + k * n;
        const double* br = b.data() + pi[k] * n;
        double row = 0.0;
        for (std::size_t l = 0; l < n; ++l) row += ar[l] * br[pi[l]];
        s.add(row);
      }
      out[r] = s.value() / nn;  // n * (1/n^2) * sum
    }
  });
  TableMeta meta{NullMode::rdcov, {n}, {grid1.d(), grid2.d()},
                 {grid1.descriptor(), grid2.descriptor()}, B, seed, kRngName};
  return detail::finish(std::move(meta), std::move(out));
}

/// Null law of (mn/(m+n)) * energy_sq on pooled ranks under equal distributions.
///
/// Replicate b permutes the pooled grid; the first m points form X.
inline NullTable null_sample_re(std::size_t m, std::size_t n, const RankGrid& grid,
                                std::size_t B, std::uint64_t seed, unsigned threads = 0) {
  if (m == 0 || n == 0) throw ShapeError("null energy: both samples must be nonempty");
  if (grid.n() != m + n) {
    throw ShapeError("null energy: grid has " + std::to_string(grid.n()) + " points, need " +
                     std::to_string(m + n));
  }
  detail::require_replicates(B);
  const std::size_t N = m + n;
  const auto dist = distance_matrix(grid.points());
  const double total = detail::matrix_total(dist);
  const double scale = static_cast<double>(m) * static_cast<double>(n) / static_cast<double>(N);
  std::vector<double> out(B);
  parallel_chunks(B, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> xs(m), ys(n);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(seed, r);
      const auto pi = rng.permutation(N);
      std::copy(pi.begin(), pi.begin() + static_cast<std::ptrdiff_t>(m), xs.begin());
      std::copy(pi.begin() + static_cast<std::ptrdiff_t>(m), pi.end(), ys.begin());
      out[r] = scale * detail::split_energy(dist, N, xs, ys, total);
    }
  });
  TableMeta meta{NullMode::energy, {m, n}, {grid.d()}, {grid.descriptor()}, B, seed, kRngName};
  return detail::finish(std::move(meta), std::move(out));
}

/// Null law of n * sum_j dcov_sq(block j, blocks j+1..K) under mutual independence.
///
/// Each replicate permutes every grid with its own permutation.
inline NullTable null_sample_k_indep(std::span<const RankGrid> grids, std::size_t B,
                                     std::uint64_t seed, unsigned threads = 0) {
  if (grids.size() < 2) throw ShapeError("null k-indep: need at least 2 grids");
  const std::size_t n = grids.front().n();
  for (const auto& g : grids) {
    if (g.n() != n) throw ShapeError("null k-indep: grids differ in size");
  }
  detail::require_replicates(B);
  std::vector<double> out(B);
  parallel_chunks(B, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<PointCloud> blocks(grids.size());
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(seed, r);
      for (std::size_t j = 0; j < grids.size(); ++j) {
        blocks[j] = grids[j].points().permute_rows(rng.permutation(n));
      }
      out[r] = static_cast<double>(n) * k_indep_dcov_sq(blocks);
    }
  });
  TableMeta meta{NullMode::k_indep, {n}, {}, {}, B, seed, kRngName};
  for (const auto& g : grids) {
    meta.dims.push_back(g.d());
    meta.grids.push_back(g.descriptor());
  }
  return detail::finish(std::move(meta), std::move(out));
}

/// Null law of n * sum_j energy_sq(group j, group j+1), n the pooled count.
inline NullTable null_sample_k_sample(std::span<const std::size_t> counts, const RankGrid& grid,
                                      std::size_t B, std::uint64_t seed, unsigned threads = 0) {
  if (counts.size() < 2) throw ShapeError("null k-sample: need at least 2 groups");
  std::size_t N = 0;
  for (auto c : counts) {
    if (c == 0) throw ShapeError("null k-sample: empty group");
    N += c;
  }
  if (grid.n() != N) {
    throw ShapeError("null k-sample: grid has " + std::to_string(grid.n()) + " points, need " +
                     std::to_string(N));
  }
  detail::require_replicates(B);
  const auto dist = distance_matrix(grid.points());
  std::vector<std::size_t> offset(counts.size() + 1, 0);
  for (std::size_t j = 0; j < counts.size(); ++j) offset[j + 1] = offset[j] + counts[j];
  std::vector<double> out(B);
  parallel_chunks(B, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(seed, r);
      const auto pi = rng.permutation(N);
      auto block_sum = [&](std::size_t g, std::size_t h) {
        KahanSum s;
        for (std::size_t a = offset[g]; a < offset[g + 1]; ++a) {
          const double* row = dist.data() + pi[a] * N;
          double t = 0.0;
          for (std::size_t b = offset[h]; b < offset[h + 1]; ++b) t += row[pi[b]];
          s.add(t);
        }
        return s.value();
      };
      double stat = 0.0;
      double within_prev = block_sum(0, 0);
      for (std::size_t j = 0; j + 1 < counts.size(); ++j) {
        const double within_next = block_sum(j + 1, j + 1);
        const double mj = static_cast<double>(counts[j]);
        const double mk = static_cast<double>(counts[j + 1]);
        stat += 2.0 * block_sum(j, j + 1) / (mj * mk) - within_prev / (mj * mj) -
                within_next / (mk * mk);
        within_prev = within_next;
      }
      out[r] = static_cast<double>(N) * stat;
    }
  });
  TableMeta meta{NullMode::k_sample,
                 std::vector<std::size_t>(counts.begin(), counts.end()),
                 {grid.d()},
                 {grid.descriptor()},
                 B,
                 seed,
                 kRngName};
  return detail::finish(std::move(meta), std::move(out));
}

/// Null law of (n/2) * energy_sq(ranks of X, ranks of -X) under central symmetry.
///
/// Under the null every assignment of the n halton_grid(n, 2d) halves pairs
/// to (X, -X) labels is equally likely. Replicate b draws a uniform
/// permutation of the pairs and an independent fair flip per pair; the
/// statistic depends only on the flips, since energy_sq is invariant under
/// reordering both samples together.
inline NullTable null_sample_symmetry(std::size_t n, std::size_t d, std::size_t B,
                                      std::uint64_t seed, unsigned threads = 0) {
  if (n == 0 || d == 0) throw ShapeError("null symmetry: n and d must be positive");
  detail::require_replicates(B);
  const RankGrid grid = halton_grid(n, 2 * d);
  // Points 0..n-1 are first halves, n..2n-1 second halves.
  const PointCloud halves = [&] {
    const PointCloud parts[2] = {grid.points().slice_cols(0, d), grid.points().slice_cols(d, d)};
    return concat_rows(parts);
  }();
  const auto dist = distance_matrix(halves);
  const double total = detail::matrix_total(dist);
  const double scale = 0.5 * static_cast<double>(n);
  std::vector<double> out(B);
  parallel_chunks(B, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> xs(n), ys(n);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng(seed, r);
      const auto pi = rng.permutation(n);
      for (std::size_t i = 0; i < n; ++i) {
        const bool flip = (rng.next_u64() >> 63) != 0;
        xs[i] = flip ? pi[i] + n : pi[i];
        ys[i] = flip ? pi[i] : pi[i] + n;
      }
      out[r] = scale * detail::split_energy(dist, 2 * n, xs, ys, total);
    }
  });
  TableMeta meta{NullMode::symmetry, {n}, {d}, {grid.descriptor()}, B, seed, kRngName};
  return detail::finish(std::move(meta), std::move(out));
}

/// Smallest table value c with #{samples >= c} <= alpha * B.
///
/// Counting is done on integers, so alpha * B landing on a whole number is
/// honoured exactly. If even the largest value fails (alpha * B < multiplicity
/// of the maximum), the next double above the maximum is returned: no table
/// value then reaches the rejection region.
inline double critical_value(const NullTable& table, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0,1)");
  const auto& s = table.samples;
  if (s.empty()) throw DataError("critical value: empty table");
  const double allowed_real = alpha * static_cast<double>(s.size());
  // Nearest integer when alpha * B is an integer up to rounding of alpha.
  const double nearest = std::round(allowed_real);
  const std::size_t allowed = static_cast<std::size_t>(
      std::abs(allowed_real - nearest) <= 1e-9 * std::max(1.0, allowed_real) ? nearest
                                                                             : std::floor(allowed_real));
  double best = std::nextafter(s.back(), std::numeric_limits<double>::infinity());
  for (std::size_t i = s.size(); i-- > 0;) {
    const auto first = std::lower_bound(s.begin(), s.end(), s[i]);
    const std::size_t at_least = static_cast<std::size_t>(s.end() - first);
    if (at_least > allowed) break;
    best = *first;
    i = static_cast<std::size_t>(first - s.begin());
  }
  return best;
}

// (1 + #{samples >= observed}) / (B + 1).
inline double p_value(const NullTable& table, double observed) {
  const auto& s = table.samples;
  const auto first = std::lower_bound(s.begin(), s.end(), observed);
  const double count = static_cast<double>(s.end() - first);
  return (1.0 + count) / (static_cast<double>(s.size()) + 1.0);
}

namespace detail {

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(v[k]);
  }
  return out;
}

inline std::vector<std::size_t> split_sizes(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = text.find(',', start);
    const auto field = text.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start);
    std::size_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size() || field.empty()) {
      throw ParseError("table: bad integer list '" + std::string(text) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ';';
    out += v[k];
  }
  return out;
}

inline std::vector<std::string> split_strings(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t sep = text.find(';', start);
    out.emplace_back(text.substr(start, sep == std::string_view::npos ? std::string_view::npos
                                                                      : sep - start));
    if (sep == std::string_view::npos) break;
    start = sep + 1;
  }
  return out;
}

template <typename T>
T parse_uint(std::string_view key, std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("table: bad value for '" + std::string(key) + "'");
  }
  return v;
}

}  // namespace detail

/// Text form: '#key=value' header lines, then one sample per line.
///
/// Keys: format-version, mode, n (pooled count), m (first-sample size for
/// energy tables), counts, d1, d2 (rdcov), dims, grids, B, seed, generator.
inline std::string table_to_text(const NullTable& t) {
  const TableMeta& m = t.meta;
  std::string out;
  out += "#format-version=" + std::to_string(kTableFormatVersion) + "\n";
  out += std::string("#mode=") + to_string(m.mode) + "\n";
  out += "#n=" + std::to_string(m.total_n()) + "\n";
  if (m.mode == NullMode::energy && !m.counts.empty()) {
    out += "#m=" + std::to_string(m.counts.front()) + "\n";
  }
  out += "#counts=" + detail::join_sizes(m.counts) + "\n";
  if (m.mode == NullMode::rdcov && m.dims.size() == 2) {
    out += "#d1=" + std::to_string(m.dims[0]) + "\n";
    out += "#d2=" + std::to_string(m.dims[1]) + "\n";
  }
  out += "#dims=" + detail::join_sizes(m.dims) + "\n";
  out += "#grids=" + detail::join_strings(m.grids) + "\n";
  out += "#B=" + std::to_string(m.B) + "\n";
  out += "#seed=" + std::to_string(m.seed) + "\n";
  out += "#generator=" + m.generator + "\n";
  for (double v : t.samples) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

inline NullTable table_from_text(std::string_view text) {
  std::map<std::string, std::string, std::less<>> header;
  std::vector<double> samples;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!samples.empty()) throw ParseError("table: header after samples (line " + std::to_string(line_no) + ")");
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError("table: malformed header line " + std::to_string(line_no));
      }
      header.emplace(std::string(line.substr(1, eq - 1)), std::string(line.substr(eq + 1)));
      continue;
    }
    double v = 0.0;
    if (!parse_double(line, v) || !std::isfinite(v) || v < 0.0) {
      throw ParseError("table: bad sample on line " + std::to_string(line_no));
    }
    samples.push_back(v);
  }
  auto need = [&](const char* key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end()) throw ParseError(std::string("table: missing header '") + key + "'");
    return it->second;
  };
  if (detail::parse_uint<int>("format-version", need("format-version")) != kTableFormatVersion) {
    throw ParseError("table: unsupported format-version " + need("format-version"));
  }
  NullTable t;
  t.meta.mode = null_mode_from_string(need("mode"));
  t.meta.counts = detail::split_sizes(need("counts"));
  t.meta.dims = detail::split_sizes(need("dims"));
  t.meta.grids = detail::split_strings(need("grids"));
  t.meta.B = detail::parse_uint<std::size_t>("B", need("B"));
  t.meta.seed = detail::parse_uint<std::uint64_t>("seed", need("seed"));
  t.meta.generator = need("generator");
  if (detail::parse_uint<std::size_t>("n", need("n")) != t.meta.total_n()) {
    throw ParseError("table: header n disagrees with counts");
  }
  if (samples.size() != t.meta.B) {
    throw ParseError("table: expected " + std::to_string(t.meta.B) + " samples, found " +
                     std::to_string(samples.size()) + " (truncated file?)");
  }
  if (!std::is_sorted(samples.begin(), samples.end())) throw ParseError("table: samples not sorted");
  t.samples = std::move(samples);
  return t;
}

inline void save_table(const NullTable& t, const std::string& path) {
  write_file(path, table_to_text(t));
}

inline NullTable load_table(const std::string& path) {
  try {
    return table_from_text(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Empty string when `have` describes the same table as `want`, otherwise the
// first differing field.
inline std::string meta_mismatch(const TableMeta& have, const TableMeta& want) {
  if (have.mode != want.mode) {
    return std::string("mode ") + to_string(have.mode) + " != " + to_string(want.mode);
  }
  if (have.counts != want.counts) {
    return "counts " + detail::join_sizes(have.counts) + " != " + detail::join_sizes(want.counts);
  }
  if (have.dims != want.dims) {
    return "dims " + detail::join_sizes(have.dims) + " != " + detail::join_sizes(want.dims);
  }
  if (have.grids != want.grids) {
    return "grids " + detail::join_strings(have.grids) + " != " + detail::join_strings(want.grids);
  }
  if (have.B != want.B) return "B " + std::to_string(have.B) + " != " + std::to_string(want.B);
  if (have.seed != want.seed) {
    return "seed " + std::to_string(have.seed) + " != " + std::to_string(want.seed);
  }
  if (have.generator != want.generator) return "generator " + have.generator + " != " + want.generator;
  return {};
}

inline NullTable load_table(const std::string& path, const TableMeta& expected) {
  NullTable t = load_table(path);
  if (const auto why = meta_mismatch(t.meta, expected); !why.empty()) {
    throw MetadataError(path + ": table does not match request (" + why + ")");
  }
  return t;
}

}  // namespace otrank
