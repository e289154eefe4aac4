#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "otrank/error.hpp"
#include "otrank/nulldist.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/qmc.hpp"
#include "otrank/ranks.hpp"
#include "otrank/stats.hpp"

namespace otrank {

enum class TestKind { rdcov, re, k_indep, k_sample, symmetry };

inline const char* to_string(TestKind k) {
  switch (k) {
    case TestKind::rdcov: return "rdcov";
    case TestKind::re: return "re";
    case TestKind::k_indep: return "k_indep";
    case TestKind::k_sample: return "k_sample";
    case TestKind::symmetry: return "symmetry";
  }
  return "?";
}

inline NullMode null_mode_of(TestKind k) {
  switch (k) {
    case TestKind::rdcov: return NullMode::rdcov;
    case TestKind::re: return NullMode::energy;
    case TestKind::k_indep: return NullMode::k_indep;
    case TestKind::k_sample: return NullMode::k_sample;
    case TestKind::symmetry: return NullMode::symmetry;
  }
  return NullMode::rdcov;
}

// Human-readable scale factor applied to the raw statistic.
inline const char* scale_label(TestKind k) {
  switch (k) {
    case TestKind::rdcov: return "n";
    case TestKind::re: return "mn/(m+n)";
    case TestKind::k_indep: return "n";
    case TestKind::k_sample: return "n (pooled count)";
    case TestKind::symmetry: return "n/2";
  }
  return "?";
}

struct TestOptions {
  std::size_t B = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool prerank = false;
  double jitter = 0.0;  // 0 disables
  unsigned threads = 0;  // 0 = hardware concurrency

  // Explicit table file: loaded when present (metadata must match), otherwise
  // generated and written there.
  std::optional<std::string> table_path;
  // Cache directory for tables keyed by metadata; falls back to the
  // OT_RANKS_TABLE_DIR environment variable when unset.
  std::optional<std::string> cache_dir;
  bool use_env_cache = true;
  // Preloaded table shared across many tests (power studies). Must match.
  std::shared_ptr<const NullTable> table;

  // Custom grids; default grids are used when absent.
  std::optional<RankGrid> grid_x;       // rdcov: X; re / k_sample: pooled grid
  std::optional<RankGrid> grid_y;       // rdcov: Y
  std::vector<RankGrid> block_grids;  // k_indep, one per block
};

struct Timings {
  double ranks_ms = 0.0;
  double statistic_ms = 0.0;
  double null_ms = 0.0;
};

/// Outcome of one test, with the metadata needed to reproduce it.
///
/// reject is (statistic_scaled >= critical_value). The p-value is the Monte
/// Carlo p-value from the same table.
struct TestReport {
  TestKind kind = TestKind::rdcov;
  double statistic_raw = 0.0;
  double statistic_scaled = 0.0;
  std::string scale;
  double p_value = 1.0;
  double alpha = 0.05;
  double critical_value = 0.0;
  bool reject = false;
  std::vector<std::size_t> counts;
  std::vector<std::size_t> dims;
  std::vector<std::string> grids;
  std::size_t B = 0;
  std::uint64_t seed = 0;
  std::string generator;
  std::string table_source;  // generated, loaded, cached, generated+saved, shared
  bool prerank = false;
  double jitter = 0.0;
  std::vector<std::string> warnings;
  Timings timings;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline std::optional<std::string> cache_directory(const TestOptions& opt) {
  if (opt.cache_dir) return opt.cache_dir;
  if (opt.use_env_cache) {
    if (const char* env = std::getenv("OT_RANKS_TABLE_DIR"); env && *env) return std::string(env);
  }
  return std::nullopt;
}

// File name derived from every metadata field.
inline std::string cache_file_name(const TableMeta& meta) {
  std::string key = table_to_text(NullTable{meta, {}});
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(to_string(meta.mode)) + "-n" + std::to_string(meta.total_n()) + "-B" +
         std::to_string(meta.B) + "-" + buf + ".table";
}

template <typename Generate>
std::shared_ptr<const NullTable> resolve_table(const TableMeta& want, const TestOptions& opt,
                                               Generate generate, std::string& source) {
  if (opt.table) {
    if (const auto why = meta_mismatch(opt.table->meta, want); !why.empty()) {
      throw MetadataError("shared null table does not match request (" + why + ")");
    }
    source = "shared";
    return opt.table;
  }
  std::optional<std::string> path = opt.table_path;
  bool from_cache = false;
  if (!path) {
    if (const auto dir = cache_directory(opt)) {
      std::filesystem::create_directories(*dir);
      path = (std::filesystem::path(*dir) / cache_file_name(want)).string();
      from_cache = true;
    }
  }
  if (path && std::filesystem::exists(*path)) {
    source = from_cache ? "cached" : "loaded";
    return std::make_shared<const NullTable>(load_table(*path, want));
  }
  auto table = std::make_shared<const NullTable>(generate());
  if (path) {
    save_table(*table, *path);
    source = "generated+saved";
  } else {
    source = "generated";
  }
  return table;
}

inline void check_options(const TestOptions& opt) {
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw DataError("alpha must lie in (0,1)");
  if (opt.B == 0) throw DataError("B must be at least 1");
  if (!(opt.jitter >= 0.0) || !std::isfinite(opt.jitter)) throw DataError("jitter must be >= 0");
}

// Jitter and/or finiteness check shared by every test entry point.
inline PointCloud prepare(const PointCloud& data, const TestOptions& opt, std::uint64_t stream,
                          const char* what) {
  if (data.n() == 0 || data.d() == 0) throw ShapeError(std::string(what) + ": empty input");
  data.require_finite(what);
  if (opt.jitter > 0.0) return jitter(data, opt.jitter, opt.seed, 0x6a17 + stream);
  return data;
}

inline void append(std::vector<std::string>& to, const std::vector<std::string>& from,
                   const std::string& prefix) {
  for (const auto& w : from) to.push_back(prefix + w);
}

inline PointCloud prerank_into(const PointCloud& data, std::vector<std::string>& warnings,
                               const std::string& label) {
  auto pr = coordinatewise_prerank(data);
  append(warnings, pr.warnings, label + ": ");
  return std::move(pr.data);
}

inline void finalize(TestReport& r, const NullTable& table, double alpha) {
  r.B = table.meta.B;
  r.seed = table.meta.seed;
  r.generator = table.meta.generator;
  r.counts = table.meta.counts;
  r.dims = table.meta.dims;
  r.grids = table.meta.grids;
  r.alpha = alpha;
  r.critical_value = critical_value(table, alpha);
  r.p_value = p_value(table, r.statistic_scaled);
  r.reject = r.statistic_scaled >= r.critical_value;
}

inline void note_jitter(TestReport& r, const TestOptions& opt) {
  r.prerank = opt.prerank;
  r.jitter = opt.jitter;
  if (opt.jitter > 0.0) {
    r.warnings.push_back("jitter: uniform noise of half-width " + format_double(opt.jitter) +
                         " added (seed " + std::to_string(opt.seed) + ")");
  }
}

}  // namespace detail

/// Independence of X and Y via n * dcov_sq of their marginal ranks.
inline TestReport rdcov_test(const PointCloud& x_in, const PointCloud& y_in,
                             const TestOptions& opt = {}) {
  detail::check_options(opt);
  if (x_in.n() != y_in.n()) {
    throw ShapeError("rdcov test: X has " + std::to_string(x_in.n()) + " rows, Y has " +
                     std::to_string(y_in.n()));
  }
  TestReport r;
  r.kind = TestKind::rdcov;
  r.scale = scale_label(r.kind);
  detail::note_jitter(r, opt);
  auto t0 = detail::Clock::now();
  PointCloud x = detail::prepare(x_in, opt, 0, "X");
  PointCloud y = detail::prepare(y_in, opt, 1, "Y");
  if (opt.prerank) {
    x = detail::prerank_into(x, r.warnings, "X");
    y = detail::prerank_into(y, r.warnings, "Y");
  }
  const std::size_t n = x.n();
  const RankGrid gx = opt.grid_x ? *opt.grid_x : default_grid(n, x.d());
  const RankGrid gy = opt.grid_y ? *opt.grid_y : default_grid(n, y.d());
  const RankMap rx = empirical_ranks(x, gx);
  const RankMap ry = empirical_ranks(y, gy);
  detail::append(r.warnings, rx.warnings, "X: ");
  detail::append(r.warnings, ry.warnings, "Y: ");
  r.timings.ranks_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  r.statistic_raw = dcov_sq(rx.ranks, ry.ranks);
  r.statistic_scaled = static_cast<double>(n) * r.statistic_raw;
  r.timings.statistic_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  const TableMeta want{NullMode::rdcov, {n}, {gx.d(), gy.d()},
                       {gx.descriptor(), gy.descriptor()}, opt.B, opt.seed, kRngName};
  const auto table = detail::resolve_table(
      want, opt, [&] { return null_sample_rdcov(gx, gy, opt.B, opt.seed, opt.threads); },
      r.table_source);
  r.timings.null_ms = detail::ms_since(t0);
  detail::finalize(r, *table, opt.alpha);
  return r;
}

/// Equality in distribution of X and Y via (mn/(m+n)) * energy_sq of pooled ranks.
inline TestReport re_test(const PointCloud& x_in, const PointCloud& y_in,
                          const TestOptions& opt = {}) {
  detail::check_options(opt);
  if (x_in.d() != y_in.d()) {
    throw ShapeError("two-sample test: X has dimension " + std::to_string(x_in.d()) +
                     ", Y has " + std::to_string(y_in.d()));
  }
  TestReport r;
  r.kind = TestKind::re;
  r.scale = scale_label(r.kind);
  detail::note_jitter(r, opt);
  auto t0 = detail::Clock::now();
  PointCloud x = detail::prepare(x_in, opt, 0, "X");
  PointCloud y = detail::prepare(y_in, opt, 1, "Y");
  const std::size_t m = x.n();
  const std::size_t n = y.n();
  if (opt.prerank) {
    const PointCloud parts[2] = {x, y};
    const PointCloud pooled = detail::prerank_into(concat_rows(parts), r.warnings, "pooled");
    x = pooled.slice_rows(0, m);
    y = pooled.slice_rows(m, n);
  }
  const RankGrid grid = opt.grid_x ? *opt.grid_x : default_grid(m + n, x.d());
  const PointCloud parts[2] = {x, y};
  const PooledRanks pr = pooled_ranks(parts, grid);
  detail::append(r.warnings, pr.map.warnings, "pooled: ");
  r.timings.ranks_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  r.statistic_raw = energy_sq(pr.slices[0], pr.slices[1]);
  r.statistic_scaled = static_cast<double>(m) * static_cast<double>(n) /
                       static_cast<double>(m + n) * r.statistic_raw;
  r.timings.statistic_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  const TableMeta want{NullMode::energy, {m, n}, {grid.d()}, {grid.descriptor()},
                       opt.B, opt.seed, kRngName};
  const auto table = detail::resolve_table(
      want, opt, [&] { return null_sample_re(m, n, grid, opt.B, opt.seed, opt.threads); },
      r.table_source);
  r.timings.null_ms = detail::ms_since(t0);
  detail::finalize(r, *table, opt.alpha);
  return r;
}

/// Mutual independence of K column blocks of X.
///
/// Each block is ranked once on its own grid; term j compares block j with the
/// side-by-side ranks of blocks j+1..K. Scaled by n.
inline TestReport k_indep_test(const PointCloud& x_in, const std::vector<std::size_t>& block_dims,
                               const TestOptions& opt = {}) {
  detail::check_options(opt);
  if (block_dims.size() < 2) throw ShapeError("k-indep test: need at least 2 blocks");
  std::size_t total = 0;
  for (auto d : block_dims) {
    if (d == 0) throw ShapeError("k-indep test: block dimensions must be positive");
    total += d;
  }
  if (total != x_in.d()) {
    throw ShapeError("k-indep test: block dimensions sum to " + std::to_string(total) +
                     " but data has " + std::to_string(x_in.d()) + " columns");
  }
  if (!opt.block_grids.empty() && opt.block_grids.size() != block_dims.size()) {
    throw ShapeError("k-indep test: one grid per block required");
  }
  TestReport r;
  r.kind = TestKind::k_indep;
  r.scale = scale_label(r.kind);
  detail::note_jitter(r, opt);
  auto t0 = detail::Clock::now();
  const PointCloud x = detail::prepare(x_in, opt, 0, "X");
  const std::size_t n = x.n();
  std::vector<RankGrid> grids;
  std::vector<PointCloud> ranks;
  std::size_t col = 0;
  for (std::size_t j = 0; j < block_dims.size(); ++j) {
    PointCloud block = x.slice_cols(col, block_dims[j]);
    col += block_dims[j];
    const std::string label = "block " + std::to_string(j + 1);
    if (opt.prerank) block = detail::prerank_into(block, r.warnings, label);
    grids.push_back(opt.block_grids.empty() ? default_grid(n, block.d()) : opt.block_grids[j]);
    RankMap map = empirical_ranks(block, grids.back());
    detail::append(r.warnings, map.warnings, label + ": ");
    ranks.push_back(std::move(map.ranks));
  }
  r.timings.ranks_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  r.statistic_raw = k_indep_dcov_sq(ranks);
  r.statistic_scaled = static_cast<double>(n) * r.statistic_raw;
  r.timings.statistic_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  TableMeta want{NullMode::k_indep, {n}, block_dims, {}, opt.B, opt.seed, kRngName};
  for (const auto& g : grids) want.grids.push_back(g.descriptor());
  const auto table = detail::resolve_table(
      want, opt, [&] { return null_sample_k_indep(grids, opt.B, opt.seed, opt.threads); },
      r.table_source);
  r.timings.null_ms = detail::ms_since(t0);
  detail::finalize(r, *table, opt.alpha);
  return r;
}

/// Equality in distribution of K samples via consecutive-pair rank energies.
///
/// One pooled rank map over all samples; scaled by the pooled count n.
inline TestReport k_sample_test(const std::vector<PointCloud>& samples_in,
                                const TestOptions& opt = {}) {
  detail::check_options(opt);
  if (samples_in.size() < 2) throw ShapeError("k-sample test: need at least 2 samples");
  const std::size_t d = samples_in.front().d();
  for (const auto& s : samples_in) {
    if (s.d() != d) {
      throw ShapeError("k-sample test: dimensions differ (" + std::to_string(s.d()) + " vs " +
                       std::to_string(d) + ")");
    }
  }
  TestReport r;
  r.kind = TestKind::k_sample;
  r.scale = scale_label(r.kind);
  detail::note_jitter(r, opt);
  auto t0 = detail::Clock::now();
  std::vector<PointCloud> samples;
  std::vector<std::size_t> counts;
  for (std::size_t j = 0; j < samples_in.size(); ++j) {
    samples.push_back(
        detail::prepare(samples_in[j], opt, j, ("sample " + std::to_string(j + 1)).c_str()));
    counts.push_back(samples.back().n());
  }
  if (opt.prerank) {
    const PointCloud pooled = detail::prerank_into(concat_rows(samples), r.warnings, "pooled");
    std::size_t offset = 0;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      samples[j] = pooled.slice_rows(offset, counts[j]);
      offset += counts[j];
    }
  }
  std::size_t N = 0;
  for (auto c : counts) N += c;
  const RankGrid grid = opt.grid_x ? *opt.grid_x : default_grid(N, d);
  const PooledRanks pr = pooled_ranks(samples, grid);
  detail::append(r.warnings, pr.map.warnings, "pooled: ");
  r.timings.ranks_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  r.statistic_raw = k_sample_energy_sq(pr.slices);
  r.statistic_scaled = static_cast<double>(N) * r.statistic_raw;
  r.timings.statistic_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  const TableMeta want{NullMode::k_sample, counts, {d}, {grid.descriptor()},
                       opt.B, opt.seed, kRngName};
  const auto table = detail::resolve_table(
      want, opt, [&] { return null_sample_k_sample(counts, grid, opt.B, opt.seed, opt.threads); },
      r.table_source);
  r.timings.null_ms = detail::ms_since(t0);
  detail::finalize(r, *table, opt.alpha);
  return r;
}

/// Central symmetry of X about the origin.
///
/// Ranks (X_i, -X_i) jointly on halton_grid(n, 2d), orients each rank pair,
/// and compares the ranks of X with those of -X by (n/2) * energy_sq.
inline TestReport symmetry_test(const PointCloud& x_in, const TestOptions& opt = {}) {
  detail::check_options(opt);
  if (opt.prerank) {
    throw DataError("symmetry test: coordinatewise pre-ranking would destroy symmetry about 0");
  }
  TestReport r;
  r.kind = TestKind::symmetry;
  r.scale = scale_label(r.kind);
  detail::note_jitter(r, opt);
  auto t0 = detail::Clock::now();
  const PointCloud x = detail::prepare(x_in, opt, 0, "X");
  const std::size_t n = x.n();
  const SymmetryRanks sr = paired_symmetry_ranks(x);
  detail::append(r.warnings, sr.warnings, "paired: ");
  r.timings.ranks_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  r.statistic_raw = energy_sq(sr.of_x, sr.of_neg_x);
  r.statistic_scaled = 0.5 * static_cast<double>(n) * r.statistic_raw;
  r.timings.statistic_ms = detail::ms_since(t0);

  t0 = detail::Clock::now();
  const TableMeta want{NullMode::symmetry, {n}, {x.d()}, {sr.grid.descriptor()},
                       opt.B, opt.seed, kRngName};
  const auto table = detail::resolve_table(
      want, opt, [&] { return null_sample_symmetry(n, x.d(), opt.B, opt.seed, opt.threads); },
      r.table_source);
  r.timings.null_ms = detail::ms_since(t0);
  detail::finalize(r, *table, opt.alpha);
  return r;
}

}  // namespace otrank
