#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "otrank/csv.hpp"
#include "otrank/error.hpp"
#include "otrank/htest.hpp"
#include "otrank/nulldist.hpp"
#include "otrank/qmc.hpp"
#include "otrank/ranks.hpp"
#include "otrank/report_json.hpp"
#include "otrank/simgen.hpp"

namespace otrank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Options shared by the subcommands; each subcommand reads the subset it uses.
struct CliConfig {
  std::string x_path, y_path, data_path, grid_spec = "default", grid_x_spec, grid_y_spec;
  std::vector<std::string> inputs;
  std::vector<std::size_t> blocks, dims, counts;
  std::size_t B = 10000;
  double alpha = 0.05;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  std::string out_path;
  std::string table_path;
  bool header = false;
  bool prerank = false;
  double jitter = 0.0;
  bool timings = false;
  std::string mode;
  std::size_t n = 0, m = 0;
  std::size_t grid_max = 0;
  std::string setting;
  std::string test;
  double param = 0.0;
  std::size_t reps = 1000;
  std::string csv_path;
};

namespace detail {

inline std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline void emit(const std::string& text, const CliConfig& cfg, std::ostream& out) {
  if (cfg.out_path.empty()) {
    out << text;
  } else {
    write_file(cfg.out_path, text);
  }
}

// "default"/"halton"/"lattice1d", or a CSV file holding a custom grid.
inline std::optional<RankGrid> grid_from_spec(const std::string& spec, std::size_t n, std::size_t d) {
  if (spec.empty() || spec == "default") return std::nullopt;
  if (spec == "halton") return halton_grid(n, d);
  if (spec == "lattice1d") {
    if (d != 1) throw UsageError("lattice1d grids are one-dimensional");
    return lattice1d(n);
  }
  return grid_from_csv(read_file(spec));
}

inline TestOptions test_options(const CliConfig& cfg, std::uint64_t seed) {
  TestOptions opt;
  opt.B = cfg.B;
  opt.alpha = cfg.alpha;
  opt.seed = seed;
  opt.prerank = cfg.prerank;
  opt.jitter = cfg.jitter;
  opt.threads = cfg.threads;
  if (!cfg.table_path.empty()) opt.table_path = cfg.table_path;
  return opt;
}

inline std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline NullTable build_table(const CliConfig& cfg, std::uint64_t seed) {
  const NullMode mode = null_mode_from_string(cfg.mode);
  switch (mode) {
    case NullMode::rdcov: {
      if (cfg.dims.size() != 2) throw UsageError("rdcov tables need --dims d1,d2");
      return null_sample_rdcov(default_grid(cfg.n, cfg.dims[0]), default_grid(cfg.n, cfg.dims[1]),
                               cfg.B, seed, cfg.threads);
    }
    case NullMode::energy: {
      if (cfg.dims.size() != 1) throw UsageError("energy tables need --dims d");
      if (cfg.m == 0) throw UsageError("energy tables need --m");
      return null_sample_re(cfg.m, cfg.n, default_grid(cfg.m + cfg.n, cfg.dims[0]), cfg.B, seed,
                            cfg.threads);
    }
    case NullMode::k_indep: {
      if (cfg.dims.size() < 2) throw UsageError("k_indep tables need --dims d1,...,dK (K >= 2)");
      std::vector<RankGrid> grids;
      for (auto d : cfg.dims) grids.push_back(default_grid(cfg.n, d));
      return null_sample_k_indep(grids, cfg.B, seed, cfg.threads);
    }
    case NullMode::k_sample: {
      if (cfg.dims.size() != 1) throw UsageError("k_sample tables need --dims d");
      if (cfg.counts.size() < 2) throw UsageError("k_sample tables need --counts n1,...,nK");
      std::size_t total = 0;
      for (auto c : cfg.counts) total += c;
      return null_sample_k_sample(cfg.counts, default_grid(total, cfg.dims[0]), cfg.B, seed,
                                  cfg.threads);
    }
    case NullMode::symmetry: {
      if (cfg.dims.size() != 1) throw UsageError("symmetry tables need --dims d");
      return null_sample_symmetry(cfg.n, cfg.dims[0], cfg.B, seed, cfg.threads);
    }
  }
  throw UsageError("unknown mode");
}

inline nlohmann::ordered_json table_summary(const NullTable& t, double alpha) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["mode"] = to_string(t.meta.mode);
  j["counts"] = t.meta.counts;
  j["dims"] = t.meta.dims;
  j["grids"] = t.meta.grids;
  j["B"] = t.meta.B;
  j["seed"] = t.meta.seed;
  j["generator"] = t.meta.generator;
  j["alpha"] = alpha;
  j["critical_value"] = critical_value(t, alpha);
  return j;
}

inline int cmd_ranks(const CliConfig& cfg, std::uint64_t seed, std::ostream& out,
                     std::ostream& err) {
  const PointCloud data = parse_csv(cfg.data_path, cfg.header);
  PointCloud prepared = cfg.jitter > 0.0 ? jitter(data, cfg.jitter, seed) : data;
  if (cfg.prerank) prepared = coordinatewise_prerank(prepared).data;
  const auto custom = grid_from_spec(cfg.grid_spec, data.n(), data.d());
  const RankGrid grid = custom ? *custom : default_grid(data.n(), data.d());
  const RankMap map = empirical_ranks(prepared, grid);
  for (const auto& w : map.warnings) err << "warning: " << w << "\n";
  emit(to_csv(map.ranks), cfg, out);
  return kExitOk;
}

inline int run_test(const CliConfig& cfg, TestKind kind, std::uint64_t seed, std::ostream& out) {
  TestOptions opt = test_options(cfg, seed);
  TestReport rep;
  switch (kind) {
    case TestKind::rdcov: {
      const PointCloud x = parse_csv(cfg.x_path, cfg.header);
      const PointCloud y = parse_csv(cfg.y_path, cfg.header);
      opt.grid_x = grid_from_spec(cfg.grid_x_spec, x.n(), x.d());
      opt.grid_y = grid_from_spec(cfg.grid_y_spec, y.n(), y.d());
      rep = rdcov_test(x, y, opt);
      break;
    }
    case TestKind::re: {
      const PointCloud x = parse_csv(cfg.x_path, cfg.header);
      const PointCloud y = parse_csv(cfg.y_path, cfg.header);
      opt.grid_x = grid_from_spec(cfg.grid_spec, x.n() + y.n(), x.d());
      rep = re_test(x, y, opt);
      break;
    }
    case TestKind::k_indep: {
      const PointCloud x = parse_csv(cfg.data_path, cfg.header);
      rep = k_indep_test(x, cfg.blocks, opt);
      break;
    }
    case TestKind::k_sample: {
      std::vector<PointCloud> samples;
      for (const auto& p : cfg.inputs) samples.push_back(parse_csv(p, cfg.header));
      std::size_t total = 0;
      for (const auto& s : samples) total += s.n();
      if (!samples.empty()) opt.grid_x = grid_from_spec(cfg.grid_spec, total, samples[0].d());
      rep = k_sample_test(samples, opt);
      break;
    }
    case TestKind::symmetry: {
      const PointCloud x = parse_csv(cfg.data_path, cfg.header);
      rep = symmetry_test(x, opt);
      break;
    }
  }
  emit(dump(report_to_json(rep, cfg.timings)), cfg, out);
  return kExitOk;
}

inline int cmd_null_table(const CliConfig& cfg, std::uint64_t seed, std::ostream& out) {
  const NullTable t = build_table(cfg, seed);
  if (cfg.out_path.empty()) throw UsageError("null-table needs --out");
  save_table(t, cfg.out_path);
  out << dump(table_summary(t, cfg.alpha));
  return kExitOk;
}

inline int cmd_thresholds(const CliConfig& cfg, std::uint64_t seed, std::ostream& out) {
  const bool rdcov = cfg.mode == "rdcov";
  if (!rdcov && cfg.mode != "re") throw UsageError("thresholds --mode must be rdcov or re");
  if (!rdcov && cfg.m == 0) throw UsageError("thresholds --mode re needs --m");
  CliConfig c = cfg;
  c.mode = rdcov ? "rdcov" : "energy";
  if (cfg.grid_max == 0) {
    if (c.dims.size() != (rdcov ? 2u : 1u)) {
      throw UsageError(rdcov ? "--dims d1,d2 required" : "--dims d required");
    }
    const NullTable t = build_table(c, seed);
    emit(dump(table_summary(t, cfg.alpha)), cfg, out);
    return kExitOk;
  }
  // Full grid of critical values, one CSV row per dimension (pair).
  std::ostringstream csv;
  if (rdcov) {
    csv << "d1";
    for (std::size_t d2 = 1; d2 <= cfg.grid_max; ++d2) csv << ",d2=" << d2;
    csv << "\n";
    for (std::size_t d1 = 1; d1 <= cfg.grid_max; ++d1) {
      csv << d1;
      for (std::size_t d2 = 1; d2 <= cfg.grid_max; ++d2) {
        c.dims = {d1, d2};
        csv << "," << format_double(critical_value(build_table(c, seed), cfg.alpha));
      }
      csv << "\n";
    }
  } else {
    csv << "d,critical_value\n";
    for (std::size_t d = 1; d <= cfg.grid_max; ++d) {
      c.dims = {d};
      csv << d << "," << format_double(critical_value(build_table(c, seed), cfg.alpha)) << "\n";
    }
  }
  emit(csv.str(), cfg, out);
  return kExitOk;
}

inline TestKind parse_test_kind(const std::string& s, SettingId id) {
  if (s.empty()) return is_independence(id) ? TestKind::rdcov : TestKind::re;
  if (s == "rdcov") return TestKind::rdcov;
  if (s == "re") return TestKind::re;
  if (s == "k_indep") return TestKind::k_indep;
  if (s == "k_sample") return TestKind::k_sample;
  throw UsageError("--test must be rdcov, re, k_indep or k_sample");
}

inline int cmd_simulate(const CliConfig& cfg, std::uint64_t seed, std::ostream& out) {
  SimSetting s;
  s.id = setting_from_string(cfg.setting);
  if (cfg.n) s.n = cfg.n;
  if (cfg.m) s.m = cfg.m;
  s.param = cfg.param;
  const TestKind kind = parse_test_kind(cfg.test, s.id);
  const PowerResult r = power_study(s, kind, cfg.reps, cfg.alpha, seed, nullptr, cfg.B, cfg.threads);
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["setting"] = r.setting;
  j["param"] = r.param;
  j["test_kind"] = to_string(r.test);
  j["alpha"] = r.alpha;
  j["replicates"] = r.replicates;
  j["rejections"] = r.rejections;
  j["rejection_fraction"] = r.rejection_fraction;
  j["standard_error"] = r.standard_error;
  j["seed"] = r.seed;
  j["B"] = r.B;
  j["generator"] = kRngName;
  if (cfg.timings) j["runtime_s"] = r.runtime_s;
  emit(dump(j), cfg, out);
  if (!cfg.csv_path.empty()) {
    const bool fresh = !std::filesystem::exists(cfg.csv_path);
    std::ofstream csv(cfg.csv_path, std::ios::app);
    if (!csv) throw DataError("cannot write '" + cfg.csv_path + "'");
    if (fresh) csv << "setting,param,test,alpha,replicates,rejection_fraction,standard_error,seed,B\n";
    csv << r.setting << "," << format_double(r.param) << "," << to_string(r.test) << ","
        << format_double(r.alpha) << "," << r.replicates << ","
        << format_double(r.rejection_fraction) << "," << format_double(r.standard_error) << ","
        << r.seed << "," << r.B << "\n";
  }
  return kExitOk;
}

}  // namespace detail

/// Parses argv, runs one subcommand and maps failures to exit codes:
/// 0 success (a rejection is a success), 2 usage, 3 data, 4 internal.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Distribution-free multivariate rank tests"};
  app.require_subcommand(1);
  CliConfig cfg;

  auto common = [&](CLI::App* sub, bool test_like) {
    sub->add_option("--b", cfg.B, "Monte Carlo null replicates")->check(CLI::PositiveNumber);
    sub->add_option("--alpha", cfg.alpha, "test level in (0,1)");
    sub->add_option("--seed", cfg.seed, "master seed (random and reported when omitted)");
    sub->add_option("--threads", cfg.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", cfg.out_path, "write output here instead of stdout");
    sub->add_flag("--timings", cfg.timings, "include wall-clock timings in JSON");
    if (test_like) {
      sub->add_flag("--header", cfg.header, "input CSV files have a header row");
      sub->add_flag("--prerank", cfg.prerank, "replace columns by their 1-D ranks first");
      sub->add_option("--jitter", cfg.jitter, "add Uniform(-s,s) noise before ranking");
      sub->add_option("--table", cfg.table_path, "null table file (loaded, or generated and saved)");
    }
  };

  auto* ranks = app.add_subcommand("ranks", "emit multivariate ranks as CSV");
  ranks->add_option("--data", cfg.data_path, "data CSV")->required();
  ranks->add_option("--grid", cfg.grid_spec, "default | halton | lattice1d | grid CSV file");
  ranks->add_flag("--header", cfg.header, "input has a header row");
  ranks->add_flag("--prerank", cfg.prerank, "coordinatewise pre-ranking");
  ranks->add_option("--jitter", cfg.jitter, "add Uniform(-s,s) noise before ranking");
  ranks->add_option("--seed", cfg.seed, "seed for --jitter");
  ranks->add_option("--out", cfg.out_path, "output CSV");

  auto* indep = app.add_subcommand("indep-test", "independence of X and Y");
  indep->add_option("--x", cfg.x_path, "X CSV")->required();
  indep->add_option("--y", cfg.y_path, "Y CSV")->required();
  indep->add_option("--grid-x", cfg.grid_x_spec, "grid for X");
  indep->add_option("--grid-y", cfg.grid_y_spec, "grid for Y");
  common(indep, true);

  auto* two = app.add_subcommand("two-sample", "equality of the laws of X and Y");
  two->add_option("--x", cfg.x_path, "X CSV")->required();
  two->add_option("--y", cfg.y_path, "Y CSV")->required();
  two->add_option("--grid", cfg.grid_spec, "pooled grid");
  common(two, true);

  auto* kind = app.add_subcommand("k-indep", "mutual independence of column blocks");
  kind->add_option("--data", cfg.data_path, "data CSV")->required();
  kind->add_option("--blocks", cfg.blocks, "block dimensions d1,d2,...")->delimiter(',')->required();
  common(kind, true);

  auto* ks = app.add_subcommand("k-sample", "equality of K laws");
  ks->add_option("--inputs", cfg.inputs, "sample CSV files a.csv,b.csv,...")->delimiter(',')->required();
  ks->add_option("--grid", cfg.grid_spec, "pooled grid");
  common(ks, true);

  auto* sym = app.add_subcommand("symmetry", "central symmetry about the origin");
  sym->add_option("--data", cfg.data_path, "data CSV")->required();
  common(sym, true);

  auto* nt = app.add_subcommand("null-table", "generate and save a null table");
  nt->add_option("--mode", cfg.mode, "rdcov | energy | k_indep | k_sample | symmetry")->required();
  nt->add_option("--n", cfg.n, "observations (second sample for energy)");
  nt->add_option("--m", cfg.m, "first-sample size (energy)");
  nt->add_option("--dims", cfg.dims, "dimensions")->delimiter(',')->required();
  nt->add_option("--counts", cfg.counts, "group sizes (k_sample)")->delimiter(',');
  common(nt, false);

  auto* th = app.add_subcommand("thresholds", "critical values of the scaled statistics");
  th->add_option("--mode", cfg.mode, "rdcov | re")->required();
  th->add_option("--n", cfg.n, "observations (second sample for re)")->required();
  th->add_option("--m", cfg.m, "first-sample size (re)");
  th->add_option("--dims", cfg.dims, "d1,d2 (rdcov) or d (re)")->delimiter(',');
  th->add_option("--grid-max", cfg.grid_max, "emit the CSV table for all dimensions up to this");
  common(th, false);

  auto* sim = app.add_subcommand("simulate", "power study on a synthetic setting");
  sim->add_option("--setting", cfg.setting, "IND_V1..IND_V10, IND_IG, IND_IGL, TS_V1..TS_V11, TS_TG, TS_TGL")
      ->required();
  sim->add_option("--reps", cfg.reps, "replicates")->check(CLI::PositiveNumber);
  sim->add_option("--test", cfg.test, "rdcov | re | k_indep | k_sample");
  sim->add_option("--param", cfg.param, "rho (IG/IGL) or mu (TG/TGL)");
  sim->add_option("--n", cfg.n, "sample size (second sample for two-sample)");
  sim->add_option("--m", cfg.m, "first-sample size");
  sim->add_option("--csv", cfg.csv_path, "append a CSV row here");
  common(sim, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");
    for (auto v : cfg.blocks) {
      if (v == 0) throw UsageError("--blocks entries must be positive");
    }
    const bool seeded = cfg.seed.has_value();
    const std::uint64_t seed = seeded ? *cfg.seed : detail::entropy_seed();
    const bool uses_seed = !ranks->parsed() || cfg.jitter > 0.0;
    if (!seeded && uses_seed) err << "seed: " << seed << "\n";

    if (ranks->parsed()) return detail::cmd_ranks(cfg, seed, out, err);
    if (indep->parsed()) return detail::run_test(cfg, TestKind::rdcov, seed, out);
    if (two->parsed()) return detail::run_test(cfg, TestKind::re, seed, out);
    if (kind->parsed()) return detail::run_test(cfg, TestKind::k_indep, seed, out);
    if (ks->parsed()) return detail::run_test(cfg, TestKind::k_sample, seed, out);
    if (sym->parsed()) return detail::run_test(cfg, TestKind::symmetry, seed, out);
    if (nt->parsed()) return detail::cmd_null_table(cfg, seed, out);
    if (th->parsed()) return detail::cmd_thresholds(cfg, seed, out);
    if (sim->parsed()) return detail::cmd_simulate(cfg, seed, out);
    throw UsageError("no subcommand");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConsistencyError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace otrank::cli
