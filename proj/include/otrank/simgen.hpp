#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "otrank/error.hpp"
#include "otrank/htest.hpp"
#include "otrank/nulldist.hpp"
#include "otrank/point_cloud.hpp"
#include "otrank/rng.hpp"

namespace otrank {

enum class SettingId {
  ind_v1, ind_v2, ind_v3, ind_v4, ind_v5, ind_v6, ind_v7, ind_v8, ind_v9, ind_v10,
  ind_ig, ind_igl,
  ts_v1, ts_v2, ts_v3, ts_v4, ts_v5, ts_v6, ts_v7, ts_v8, ts_v9, ts_v10, ts_v11,
  ts_tg, ts_tgl,
};

inline constexpr SettingId kAllSettings[] = {
    SettingId::ind_v1, SettingId::ind_v2,  SettingId::ind_v3, SettingId::ind_v4,
    SettingId::ind_v5, SettingId::ind_v6,  SettingId::ind_v7, SettingId::ind_v8,
    SettingId::ind_v9, SettingId::ind_v10, SettingId::ind_ig, SettingId::ind_igl,
    SettingId::ts_v1,  SettingId::ts_v2,   SettingId::ts_v3,  SettingId::ts_v4,
    SettingId::ts_v5,  SettingId::ts_v6,   SettingId::ts_v7,  SettingId::ts_v8,
    SettingId::ts_v9,  SettingId::ts_v10,  SettingId::ts_v11, SettingId::ts_tg,
    SettingId::ts_tgl};

inline const char* to_string(SettingId id) {
  switch (id) {
    case SettingId::ind_v1: return "IND_V1";
    case SettingId::ind_v2: return "IND_V2";
    case SettingId::ind_v3: return "IND_V3";
    case SettingId::ind_v4: return "IND_V4";
    case SettingId::ind_v5: return "IND_V5";
    case SettingId::ind_v6: return "IND_V6";
    case SettingId::ind_v7: return "IND_V7";
    case SettingId::ind_v8: return "IND_V8";
    case SettingId::ind_v9: return "IND_V9";
    case SettingId::ind_v10: return "IND_V10";
    case SettingId::ind_ig: return "IND_IG";
    case SettingId::ind_igl: return "IND_IGL";
    case SettingId::ts_v1: return "TS_V1";
    case SettingId::ts_v2: return "TS_V2";
    case SettingId::ts_v3: return "TS_V3";
    case SettingId::ts_v4: return "TS_V4";
    case SettingId::ts_v5: return "TS_V5";
    case SettingId::ts_v6: return "TS_V6";
    case SettingId::ts_v7: return "TS_V7";
    case SettingId::ts_v8: return "TS_V8";
    case SettingId::ts_v9: return "TS_V9";
    case SettingId::ts_v10: return "TS_V10";
    case SettingId::ts_v11: return "TS_V11";
    case SettingId::ts_tg: return "TS_TG";
    case SettingId::ts_tgl: return "TS_TGL";
  }
  return "?";
}

inline SettingId setting_from_string(std::string_view s) {
  for (SettingId id : kAllSettings) {
    if (s == to_string(id)) return id;
  }
  throw DataError("unknown setting '" + std::string(s) + "'");
}

inline bool is_independence(SettingId id) { return id <= SettingId::ind_igl; }

// Settings with a free parameter: rho for IG/IGL, mu for TG/TGL.
inline bool has_parameter(SettingId id) {
  return id == SettingId::ind_ig || id == SettingId::ind_igl || id == SettingId::ts_tg ||
         id == SettingId::ts_tgl;
}

/// A synthetic design. Independence settings draw n paired rows; two-sample
/// settings draw m rows of X and n rows of Y. Every setting is 3-dimensional.
struct SimSetting {
  SettingId id = SettingId::ind_v1;
  std::size_t n = 200;
  std::size_t m = 200;
  double param = 0.0;  // rho in [-1,1] or mu

  void validate() const {
    if (n == 0 || (!is_independence(id) && m == 0)) throw DataError("setting: empty sample");
    if ((id == SettingId::ind_ig || id == SettingId::ind_igl) && !(param >= -1.0 && param <= 1.0)) {
      throw DataError("setting: rho must lie in [-1,1]");
    }
    if (!std::isfinite(param)) throw DataError("setting: parameter must be finite");
  }
};

struct SimData {
  PointCloud x;
  PointCloud y;
};

inline constexpr std::size_t kSimDim = 3;

namespace detail {

using Mat = Eigen::MatrixXd;

// Lower Cholesky factor of a positive definite covariance.
inline Mat cholesky(const Mat& sigma) {
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success) throw ConsistencyError("covariance is not positive definite");
  return llt.matrixL();
}

// One draw of N(mean, L L^T) written into out.
inline void mvn_row(Rng& rng, const Mat& L, double mean, std::span<double> out) {
  const auto k = static_cast<Eigen::Index>(out.size());
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) z(i) = rng.normal();
  const Eigen::VectorXd v = L * z;
  for (Eigen::Index i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = mean + v(i);
}

inline Mat power_decay(double r) {
  Mat s(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) s(i, j) = std::pow(r, std::abs(i - j));
  }
  return s;
}

inline Mat equicorrelation(double r) {
  Mat s = Mat::Constant(3, 3, r);
  s.diagonal().setOnes();
  return s;
}

// Unit variances, 0.3 between every X coordinate and every Y coordinate.
inline Mat mixture_block_covariance() {
  Mat s = Mat::Identity(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 3; j < 6; ++j) s(i, j) = s(j, i) = 0.3;
  }
  return s;
}

// Scalar pair (x, y) of the independence recipes applied coordinatewise.
inline std::pair<double, double> scalar_pair(SettingId id, Rng& rng) {
  switch (id) {
    case SettingId::ind_v1: {
      const double a = rng.normal();
      return {0.2 * rng.cauchy() + a, 0.2 * rng.cauchy() + a};
    }
    case SettingId::ind_v2: {
      const double x = rng.uniform(-1.0, 1.0);
      return {x, (x * x + rng.uniform()) / 2.0};
    }
    case SettingId::ind_v3: {
      const double x = rng.normal(0.0, std::sqrt(2.0));
      const bool e = rng.bernoulli(0.04);
      const double v = rng.normal(0.0, std::sqrt(2.0));
      return {x, e ? x : v};
    }
    case SettingId::ind_v4: {
      const double w = rng.uniform(-1.0, 1.0);
      const double w1 = rng.uniform();
      const double w2 = rng.uniform();
      const double v1 = w + w1 / 3.0;
      const double t = w * w - 0.5;
      const double v2 = 4.0 * t * t + w2;
      const bool a = rng.bernoulli(0.5);
      const double g = rng.normal(5.0, 1.0);
      return {v1, a ? g : v2};
    }
    case SettingId::ind_v6: {
      const double a = rng.normal();
      const double p2 = rng.pareto(1.0, 2.0);
      const double p1 = rng.pareto(1.0, 1.0);
      return {p2 * p2 + a, p1 * p1 + a};
    }
    case SettingId::ind_v7: {
      const double eps = rng.normal(0.0, std::sqrt(5.0));
      const double x = rng.uniform();
      return {x, std::pow(x, 0.25) + eps};
    }
    case SettingId::ind_v8: {
      const double x = rng.normal();
      return {x, std::log(4.0 * x * x)};
    }
    case SettingId::ind_v9: {
      const double a = rng.normal();
      const double px = rng.pareto(1.0, 1.0);
      const double py = rng.pareto(1.0, 1.0);
      return {std::pow(std::abs(a + px), 1.5), std::pow(std::abs(a + py), 1.5)};
    }
    default: break;
  }
  throw ConsistencyError("scalar_pair: setting has no scalar recipe");
}

}  // namespace detail

/// One dataset drawn from `s` with the given seed.
///
/// Recipes stated for scalar pairs are applied to 3 independent copies, one
/// per coordinate. IG/IGL correlate coordinate k of X with coordinate k of Y
/// only. N(mu, s2) denotes variance s2.
inline SimData generate(const SimSetting& s, std::uint64_t seed) {
  s.validate();
  Rng rng(seed);
  const std::size_t D = kSimDim;
  using detail::Mat;
  if (is_independence(s.id)) {
    SimData out{PointCloud(s.n, D), PointCloud(s.n, D)};
    switch (s.id) {
      case SettingId::ind_v5:
      case SettingId::ind_v10: {
        const Mat L = detail::cholesky(detail::mixture_block_covariance());
        const Mat L_half = L / std::sqrt(2.0);
        std::vector<double> uv(6), wz(6);
        for (std::size_t i = 0; i < s.n; ++i) {
          detail::mvn_row(rng, L, 0.0, uv);
          detail::mvn_row(rng, L_half, 1.0, wz);
          const bool a1 = rng.bernoulli(0.5);
          const bool a2 = s.id == SettingId::ind_v5 ? rng.bernoulli(0.3) : false;
          for (std::size_t k = 0; k < D; ++k) {
            out.x(i, k) = a1 ? wz[k] : uv[k];
            out.y(i, k) = a2 ? wz[D + k] : uv[D + k];
          }
        }
        break;
      }
      case SettingId::ind_ig:
      case SettingId::ind_igl: {
        const double rho = s.param;
        const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
        const bool logn = s.id == SettingId::ind_igl;
        for (std::size_t i = 0; i < s.n; ++i) {
          for (std::size_t k = 0; k < D; ++k) {
            const double z1 = rng.normal();
            const double z2 = rho * z1 + c * rng.normal();
            out.x(i, k) = logn ? std::exp(z1) : z1;
            out.y(i, k) = logn ? std::exp(z2) : z2;
          }
        }
        break;
      }
      default:
        for (std::size_t i = 0; i < s.n; ++i) {
          for (std::size_t k = 0; k < D; ++k) {
            const auto [x, y] = detail::scalar_pair(s.id, rng);
            out.x(i, k) = x;
            out.y(i, k) = y;
          }
        }
    }
    return out;
  }

  SimData out{PointCloud(s.m, D), PointCloud(s.n, D)};
  auto fill = [&](PointCloud& p, auto&& row) {
    for (std::size_t i = 0; i < p.n(); ++i) row(p.row(i));
  };
  auto mvn = [&](PointCloud& p, const Mat& sigma, bool exponentiate) {
    const Mat L = detail::cholesky(sigma);
    fill(p, [&](std::span<double> r) {
      detail::mvn_row(rng, L, 0.0, r);
      if (exponentiate) {
        for (double& v : r) v = std::exp(v);
      }
    });
  };
  const double sd3 = std::sqrt(3.0);
  switch (s.id) {
    case SettingId::ts_v1:
      fill(out.x, [&](std::span<double> r) {
        for (double& v : r) v = rng.cauchy(0.0, 1.0);
      });
      fill(out.y, [&](std::span<double> r) {
        r[0] = rng.cauchy(0.0, 1.0);
        r[1] = rng.cauchy(0.2, 1.0);
        r[2] = rng.cauchy(0.2, 1.0);
      });
      break;
    case SettingId::ts_v2: {
      auto ar = [&](PointCloud& p, double coef) {
        fill(p, [&](std::span<double> r) {
          r[0] = rng.uniform();
          for (std::size_t k = 1; k < D; ++k) r[k] = 0.25 + coef * r[k - 1] + rng.uniform();
        });
      };
      ar(out.x, 0.35);
      ar(out.y, 0.5);
      break;
    }
    case SettingId::ts_v3:
      mvn(out.x, detail::power_decay(0.35), false);
      mvn(out.y, detail::power_decay(0.65), false);
      break;
    case SettingId::ts_v4:
      mvn(out.x, detail::equicorrelation(0.2), false);
      mvn(out.y, detail::equicorrelation(0.5), false);
      break;
    case SettingId::ts_v5:
      mvn(out.x, detail::power_decay(0.35), true);
      mvn(out.y, detail::power_decay(0.75), true);
      break;
    case SettingId::ts_v6:
      mvn(out.x, detail::equicorrelation(0.25), true);
      mvn(out.y, detail::equicorrelation(0.75), true);
      break;
    case SettingId::ts_v7:
    case SettingId::ts_v8:
      fill(out.x, [&](std::span<double> r) {
        for (double& v : r) v = rng.normal(0.0, sd3);
      });
      fill(out.y, [&](std::span<double> r) {
        for (double& v : r) v = rng.normal(0.25, sd3);
      });
      break;
    case SettingId::ts_v9:
      fill(out.x, [&](std::span<double> r) {
        for (double& v : r) v = rng.gamma(2.0, 0.1);
      });
      fill(out.y, [&](std::span<double> r) {
        for (double& v : r) {
          const double gv = rng.gamma(2.0, 0.1);
          const double w = std::exp(std::exp(rng.normal()));
          v = w * gv;
        }
      });
      break;
    case SettingId::ts_v10:
    case SettingId::ts_v11: {
      fill(out.x, [&](std::span<double> r) {
        for (double& v : r) v = rng.normal(1.0, 1.0);
      });
      const bool uniform_noise = s.id == SettingId::ts_v10;
      fill(out.y, [&](std::span<double> r) {
        const bool a = rng.bernoulli(0.8);
        for (double& v : r) {
          const double z = rng.normal(1.0, 1.0);
          const double w = uniform_noise ? rng.uniform(10.0, 11.0) : rng.normal(10.0, std::sqrt(0.1));
          v = a ? z : w;
        }
      });
      break;
    }
    case SettingId::ts_tg:
    case SettingId::ts_tgl: {
      const bool logn = s.id == SettingId::ts_tgl;
      auto draw = [&](PointCloud& p, double mean) {
        fill(p, [&](std::span<double> r) {
          for (double& v : r) {
            const double z = rng.normal(mean, sd3);
            v = logn ? std::exp(z) : z;
          }
        });
      };
      draw(out.x, s.param);
      draw(out.y, 0.0);
      break;
    }
    default:
      throw ConsistencyError("generate: unhandled setting");
  }
  return out;
}

struct PowerResult {
  std::string setting;
  double param = 0.0;
  TestKind test = TestKind::rdcov;
  double alpha = 0.05;
  std::size_t replicates = 0;
  std::size_t rejections = 0;
  double rejection_fraction = 0.0;
  double standard_error = 0.0;
  std::uint64_t seed = 0;
  std::size_t B = 0;
  double runtime_s = 0.0;
};

// Kept apart from the null-table streams derive_seed(seed, b).
inline std::uint64_t dataset_seed(std::uint64_t seed, std::uint64_t r) {
  return derive_seed(derive_seed(seed, 0xda7a5eedULL), r);
}

inline void check_compatible(SettingId id, TestKind kind) {
  const bool ind = is_independence(id);
  const bool ok = ind ? (kind == TestKind::rdcov || kind == TestKind::k_indep)
                      : (kind == TestKind::re || kind == TestKind::k_sample);
  if (!ok) {
    throw DataError(std::string("test ") + to_string(kind) + " does not apply to setting " +
                    to_string(id));
  }
}

/// Null table matching what the tests build for data from `s` with default grids.
inline NullTable null_table_for(const SimSetting& s, TestKind kind, std::size_t B,
                                std::uint64_t seed, unsigned threads = 0) {
  check_compatible(s.id, kind);
  const std::size_t D = kSimDim;
  switch (kind) {
    case TestKind::rdcov: {
      const RankGrid g = default_grid(s.n, D);
      return null_sample_rdcov(g, g, B, seed, threads);
    }
    case TestKind::k_indep: {
      const std::vector<RankGrid> g{default_grid(s.n, D), default_grid(s.n, D)};
      return null_sample_k_indep(g, B, seed, threads);
    }
    case TestKind::re:
      return null_sample_re(s.m, s.n, default_grid(s.m + s.n, D), B, seed, threads);
    case TestKind::k_sample: {
      const std::size_t counts[2] = {s.m, s.n};
      return null_sample_k_sample(counts, default_grid(s.m + s.n, D), B, seed, threads);
    }
    default: break;
  }
  throw DataError("null_table_for: unsupported test");
}

/// Rejection frequency of `kind` over R datasets drawn from `s`.
///
/// Dataset r uses seed dataset_seed(seed, r). All replicates share one null
/// table: `table` when given (its metadata must match), otherwise one built
/// with B draws and the same master seed.
inline PowerResult power_study(const SimSetting& s, TestKind kind, std::size_t R, double alpha,
                               std::uint64_t seed, std::shared_ptr<const NullTable> table = nullptr,
                               std::size_t B = 10000, unsigned threads = 0) {
  check_compatible(s.id, kind);
  if (R == 0) throw DataError("power study: need at least one replicate");
  const auto t0 = std::chrono::steady_clock::now();
  if (!table) table = std::make_shared<const NullTable>(null_table_for(s, kind, B, seed, threads));
  TestOptions opt;
  opt.alpha = alpha;
  opt.B = table->meta.B;
  opt.seed = table->meta.seed;
  opt.threads = 1;
  opt.table = table;
  opt.use_env_cache = false;
  std::vector<char> rejected(R, 0);
  parallel_chunks(R, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const SimData data = generate(s, dataset_seed(seed, r));
      TestReport rep;
      switch (kind) {
        case TestKind::rdcov: rep = rdcov_test(data.x, data.y, opt); break;
        case TestKind::k_indep: {
          const PointCloud parts[2] = {data.x, data.y};
          rep = k_indep_test(concat_cols(parts), {data.x.d(), data.y.d()}, opt);
          break;
        }
        case TestKind::re: rep = re_test(data.x, data.y, opt); break;
        case TestKind::k_sample: rep = k_sample_test({data.x, data.y}, opt); break;
        default: break;
      }
      rejected[r] = rep.reject ? 1 : 0;
    }
  });
  PowerResult out;
  out.setting = to_string(s.id);
  out.param = s.param;
  out.test = kind;
  out.alpha = alpha;
  out.replicates = R;
  for (char c : rejected) out.rejections += static_cast<std::size_t>(c);
  out.rejection_fraction = static_cast<double>(out.rejections) / static_cast<double>(R);
  out.standard_error =
      std::sqrt(out.rejection_fraction * (1.0 - out.rejection_fraction) / static_cast<double>(R));
  out.seed = seed;
  out.B = table->meta.B;
  out.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace otrank
