#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "otrank/nulldist.hpp"
#include "support/oracles.hpp"

using namespace otrank;

namespace {

NullTable table_of(std::vector<double> v) {
  NullTable t;
  t.meta.B = v.size();
  t.samples = std::move(v);
  std::sort(t.samples.begin(), t.samples.end());
  return t;
}

std::vector<double> one_to(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1);
  return v;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("otrank_nulldist_" + name)).string();
}

void expect_fits(const std::vector<double>& samples, const oracle::ExactLaw& law) {
  const auto fit = oracle::fit_to_law(samples, law);
  EXPECT_TRUE(fit.in_support);
  EXPECT_GT(fit.p, 1e-4) << "chi2 " << fit.chi2 << " df " << fit.df;
}

}  // namespace

TEST(NullRdcov, TwoPointsIsDegenerate) {
  const NullTable t = null_sample_rdcov(lattice1d(2), lattice1d(2), 50, 1);
  for (double v : t.samples) EXPECT_DOUBLE_EQ(v, 0.125);
  EXPECT_EQ(t.meta.mode, NullMode::rdcov);
  EXPECT_EQ(t.meta.counts, (std::vector<std::size_t>{2}));
  EXPECT_EQ(t.meta.dims, (std::vector<std::size_t>{1, 1}));
}

TEST(NullRdcov, MatchesPermutationLaw) {
  const RankGrid g1 = halton_grid(4, 2), g2 = lattice1d(4);
  std::vector<double> outcomes;
  oracle::for_each_permutation(4, [&](const std::vector<std::size_t>& p) {
    outcomes.push_back(4.0 * oracle::dcov_three_sums(g1.points(), g2.points().permute_rows(p)));
  });
  const NullTable t = null_sample_rdcov(g1, g2, 6000, 7);
  expect_fits(t.samples, oracle::law_from_outcomes(outcomes));
}

TEST(NullRe, SingletonsAreDegenerate) {
  const NullTable t = null_sample_re(1, 1, lattice1d(2), 20, 3);
  for (double v : t.samples) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(NullRe, MatchesPermutationLaw) {
  const RankGrid g = halton_grid(5, 2);
  std::vector<double> outcomes;
  oracle::for_each_permutation(5, [&](const std::vector<std::size_t>& p) {
    const PointCloud q = g.points().permute_rows(p);
    outcomes.push_back(6.0 / 5.0 * oracle::energy_direct(q.slice_rows(0, 2), q.slice_rows(2, 3)));
  });
  const NullTable t = null_sample_re(2, 3, g, 6000, 8);
  expect_fits(t.samples, oracle::law_from_outcomes(outcomes));
}

TEST(NullKSample, TwoGroupsAreRescaledEnergy) {
  const RankGrid g = halton_grid(30, 2);
  const std::vector<std::size_t> counts{12, 18};
  const NullTable ks = null_sample_k_sample(counts, g, 500, 9);
  const NullTable re = null_sample_re(12, 18, g, 500, 9);
  const double factor = 30.0 * 30.0 / (12.0 * 18.0);
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_NEAR(ks.samples[i], factor * re.samples[i], 1e-11 * (1.0 + ks.samples[i]));
  }
}

TEST(NullKSample, SingletonsOnLattice) {
  const std::vector<std::size_t> counts{1, 1, 1};
  const NullTable t = null_sample_k_sample(counts, lattice1d(3), 600, 10);
  // Orders of {1/3, 2/3, 1}: consecutive gaps sum to 2/3 or 1 (middle value
  // at an end), times 2 (energy) times 3 (pooled count).
  std::vector<double> outcomes;
  oracle::for_each_permutation(3, [&](const std::vector<std::size_t>& p) {
    const PointCloud q = lattice1d(3).points().permute_rows(p);
    outcomes.push_back(3.0 * (oracle::energy_direct(q.slice_rows(0, 1), q.slice_rows(1, 1)) +
                              oracle::energy_direct(q.slice_rows(1, 1), q.slice_rows(2, 1))));
  });
  expect_fits(t.samples, oracle::law_from_outcomes(outcomes));
  EXPECT_DOUBLE_EQ(t.samples.front(), 4.0);
  EXPECT_DOUBLE_EQ(t.samples.back(), 6.0);
}

TEST(NullKSample, MatchesPermutationLaw) {
  const RankGrid g = lattice1d(5);
  const std::vector<std::size_t> counts{2, 1, 2};
  std::vector<double> outcomes;
  oracle::for_each_permutation(5, [&](const std::vector<std::size_t>& p) {
    const PointCloud q = g.points().permute_rows(p);
    outcomes.push_back(5.0 * (oracle::energy_direct(q.slice_rows(0, 2), q.slice_rows(2, 1)) +
                              oracle::energy_direct(q.slice_rows(2, 1), q.slice_rows(3, 2))));
  });
  expect_fits(null_sample_k_sample(counts, g, 6000, 11).samples, oracle::law_from_outcomes(outcomes));
}

TEST(NullKIndep, MatchesPermutationLaw) {
  const std::vector<RankGrid> grids{lattice1d(3), halton_grid(3, 2), lattice1d(3)};
  std::vector<double> outcomes;
  oracle::for_each_permutation(3, [&](const std::vector<std::size_t>& p) {
    oracle::for_each_permutation(3, [&](const std::vector<std::size_t>& q) {
      oracle::for_each_permutation(3, [&](const std::vector<std::size_t>& r) {
        const PointCloud a = grids[0].points().permute_rows(p);
        const PointCloud b = grids[1].points().permute_rows(q);
        const PointCloud c = grids[2].points().permute_rows(r);
        const std::vector<PointCloud> bc{b, c};
        outcomes.push_back(3.0 * (oracle::dcov_three_sums(a, concat_cols(bc)) +
                                  oracle::dcov_three_sums(b, c)));
      });
    });
  });
  const NullTable t = null_sample_k_indep(grids, 6000, 12);
  expect_fits(t.samples, oracle::law_from_outcomes(outcomes));
  EXPECT_EQ(t.meta.dims, (std::vector<std::size_t>{1, 2, 1}));
}

TEST(NullKIndep, TwoBlocksAgreeInLawWithRdcov) {
  const std::vector<RankGrid> grids{lattice1d(4), lattice1d(4)};
  std::vector<double> outcomes;
  oracle::for_each_permutation(4, [&](const std::vector<std::size_t>& p) {
    outcomes.push_back(4.0 * oracle::dcov_three_sums(grids[0].points(), grids[1].points().permute_rows(p)));
  });
  expect_fits(null_sample_k_indep(grids, 5000, 13).samples, oracle::law_from_outcomes(outcomes));
}

TEST(NullSymmetry, MatchesSignFlipLaw) {
  for (std::size_t d : {1u, 2u}) {
    const std::size_t n = 3;
    const RankGrid g = halton_grid(n, 2 * d);
    const PointCloud first = g.points().slice_cols(0, d), second = g.points().slice_cols(d, d);
    std::vector<double> outcomes;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      PointCloud x(n, d), y(n, d);
      for (std::size_t i = 0; i < n; ++i) {
        const bool flip = (mask >> i) & 1u;
        for (std::size_t k = 0; k < d; ++k) {
          x(i, k) = flip ? second(i, k) : first(i, k);
          y(i, k) = flip ? first(i, k) : second(i, k);
        }
      }
      outcomes.push_back(0.5 * n * oracle::energy_direct(x, y));
    }
    expect_fits(null_sample_symmetry(n, d, 6000, 14).samples, oracle::law_from_outcomes(outcomes));
  }
}

TEST(NullTables, ReplicatesDependOnlyOnSeed) {
  const RankGrid g = halton_grid(40, 2);
  const NullTable a = null_sample_rdcov(g, g, 300, 5, 1);
  EXPECT_EQ(a.samples, null_sample_rdcov(g, g, 300, 5, 4).samples);
  EXPECT_EQ(a.samples, null_sample_rdcov(g, g, 300, 5, 3).samples);
  EXPECT_NE(a.samples, null_sample_rdcov(g, g, 300, 6, 1).samples);
  EXPECT_EQ(null_sample_symmetry(20, 2, 200, 5, 1).samples, null_sample_symmetry(20, 2, 200, 5, 3).samples);
  const std::vector<std::size_t> counts{10, 15, 15};
  EXPECT_EQ(null_sample_k_sample(counts, g, 200, 5, 1).samples,
            null_sample_k_sample(counts, g, 200, 5, 2).samples);
}

TEST(NullTables, Errors) {
  EXPECT_THROW(null_sample_rdcov(lattice1d(3), lattice1d(4), 10, 1), ShapeError);
  EXPECT_THROW(null_sample_rdcov(lattice1d(3), lattice1d(3), 0, 1), DataError);
  EXPECT_THROW(null_sample_re(2, 2, lattice1d(5), 10, 1), ShapeError);
  EXPECT_THROW(null_sample_re(0, 2, lattice1d(2), 10, 1), ShapeError);
  const std::vector<std::size_t> one{3};
  EXPECT_THROW(null_sample_k_sample(one, lattice1d(3), 10, 1), ShapeError);
  const std::vector<RankGrid> one_grid{lattice1d(3)};
  EXPECT_THROW(null_sample_k_indep(one_grid, 10, 1), ShapeError);
  EXPECT_THROW(null_sample_symmetry(3, 33, 10, 1), CapacityError);
}

TEST(CriticalValue, Examples) {
  const NullTable t = table_of(one_to(100));
  EXPECT_EQ(critical_value(t, 0.05), 96.0);
  EXPECT_EQ(critical_value(t, 0.01), 100.0);
  EXPECT_EQ(critical_value(t, 0.5), 51.0);
  // The largest admissible alpha still leaves one value strictly above.
  EXPECT_EQ(critical_value(t, 0.99), 2.0);
  // alpha * B below one: nothing in the table may reach the region.
  EXPECT_GT(critical_value(t, 0.001), 100.0);
  EXPECT_THROW(critical_value(t, 0.0), DataError);
  EXPECT_THROW(critical_value(t, 1.0), DataError);
}

TEST(CriticalValue, TiesCountTogether) {
  const NullTable t = table_of({1, 2, 3, 3, 3});
  // allowed = 2 at alpha 0.4; the three copies of 3 exceed it.
  EXPECT_GT(critical_value(t, 0.4), 3.0);
  EXPECT_EQ(critical_value(t, 0.6), 3.0);
  EXPECT_EQ(critical_value(t, 0.8), 2.0);
}

TEST(CriticalValue, RejectionRateWithinAlpha) {
  Rng rng(40);
  for (int t = 0; t < 200; ++t) {
    const std::size_t B = 1 + rng.below(300);
    std::vector<double> v(B);
    for (double& x : v) x = static_cast<double>(rng.below(20));
    const NullTable table = table_of(v);
    const double alpha = 0.01 + 0.98 * rng.uniform();
    const double c = critical_value(table, alpha);
    const auto at_least = std::count_if(v.begin(), v.end(), [&](double x) { return x >= c; });
    EXPECT_LE(static_cast<double>(at_least), alpha * static_cast<double>(B) + 1e-9);
    // Minimality: the next smaller table value would exceed the budget.
    const auto below = std::lower_bound(table.samples.begin(), table.samples.end(), c);
    if (below != table.samples.begin()) {
      const double prev = *(below - 1);
      const auto more = std::count_if(v.begin(), v.end(), [&](double x) { return x >= prev; });
      EXPECT_GT(static_cast<double>(more), alpha * static_cast<double>(B) - 1e-9);
    }
  }
}

TEST(CriticalValue, MonotoneInAlpha) {
  const NullTable t = null_sample_rdcov(halton_grid(30, 2), halton_grid(30, 2), 2000, 3);
  double prev = INFINITY;
  for (double a = 0.001; a < 0.999; a += 0.007) {
    const double c = critical_value(t, a);
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(PValue, Examples) {
  const NullTable t = table_of(one_to(100));
  EXPECT_DOUBLE_EQ(p_value(t, 96.0), 6.0 / 101.0);
  EXPECT_DOUBLE_EQ(p_value(t, 1000.0), 1.0 / 101.0);
  EXPECT_DOUBLE_EQ(p_value(t, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(p_value(t, 95.5), 6.0 / 101.0);
}

// p <= alpha and obs >= critical agree whenever alpha*B has fractional part
// below 1 - alpha (always true for B = 10000 and alpha = 0.05).
TEST(PValue, ConsistentWithCriticalValue) {
  const NullTable t = table_of(one_to(10000));
  const double c = critical_value(t, 0.05);
  for (double obs : {c - 1.0, c - 0.5, c, c + 0.5, 10000.0}) {
    if (p_value(t, obs) <= 0.05) {
      EXPECT_GE(obs, c) << obs;
    }
    // The converse holds only up to one table entry: at obs = c the count is
    // alpha * B, so p = (alpha * B + 1) / (B + 1) sits just above alpha.
    if (obs >= c) {
      EXPECT_LE(p_value(t, obs), (0.05 * 10000 + 1) / 10001.0) << obs;
    }
  }
  EXPECT_GT(p_value(t, c), 0.05);
}

// Holds when alpha * B is an integer and the table has no ties, which is the
// case for tables of continuous statistics at the usual sizes. With ties or a
// fractional alpha * B an observation falling between two table values can
// have p <= alpha while staying below the critical value.
TEST(PValue, SmallPValueImpliesRejection) {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t b = 100 * (1 + rng.below(20));
    std::vector<double> v(b);
    for (auto& x : v) x = rng.normal();
    const NullTable t = table_of(v);
    for (double alpha : {0.01, 0.05, 0.1}) {
      const double c = critical_value(t, alpha);
      for (int k = 0; k < 50; ++k) {
        const double obs = rng.normal(0.0, 1.5);
        if (p_value(t, obs) <= alpha) {
          EXPECT_GE(obs, c) << b << " " << alpha << " " << obs;
        }
      }
    }
  }
}

TEST(TableFile, RoundTripIsExact) {
  const NullTable t = null_sample_re(7, 9, halton_grid(16, 3), 257, 99);
  const NullTable back = table_from_text(table_to_text(t));
  EXPECT_EQ(back.meta, t.meta);
  EXPECT_EQ(back.samples, t.samples);

  const std::string path = temp_path("roundtrip.tbl");
  save_table(t, path);
  EXPECT_EQ(load_table(path, t.meta).samples, t.samples);
  std::filesystem::remove(path);
}

TEST(TableFile, HeaderLayout) {
  const NullTable t = null_sample_rdcov(lattice1d(3), halton_grid(3, 2), 2, 5);
  const std::string text = table_to_text(t);
  EXPECT_EQ(text.rfind("#format-version=1\n#mode=rdcov\n#n=3\n#counts=3\n#d1=1\n#d2=2\n", 0), 0u) << text;
  EXPECT_NE(text.find("#grids=lattice1d;halton\n#B=2\n#seed=5\n"), std::string::npos);
}

TEST(TableFile, MetadataMismatch) {
  const NullTable t = null_sample_rdcov(lattice1d(5), lattice1d(5), 10, 1);
  const std::string path = temp_path("meta.tbl");
  save_table(t, path);
  TableMeta want = t.meta;
  want.seed = 2;
  EXPECT_THROW(load_table(path, want), MetadataError);
  want = t.meta;
  want.counts = {6};
  EXPECT_THROW(load_table(path, want), MetadataError);
  want = t.meta;
  want.B = 11;
  EXPECT_THROW(load_table(path, want), MetadataError);
  std::filesystem::remove(path);
}

TEST(TableFile, CorruptFilesRejected) {
  const NullTable t = null_sample_rdcov(lattice1d(5), lattice1d(5), 10, 1);
  const std::string text = table_to_text(t);
  // Truncated: last sample line missing.
  const std::string truncated = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  EXPECT_THROW(table_from_text(truncated), ParseError);
  std::string bad_version = text;
  bad_version.replace(0, 17, "#format-version=9");
  EXPECT_THROW(table_from_text(bad_version), ParseError);
  EXPECT_THROW(table_from_text(text.substr(text.find('\n') + 1)), ParseError);
  EXPECT_THROW(table_from_text(text + "abc\n"), ParseError);
  EXPECT_THROW(table_from_text(text + "-1\n"), ParseError);
  EXPECT_THROW(load_table(temp_path("does_not_exist.tbl")), DataError);
}
