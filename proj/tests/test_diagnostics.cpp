#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "covprior/diagnostics.hpp"
#include "covprior/rng.hpp"
#include "test_util.hpp"

using namespace covprior;

namespace {

std::vector<double> normals(RngStream& rng, int n, double mean = 0.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = mean + rng.normal();
  return v;
}

std::vector<double> ar1(RngStream& rng, int n, double phi) {
  std::vector<double> v(static_cast<std::size_t>(n));
  double x = rng.normal() / std::sqrt(1 - phi * phi);
  for (auto& y : v) {
    x = phi * x + rng.normal();
    y = x;
  }
  return v;
}

}  // namespace

TEST(SplitRhat, ConvergedChains) {
  RngStream rng(60, 0);
  const double r = split_rhat({normals(rng, 5000), normals(rng, 5000)});
  EXPECT_GE(r, 0.99);
  EXPECT_LE(r, 1.05);
}

TEST(SplitRhat, SeparatedChains) {
  RngStream rng(61, 0);
  const auto a = normals(rng, 1000, 0.0);
  const auto b = normals(rng, 1000, 5.0);
  const double r = split_rhat({a, b});
  EXPECT_GT(r, 1.5);

  // Direct evaluation from the definition: four halves of length 500.
  std::vector<std::vector<double>> halves{{a.begin(), a.begin() + 500}, {a.begin() + 500, a.end()},
                                          {b.begin(), b.begin() + 500}, {b.begin() + 500, b.end()}};
  std::vector<double> means, vars;
  for (const auto& h : halves) {
    means.push_back(testutil::mean(h));
    vars.push_back(std::pow(testutil::sd(h), 2));
  }
  const double n = 500.0;
  const double w = testutil::mean(vars);
  const double b_ = n * std::pow(testutil::sd(means), 2);
  EXPECT_NEAR(r, std::sqrt(((n - 1) / n * w + b_ / n) / w), 1e-12);
}

TEST(SplitRhat, DetectsWithinChainDrift) {
  std::vector<double> a(400), b(400);
  for (int i = 0; i < 400; ++i) a[i] = b[i] = i < 200 ? 0.0 + 0.001 * (i % 7) : 3.0 + 0.001 * (i % 5);
  EXPECT_GT(split_rhat({a, b}), 1.5);
}

TEST(SplitRhat, Errors) {
  EXPECT_THROW(split_rhat({{1, 1, 1, 1}, {1, 1, 1, 1}}), ZeroVariance);
  EXPECT_THROW(split_rhat({{1, 2, 3, 4}}), DomainError);
  EXPECT_THROW(split_rhat({{1, 2, 3}, {1, 2, 3}}), DomainError);
}

TEST(Ess, IndependentDrawsNearSampleSize) {
  RngStream rng(62, 0);
  const double ess = effective_sample_size({normals(rng, 4000), normals(rng, 4000)});
  EXPECT_NEAR(ess / 8000.0, 1.0, 0.15);
}

TEST(Ess, Ar1MatchesTheory) {
  // For AR(1) the integrated autocorrelation time is (1 + phi)/(1 - phi).
  RngStream rng(63, 0);
  const double phi = 0.8;
  std::vector<std::vector<double>> chains;
  for (int c = 0; c < 4; ++c) chains.push_back(ar1(rng, 20000, phi));
  const double expected = 80000.0 * (1 - phi) / (1 + phi);
  EXPECT_NEAR(effective_sample_size(chains) / expected, 1.0, 0.15);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> x{4, 1, 3, 2};
  EXPECT_EQ(quantile(x, 0.0), 1.0);
  EXPECT_EQ(quantile(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(x, 0.25), 1.75);
  EXPECT_EQ(quantile({7.0}, 0.3), 7.0);
  EXPECT_THROW(quantile({}, 0.5), DomainError);
}

TEST(Ks, OneSampleUniform) {
  RngStream rng(64, 0);
  std::vector<double> u(2000);
  for (auto& x : u) x = rng.uniform();
  EXPECT_GT(ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 0.01);
  std::vector<double> shifted = u;
  for (auto& x : shifted) x = x * 0.8;
  EXPECT_LT(ks_test(shifted, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 1e-6);
}

TEST(Ks, StatisticMatchesHandComputation) {
  // Sample {0.1, 0.5, 0.9} against U(0,1): D = max(1/3 - 0.1, 0.5 - 1/3, 2/3 - 0.5, 0.9 - 2/3, 1 - 0.9).
  const auto r = ks_test({0.5, 0.1, 0.9}, [](double x) { return x; });
  EXPECT_NEAR(r.statistic, 0.2333333333333333, 1e-15);
}

TEST(Ks, TwoSample) {
  RngStream rng(65, 0);
  EXPECT_GT(ks_test_two_sample(normals(rng, 3000), normals(rng, 3000)).p_value, 0.01);
  EXPECT_LT(ks_test_two_sample(normals(rng, 3000), normals(rng, 3000, 0.3)).p_value, 1e-6);
  const auto r = ks_test_two_sample({1, 2, 3}, {4, 5, 6});
  EXPECT_EQ(r.statistic, 1.0);
}

TEST(Ks, KolmogorovSurvivalKnownValues) {
  // Critical values of the Kolmogorov distribution.
  EXPECT_NEAR(kolmogorov_survival(1.3581), 0.05, 1e-4);
  EXPECT_NEAR(kolmogorov_survival(1.6276), 0.01, 1e-4);
  EXPECT_EQ(kolmogorov_survival(0.0), 1.0);
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-15);
  EXPECT_THROW(pearson(x, std::vector<double>(5, 2.0)), ZeroVariance);
}

TEST(Pearson, MatchesTwoPassOracle) {
  RngStream rng(66, 0);
  const auto a = normals(rng, 300), b = normals(rng, 300);
  const double ma = testutil::mean(a), mb = testutil::mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  EXPECT_NEAR(pearson(a, b), sab / std::sqrt(saa * sbb), 1e-12);
}

TEST(Pearson, ScaleInvariant) {
  RngStream rng(67, 0);
  const auto a = normals(rng, 50), b = normals(rng, 50);
  std::vector<double> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca.push_back(500.0 * a[i]);
    cb.push_back(500.0 * b[i]);
  }
  EXPECT_NEAR(pearson(ca, cb), pearson(a, b), 1e-15);
}

TEST(Spearman, MonotoneAndTies) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{1, 8, 27, 64, 125};
  EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
  const std::vector<double> r = detail::ranks(std::vector<double>{10, 20, 20, 30});
  EXPECT_EQ(r, (std::vector<double>{1, 2.5, 2.5, 4}));
}
