#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "covprior/diagnostics.hpp"
#include "covprior/distributions.hpp"
#include "test_util.hpp"

using namespace covprior;
using boost::math::quadrature::exp_sinh;
using boost::math::quadrature::tanh_sinh;

namespace {

// Integral of exp(logpdf) over (0, inf).
template <class F>
double integrate_positive(F logpdf) {
  exp_sinh<double> integrator;
  return integrator.integrate([&](double x) { return x > 0.0 && std::isfinite(x) ? std::exp(logpdf(x)) : 0.0; });
}

struct MomentCheck {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd se;
};

template <class Draw>
MomentCheck mc_moments(int n, int d, Draw draw) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d), sum_sq = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < n; ++k) {
    const Eigen::MatrixXd m = draw();
    sum += m;
    sum_sq += m.cwiseProduct(m);
  }
  MomentCheck out;
  out.mean = sum / n;
  const Eigen::MatrixXd var = (sum_sq / n - out.mean.cwiseProduct(out.mean)) * (static_cast<double>(n) / (n - 1));
  out.se = (var / n).cwiseSqrt();
  return out;
}

}  // namespace

TEST(Rng, DeterministicPerStream) {
  RngStream a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, SplitIndependentOfConsumption) {
  RngStream a(1, 2), b(1, 2);
  for (int i = 0; i < 17; ++i) a.normal();
  EXPECT_EQ(a.split(5).next_u64(), b.split(5).next_u64());
  EXPECT_NE(a.split(5).next_u64(), a.split(6).next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  RngStream rng(3, 0);
  std::vector<double> u, z;
  for (int i = 0; i < 50000; ++i) {
    u.push_back(rng.uniform());
    z.push_back(rng.normal());
  }
  EXPECT_GT(ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 0.01);
  EXPECT_NEAR(testutil::mean(z), 0.0, 3.0 / std::sqrt(50000.0));
  EXPECT_NEAR(testutil::sd(z), 1.0, 0.01);
}

TEST(Rng, GammaShapeBelowOneMatchesCdf) {
  RngStream rng(4, 0);
  for (double shape : {0.3, 0.5, 2.5}) {
    std::vector<double> x;
    for (int i = 0; i < 20000; ++i) x.push_back(rng.gamma(shape));
    const boost::math::gamma_distribution<> g(shape, 1.0);
    EXPECT_GT(ks_test(x, [&](double v) { return boost::math::cdf(g, v); }).p_value, 0.01) << shape;
  }
}

TEST(Wishart, MonteCarloMean) {
  RngStream rng(10, 0);
  const SpdMatrix scale = SpdMatrix::identity(2);
  const auto mc = mc_moments(50000, 2, [&] { return sample_wishart(7.0, scale, rng).matrix(); });
  const Eigen::MatrixXd expected = 7.0 * Eigen::MatrixXd::Identity(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(mc.mean(i, j) - expected(i, j)), 3.0 * mc.se(i, j));
}

TEST(Wishart, ScalarIsChiSquare) {
  RngStream rng(11, 0);
  std::vector<double> x;
  for (int i = 0; i < 20000; ++i) x.push_back(sample_wishart(3.0, SpdMatrix::identity(1), rng)(0, 0));
  const boost::math::chi_squared_distribution<> chi(3.0);
  EXPECT_GT(ks_test(x, [&](double v) { return boost::math::cdf(chi, v); }).p_value, 0.01);
}

TEST(Wishart, FixedSeedReproduces) {
  RngStream a(12, 1), b(12, 1);
  EXPECT_EQ(sample_wishart(4.5, SpdMatrix::identity(3), a).chol(), sample_wishart(4.5, SpdMatrix::identity(3), b).chol());
}

TEST(Wishart, RejectsLowDegreesOfFreedom) {
  RngStream rng(13, 0);
  EXPECT_THROW(sample_wishart(1.0, SpdMatrix::identity(2), rng), InvalidDegreesOfFreedom);
  EXPECT_THROW(sample_inverse_wishart(0.5, SpdMatrix::identity(2), rng), InvalidDegreesOfFreedom);
}

TEST(InverseWishart, MonteCarloMean) {
  RngStream rng(14, 0);
  const SpdMatrix lambda = SpdMatrix::from_matrix(2.0 * Eigen::MatrixXd::Identity(2, 2));
  const auto mc = mc_moments(50000, 2, [&] { return sample_inverse_wishart(7.0, lambda, rng).matrix(); });
  const Eigen::MatrixXd expected = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_LE(std::abs(mc.mean(i, j) - expected(i, j)), 3.0 * mc.se(i, j));
}

TEST(InverseWishart, MeanWithGeneralScale) {
  RngStream rng(15, 0);
  Eigen::Matrix3d lam;
  lam << 2, 0.5, 0.2, 0.5, 1, -0.3, 0.2, -0.3, 1.5;
  const double nu = 9.0;
  const auto mc = mc_moments(50000, 3, [&] { return sample_inverse_wishart(nu, SpdMatrix::from_matrix(lam), rng).matrix(); });
  const Eigen::MatrixXd expected = lam / (nu - 3 - 1);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_LE(std::abs(mc.mean(i, j) - expected(i, j)), 3.0 * mc.se(i, j));
}

TEST(InverseWishart, DiagonalMarginalIsScaledInvChiSquare) {
  RngStream rng(16, 0);
  const int d = 2;
  const double nu = 3.0;
  std::vector<double> v;
  for (int i = 0; i < 5000; ++i) v.push_back(sample_inverse_wishart(nu, SpdMatrix::identity(d), rng)(0, 0));
  const double dof = nu - d + 1;
  EXPECT_GT(ks_test(v, [&](double x) { return cdf_scaled_inv_chi2(x, dof, 1.0 / dof); }).p_value, 0.01);
}

TEST(InverseWishart, CorrelationsUniformAtDPlusOne) {
  for (int d : {2, 10}) {
    RngStream rng(17, static_cast<std::uint64_t>(d));
    std::vector<std::vector<double>> rho(static_cast<std::size_t>(offdiag_size(d)));
    for (int i = 0; i < 5000; ++i) {
      const auto dec = decompose(sample_inverse_wishart(d + 1.0, SpdMatrix::identity(d), rng));
      const auto r = dec.corr.upper_entries();
      for (std::size_t k = 0; k < r.size(); ++k) rho[k].push_back(r[k]);
    }
    for (std::size_t k = 0; k < rho.size(); ++k) {
      EXPECT_GT(ks_test(rho[k], [](double x) { return cdf_corr_marginal(x, 0.0); }).p_value, 0.01)
          << "d=" << d << " pair " << k;
    }
  }
}

TEST(InverseWishart, CorrelationMarginalExponent) {
  // nu = d + 3 gives exponent (nu - d - 1) / 2 = 1.
  RngStream rng(18, 0);
  std::vector<double> rho;
  for (int i = 0; i < 5000; ++i) rho.push_back(decompose(sample_inverse_wishart(5.0, SpdMatrix::identity(2), rng)).corr(0, 1));
  EXPECT_GT(ks_test(rho, [](double x) { return cdf_corr_marginal(x, 1.0); }).p_value, 0.01);
}

TEST(InverseWishartLogpdf, ScalarReduction) {
  const double iw = logpdf_inverse_wishart(SpdMatrix::identity(1), 3.0, SpdMatrix::identity(1));
  EXPECT_NEAR(iw, logpdf_scaled_inv_chi2(1.0, 3.0, 1.0 / 3.0), 1e-13);
  for (double x : {0.1, 0.7, 2.5}) {
    const SpdMatrix s = SpdMatrix::from_matrix(Eigen::MatrixXd::Constant(1, 1, x));
    const SpdMatrix lam = SpdMatrix::from_matrix(Eigen::MatrixXd::Constant(1, 1, 0.6));
    EXPECT_NEAR(logpdf_inverse_wishart(s, 4.0, lam), logpdf_scaled_inv_chi2(x, 4.0, 0.6 / 4.0), 1e-13);
  }
}

TEST(InverseWishartLogpdf, ExtendedPrecisionOracle) {
  using F = boost::multiprecision::cpp_bin_float_50;
  auto oracle = [](const Eigen::Matrix2d& s, const Eigen::Matrix2d& l, double nu_d) {
    const F nu = nu_d, d = 2;
    const F s00 = s(0, 0), s01 = s(0, 1), s11 = s(1, 1);
    const F l00 = l(0, 0), l01 = l(0, 1), l11 = l(1, 1);
    const F det_s = s00 * s11 - s01 * s01;
    const F det_l = l00 * l11 - l01 * l01;
    // tr(L S^{-1}) with S^{-1} = adj(S) / det(S).
    const F tr = (l00 * s11 - 2 * l01 * s01 + l11 * s00) / det_s;
    const F pi = boost::math::constants::pi<F>();
    const F log_mg = log(pi) / 2 + boost::multiprecision::lgamma(nu / 2) + boost::multiprecision::lgamma(nu / 2 - F(0.5));
    const F v = -(nu + d + 1) / 2 * log(det_s) - tr / 2 + nu / 2 * log(det_l) - nu * d / 2 * log(F(2)) - log_mg;
    return static_cast<double>(v);
  };
  Eigen::Matrix2d eye = Eigen::Matrix2d::Identity();
  EXPECT_NEAR(logpdf_inverse_wishart(SpdMatrix::identity(2), 3.0, SpdMatrix::identity(2)), oracle(eye, eye, 3.0), 1e-13);
  RngStream rng(19, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Matrix2d s = testutil::random_spd(2, rng, 30.0);
    const Eigen::Matrix2d l = testutil::random_spd(2, rng, 5.0);
    const double nu = rng.uniform(1.5, 12.0);
    EXPECT_NEAR(logpdf_inverse_wishart(SpdMatrix::from_matrix(s), nu, SpdMatrix::from_matrix(l)), oracle(s, l, nu), 1e-11);
  }
}

TEST(InverseWishartLogpdf, ScalarIntegratesToOne) {
  const SpdMatrix lam = SpdMatrix::from_matrix(Eigen::MatrixXd::Constant(1, 1, 1.7));
  const double total = integrate_positive([&](double x) {
    return logpdf_inverse_wishart(SpdMatrix::from_matrix(Eigen::MatrixXd::Constant(1, 1, x)), 3.0, lam);
  });
  EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(ScaledInvChi2, MedianAndNormalization) {
  const double chi2_median = boost::math::quantile(boost::math::chi_squared_distribution<>(2.0), 0.5);
  const double median = 2.0 * 0.36 / chi2_median;
  EXPECT_NEAR(median, 0.5193, 1e-4);
  EXPECT_NEAR(cdf_scaled_inv_chi2(median, 2.0, 0.36), 0.5, 1e-12);
  tanh_sinh<double> ts;
  const double half = ts.integrate([](double x) { return x > 0.0 ? std::exp(logpdf_scaled_inv_chi2(x, 2.0, 0.36)) : 0.0; },
                                   0.0, median);
  EXPECT_NEAR(half, 0.5, 1e-8);
  EXPECT_NEAR(integrate_positive([](double x) { return logpdf_scaled_inv_chi2(x, 2.0, 0.36); }), 1.0, 1e-4);
}

TEST(ScaledInvChi2, InverseGammaMedian) {
  // IG(1, 1/2) = inv-chi2(2, 1/2); its median is 1 / (2 log 2).
  EXPECT_NEAR(cdf_scaled_inv_chi2(0.7213, 2.0, 0.5), 0.5, 1e-4);
  EXPECT_NEAR(0.5 / std::numbers::ln2, 0.72135, 1e-5);
  EXPECT_NEAR(cdf_scaled_inv_chi2(0.5 / std::numbers::ln2, 2.0, 0.5), 0.5, 1e-14);
}

TEST(ScaledInvChi2, DomainErrors) {
  EXPECT_THROW(logpdf_scaled_inv_chi2(0.0, 2.0, 1.0), DomainError);
  EXPECT_THROW(logpdf_scaled_inv_chi2(1.0, -2.0, 1.0), DomainError);
  EXPECT_THROW(logpdf_scaled_inv_chi2(1.0, 2.0, 0.0), DomainError);
}

TEST(Lognormal, Medians) {
  RngStream rng(20, 0);
  for (double b : {0.0, std::log(0.72) / 2.0}) {
    std::vector<double> x;
    for (int i = 0; i < 50000; ++i) x.push_back(sample_lognormal(b, 1.0, rng));
    // SE of the sample median of N(b, 1) in log space is about 1.2533 / sqrt(n).
    EXPECT_NEAR(std::log(quantile(x, 0.5)), b, 3.0 * 1.2533 / std::sqrt(50000.0));
  }
  EXPECT_NEAR(std::exp(std::log(0.72) / 2.0), 0.8485, 1e-4);
}

TEST(Lognormal, AnalyticPointAndNormalization) {
  EXPECT_NEAR(logpdf_lognormal(1.0, 0.0, 1.0), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(integrate_positive([](double x) { return logpdf_lognormal(x, 0.3, 0.8); }), 1.0, 1e-4);
  EXPECT_THROW(logpdf_lognormal(-1.0, 0.0, 1.0), DomainError);
  EXPECT_THROW(logpdf_lognormal(1.0, 0.0, 0.0), DomainError);
}

TEST(Gamma, RateParameterizationMeans) {
  RngStream rng(21, 0);
  const double xi = 2.0;
  std::vector<double> a, b;
  for (int i = 0; i < 50000; ++i) {
    a.push_back(sample_gamma(0.5, 1.0 / (xi * xi), rng));
    b.push_back(sample_gamma(1.0, 1.0, rng));
  }
  EXPECT_NEAR(testutil::mean(a), xi * xi / 2.0, 3.0 * testutil::sd(a) / std::sqrt(50000.0));
  EXPECT_NEAR(testutil::mean(b), 1.0, 3.0 * testutil::sd(b) / std::sqrt(50000.0));
}

TEST(Gamma, Normalization) {
  for (double shape : {0.5, 1.0, 3.2}) {
    EXPECT_NEAR(integrate_positive([&](double x) { return logpdf_gamma(x, shape, 0.7); }), 1.0, 1e-4) << shape;
  }
  EXPECT_THROW(logpdf_gamma(1.0, 0.0, 1.0), DomainError);
}

TEST(HalfT, MedianCalibration) {
  const double t75 = boost::math::quantile(boost::math::students_t_distribution<>(2.0), 0.75);
  const double median = 1.04 * t75;
  EXPECT_NEAR(median, 0.8492, 1e-4);
  EXPECT_NEAR(median * median, 0.721, 1e-3);
  EXPECT_NEAR(cdf_half_t(median, 2.0, 1.04), 0.5, 1e-12);
}

TEST(HalfT, LargeDofApproachesHalfNormal) {
  const double scale = 1.3;
  EXPECT_NEAR(std::exp(logpdf_half_t(0.0, 1e7, scale)), 2.0 / (scale * std::sqrt(2.0 * std::numbers::pi)), 1e-6);
}

TEST(HalfT, Normalization) {
  for (double nu : {1.0, 2.0, 7.0}) {
    EXPECT_NEAR(integrate_positive([&](double x) { return logpdf_half_t(x, nu, 1.04); }), 1.0, 1e-4) << nu;
  }
  EXPECT_THROW(logpdf_half_t(-0.1, 2.0, 1.0), DomainError);
}

TEST(CorrMarginal, ClosedFormsAndNormalization) {
  for (double r : {-0.9, 0.0, 0.3}) EXPECT_NEAR(logpdf_corr_marginal(r, 0.0), -std::log(2.0), 1e-15);
  EXPECT_NEAR(logpdf_corr_marginal(0.0, 1.0), std::log(0.75), 1e-14);
  tanh_sinh<double> ts;
  for (double a : {-0.5, 0.0, 1.0, 3.5}) {
    EXPECT_NEAR(ts.integrate([&](double r) { return std::exp(logpdf_corr_marginal(r, a)); }, -1.0, 1.0), 1.0, 1e-4) << a;
  }
  EXPECT_NEAR(cdf_corr_marginal(0.0, 2.0), 0.5, 1e-14);
  EXPECT_THROW(logpdf_corr_marginal(1.0, 0.0), DomainError);
}
