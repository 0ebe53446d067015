#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "covprior/diagnostics.hpp"
#include "covprior/matrix.hpp"
#include "test_util.hpp"

#include <boost/math/distributions/normal.hpp>

using namespace covprior;

namespace {

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).norm() / b.norm(); }

Eigen::VectorXd lower_entries(const Eigen::MatrixXd& m, bool with_diag) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < (with_diag ? i + 1 : i); ++j) v.push_back(m(i, j));
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd random_vector(int n, RngStream& rng, double radius) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-radius, radius);
  return v;
}

}  // namespace

TEST(Cholesky, DiagonalAndIdentity) {
  Eigen::MatrixXd m = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  Eigen::MatrixXd expected = Eigen::Vector2d(2.0, 3.0).asDiagonal();
  EXPECT_TRUE(cholesky(m).isApprox(expected, 1e-15));
  EXPECT_TRUE(cholesky(Eigen::MatrixXd::Identity(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(Cholesky, TwoByTwoReconstruction) {
  Eigen::Matrix2d m;
  m << 2, 1, 1, 2;
  const Eigen::MatrixXd L = cholesky(m);
  EXPECT_LT(rel_err(L * L.transpose(), m), 1e-12);
  EXPECT_DOUBLE_EQ(L(0, 1), 0.0);
}

TEST(Cholesky, RejectsIndefiniteAndAsymmetric) {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  EXPECT_THROW(cholesky(bad), NotPositiveDefinite);
  Eigen::Matrix2d asym;
  asym << 2, 1, 0.5, 2;
  EXPECT_THROW(cholesky(asym), DomainError);
  Eigen::Matrix2d tiny_asym;
  tiny_asym << 2, 1, 1 + 1e-13, 2;
  EXPECT_NO_THROW(cholesky(tiny_asym));
}

TEST(Cholesky, ReconstructionUpToCondition1e8) {
  RngStream rng(1, 1);
  for (double cond : {1.0, 1e2, 1e4, 1e6, 1e8}) {
    for (int d : {2, 5, 10}) {
      for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd m = testutil::random_spd(d, rng, cond);
        const Eigen::MatrixXd L = cholesky(m);
        EXPECT_LT(rel_err(L * L.transpose(), m), 1e-10) << "cond=" << cond << " d=" << d;
      }
    }
  }
}

TEST(Decompose, Examples) {
  const auto dec = decompose(SpdMatrix::identity(2));
  EXPECT_DOUBLE_EQ(dec.sigma(0), 1.0);
  EXPECT_DOUBLE_EQ(dec.corr(0, 1), 0.0);

  Eigen::Matrix2d m;
  m << 4, 3, 3, 9;
  const auto d2 = decompose(SpdMatrix::from_matrix(m));
  EXPECT_NEAR(d2.sigma(0), 2.0, 1e-15);
  EXPECT_NEAR(d2.sigma(1), 3.0, 1e-15);
  EXPECT_NEAR(d2.corr(0, 1), 0.5, 1e-15);
  EXPECT_EQ(d2.corr(0, 0), 1.0);
  EXPECT_EQ(d2.corr(1, 1), 1.0);
}

TEST(Compose, Examples) {
  EXPECT_TRUE(compose({Eigen::Vector2d(1, 1), CorrelationMatrix::identity(2)}).matrix().isApprox(Eigen::Matrix2d::Identity()));

  Eigen::Matrix2d r;
  r << 1, 0.5, 0.5, 1;
  const SpdMatrix s = compose({Eigen::Vector2d(2, 3), CorrelationMatrix::from_matrix(r)});
  Eigen::Matrix2d expected;
  expected << 4, 3, 3, 9;
  EXPECT_LT(rel_err(s.matrix(), expected), 1e-15);

  r << 1, 0.99, 0.99, 1;
  const SpdMatrix t = compose({Eigen::Vector2d(0.01, 0.01), CorrelationMatrix::from_matrix(r)});
  EXPECT_NEAR(t(0, 1), 9.9e-5, 1e-18);
}

TEST(Compose, RejectsBadCorrelation) {
  Eigen::Matrix3d r;
  r << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  EXPECT_THROW(CorrelationMatrix::from_matrix(r), NotPositiveDefinite);
}

TEST(Decompose, RoundTripRandom) {
  RngStream rng(2, 1);
  for (int d : {2, 3, 10}) {
    for (int rep = 0; rep < 50; ++rep) {
      const SpdMatrix s = SpdMatrix::from_matrix(testutil::random_spd(d, rng, 1e3));
      const auto dec = decompose(s);
      EXPECT_LT(rel_err(compose(dec).matrix(), s.matrix()), 1e-12);
      for (int i = 0; i < d; ++i) EXPECT_EQ(dec.corr(i, i), 1.0);
      EXPECT_TRUE(dec.corr.matrix().isApprox(dec.corr.matrix().transpose(), 0.0));
    }
  }
}

TEST(SpdTransform, ZeroIsIdentity) {
  const std::vector<double> v(3, 0.0);
  const auto [s, lj] = spd_constrain(v, 2);
  EXPECT_TRUE(s.matrix().isApprox(Eigen::Matrix2d::Identity(), 0.0));
}

TEST(SpdTransform, RoundTrip) {
  RngStream rng(3, 1);
  for (int d : {2, 10}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::VectorXd v = random_vector(packed_size(d), rng, 2.0);
      const auto [s, lj] = spd_constrain(std::span<const double>(v.data(), v.size()), d);
      const auto back = spd_unconstrain(s);
      for (int k = 0; k < v.size(); ++k) ASSERT_NEAR(back[k], v(k), 1e-10);
    }
  }
}

TEST(SpdTransform, LogJacobianMatchesNumericDeterminant) {
  RngStream rng(4, 1);
  for (int d : {2, 3, 10}) {
    const int reps = d == 10 ? 5 : 100;
    for (int rep = 0; rep < reps; ++rep) {
      const Eigen::VectorXd v = random_vector(packed_size(d), rng, 1.0);
      auto f = [d](const Eigen::VectorXd& x) {
        return lower_entries(spd_constrain(std::span<const double>(x.data(), x.size()), d).first.matrix(), true);
      };
      const double numeric = testutil::log_abs_det(testutil::numeric_jacobian(f, v));
      const double analytic = spd_constrain(std::span<const double>(v.data(), v.size()), d).second;
      EXPECT_NEAR(analytic, numeric, 1e-6) << "d=" << d;
    }
  }
}

TEST(CorrTransform, ZeroAndSingleCorrelation) {
  const std::vector<double> zero(3, 0.0);
  EXPECT_TRUE(corr_constrain(zero, 3).first.matrix().isApprox(Eigen::Matrix3d::Identity(), 0.0));
  const std::vector<double> v{std::atanh(0.5)};
  EXPECT_NEAR(corr_constrain(v, 2).first(0, 1), 0.5, 1e-15);
}

TEST(CorrTransform, RoundTripAndValidity) {
  RngStream rng(5, 1);
  for (int d : {2, 10}) {
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::VectorXd v = random_vector(offdiag_size(d), rng, 2.0);
      const auto [r, lj] = corr_constrain(std::span<const double>(v.data(), v.size()), d);
      for (int i = 0; i < d; ++i) ASSERT_EQ(r(i, i), 1.0);
      EXPECT_NO_THROW(cholesky(r.matrix()));
      const auto back = corr_unconstrain(r);
      for (int k = 0; k < v.size(); ++k) ASSERT_NEAR(back[k], v(k), 1e-10);
    }
  }
}

TEST(CorrTransform, LogJacobianMatchesNumericDeterminant) {
  RngStream rng(6, 1);
  for (int d : {2, 3, 10}) {
    const int reps = d == 10 ? 5 : 100;
    for (int rep = 0; rep < reps; ++rep) {
      const Eigen::VectorXd v = random_vector(offdiag_size(d), rng, 1.0);
      auto f = [d](const Eigen::VectorXd& x) {
        return lower_entries(corr_constrain(std::span<const double>(x.data(), x.size()), d).first.matrix(), false);
      };
      const double numeric = testutil::log_abs_det(testutil::numeric_jacobian(f, v));
      const double analytic = corr_constrain(std::span<const double>(v.data(), v.size()), d).second;
      EXPECT_NEAR(analytic, numeric, 1e-6) << "d=" << d;
    }
  }
}

TEST(CorrTransform, PushForwardOfStandardNormal) {
  // At d=2, rho = tanh(v) with v ~ N(0, 1) has CDF Phi(atanh(rho)).
  RngStream rng(7, 1);
  std::vector<double> rho;
  for (int i = 0; i < 5000; ++i) {
    const std::vector<double> v{rng.normal()};
    rho.push_back(corr_constrain(v, 2).first(0, 1));
  }
  const boost::math::normal_distribution<> n01;
  const auto ks = ks_test(rho, [&](double r) { return boost::math::cdf(n01, std::atanh(r)); });
  EXPECT_GT(ks.p_value, 0.01);
}

TEST(CorrTransform, ExtremeValuesStayValid) {
  const std::vector<double> v{40.0, -40.0, 40.0};
  const auto [r, lj] = corr_constrain(v, 3);
  EXPECT_TRUE(std::isfinite(lj));
  EXPECT_TRUE(r.matrix().allFinite());
}

TEST(Serialization, JsonRoundTrip) {
  RngStream rng(8, 1);
  const SpdMatrix s = SpdMatrix::from_matrix(testutil::random_spd(4, rng, 50.0));
  const auto j = to_json(s);
  EXPECT_EQ(j.at("dim").get<int>(), 4);
  EXPECT_EQ(j.at("lower_chol").size(), 10u);
  const SpdMatrix back = spd_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(back.chol().isApprox(s.chol(), 1e-15));
}

TEST(Serialization, CsvRoundTrip17Digits) {
  RngStream rng(9, 1);
  const Eigen::MatrixXd m = testutil::random_spd(3, rng, 10.0);
  std::stringstream ss;
  write_csv(ss, m);
  const Eigen::MatrixXd back = read_csv_matrix(ss);
  EXPECT_EQ(back, m);
}

TEST(Serialization, CsvReportsLine) {
  std::stringstream ss("1,2\n3,x\n");
  try {
    read_csv_matrix(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
}
