#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>

#include "covprior/error.hpp"
#include "covprior/matrix.hpp"
#include "covprior/rng.hpp"

namespace covprior {

namespace detail {
inline void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError(std::string(what) + " must be positive and finite");
}
inline void require_dof(double nu, int d) {
  if (!(nu > d - 1)) {
    throw InvalidDegreesOfFreedom("degrees of freedom " + std::to_string(nu) + " must exceed d - 1 = " +
                                  std::to_string(d - 1));
  }
}
}  // namespace detail

/// log of the multivariate gamma function Gamma_d(a).
inline double log_multigamma(double a, int d) {
  double out = 0.25 * d * (d - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= d; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

/// Lower-triangular Bartlett factor A with W = A A^T ~ Wishart(nu, I).
inline Eigen::MatrixXd bartlett_factor(double nu, int d, RngStream& rng) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    A(i, i) = std::sqrt(rng.chi_square(nu - i));
    for (int j = 0; j < i; ++j) A(i, j) = rng.normal();
  }
  return A;
}

inline SpdMatrix sample_wishart(double nu, const SpdMatrix& scale, RngStream& rng) {
  const int d = scale.dim();
  detail::require_dof(nu, d);
  const Eigen::MatrixXd A = bartlett_factor(nu, d, rng);
  return SpdMatrix::from_cholesky(scale.chol() * A);
}

/// Inverse of a Wishart(nu, lambda^{-1}) draw.
///
/// With lambda = C C^T and a Bartlett factor A, the draw is
/// (C A^{-T})(C A^{-T})^T; its Cholesky factor comes from a QR of the
/// transposed square root so the matrix itself is never formed.
inline SpdMatrix sample_inverse_wishart(double nu, const SpdMatrix& lambda, RngStream& rng) {
  const int d = lambda.dim();
  detail::require_dof(nu, d);
  const Eigen::MatrixXd A = bartlett_factor(nu, d, rng);
  const Eigen::MatrixXd a_inv =
      A.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd root = lambda.chol() * a_inv.transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(root.transpose());
  Eigen::MatrixXd L = qr.matrixQR().triangularView<Eigen::Upper>().toDenseMatrix().transpose();
  for (int i = 0; i < d; ++i) {
    if (L(i, i) < 0.0) L.col(i) *= -1.0;
  }
  return SpdMatrix::from_cholesky(L);
}

/// Fully normalized inverse-Wishart log density.
inline double logpdf_inverse_wishart(const SpdMatrix& sigma, double nu, const SpdMatrix& lambda) {
  const int d = sigma.dim();
  detail::require_dof(nu, d);
  if (lambda.dim() != d) throw DomainError("inverse Wishart: dimension mismatch");
  return -0.5 * (nu + d + 1) * sigma.log_det() - 0.5 * sigma.trace_solve(lambda.matrix()) +
         0.5 * nu * lambda.log_det() - 0.5 * nu * d * std::numbers::ln2 - log_multigamma(0.5 * nu, d);
}

inline double logpdf_scaled_inv_chi2(double x, double nu, double s2) {
  detail::require_positive(x, "x");
  detail::require_positive(nu, "nu");
  detail::require_positive(s2, "s2");
  const double h = 0.5 * nu;
  return h * std::log(h) - std::lgamma(h) + h * std::log(s2) - (h + 1.0) * std::log(x) - nu * s2 / (2.0 * x);
}

inline double cdf_scaled_inv_chi2(double x, double nu, double s2) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_q(0.5 * nu, nu * s2 / (2.0 * x));
}

inline double logpdf_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Density of exp(Normal(b, xi^2)).
inline double logpdf_lognormal(double x, double b, double xi) {
  detail::require_positive(x, "x");
  detail::require_positive(xi, "xi");
  return logpdf_normal(std::log(x), b, xi) - std::log(x);
}

inline double sample_lognormal(double b, double xi, RngStream& rng) {
  detail::require_positive(xi, "xi");
  return std::exp(b + xi * rng.normal());
}

/// Gamma with rate parameterization: mean shape / rate.
inline double sample_gamma(double shape, double rate, RngStream& rng) {
  detail::require_positive(shape, "shape");
  detail::require_positive(rate, "rate");
  return rng.gamma(shape) / rate;
}

inline double logpdf_gamma(double x, double shape, double rate) {
  detail::require_positive(x, "x");
  detail::require_positive(shape, "shape");
  detail::require_positive(rate, "rate");
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

/// Half-t with location 0: 2 t_nu(x / scale) / scale on x >= 0.
inline double logpdf_half_t(double x, double nu, double scale) {
  if (!(x >= 0.0)) throw DomainError("half-t support is x >= 0");
  detail::require_positive(nu, "nu");
  detail::require_positive(scale, "scale");
  const double t = x / scale;
  return std::numbers::ln2 + std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(t * t / nu) - std::log(scale);
}

inline double cdf_half_t(double x, double nu, double scale) {
  if (x <= 0.0) return 0.0;
  boost::math::students_t dist(nu);
  return 2.0 * boost::math::cdf(dist, x / scale) - 1.0;
}

/// Normalized density p(rho) proportional to (1 - rho^2)^exponent on (-1, 1).
inline double logpdf_corr_marginal(double rho, double exponent) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("correlation must lie in (-1, 1)");
  if (!(exponent > -1.0)) throw DomainError("correlation marginal exponent must exceed -1");
  // Normalizer: integral of (1 - r^2)^a over (-1, 1) = B(1/2, a + 1).
  const double log_norm = std::lgamma(0.5) + std::lgamma(exponent + 1.0) - std::lgamma(exponent + 1.5);
  return exponent * std::log1p(-rho * rho) - log_norm;
}

/// (rho + 1) / 2 is Beta(a + 1, a + 1).
inline double cdf_corr_marginal(double rho, double exponent) {
  if (rho <= -1.0) return 0.0;
  if (rho >= 1.0) return 1.0;
  return boost::math::ibeta(exponent + 1.0, exponent + 1.0, 0.5 * (rho + 1.0));
}

}  // namespace covprior
