#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covprior/diagnostics.hpp"
#include "covprior/likelihood.hpp"
#include "covprior/priors.hpp"
#include "covprior/rng.hpp"
#include "covprior/samplers.hpp"

// Self-checks shared by the `check` subcommand and the acceptance suite.

namespace covprior {

struct GradientCheck {
  PriorKind kind;
  int d;
  int points;
  double max_rel_error;  // over components not covered by the absolute guard
  double max_abs_error;
  bool passed;
};

/// Autodiff gradient of the log posterior against central differences
/// evaluated in long double. Points are uniform on (-2, 2) per coordinate;
/// data are n = 20 draws from an equicorrelated normal (rho = 0.3).
inline GradientCheck gradient_check(PriorKind kind, int d, int points, std::uint64_t seed, double rel_tol = 1e-5,
                                    double abs_tol = 1e-8) {
  RngStream rng(seed, stream_key("gradient|" + to_string(kind) + "|" + std::to_string(d)));
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(d, d, 0.3);
  c.diagonal().setOnes();
  const Dataset data = simulate_mvn(20, Eigen::VectorXd::Zero(d), SpdMatrix::from_matrix(c), rng);
  const PosteriorTarget target(default_spec(kind, d, SpecMode::posterior_inference), SufficientStats::from_data(data));
  const int dim = target.dimension();
  GradientCheck out{kind, d, points, 0.0, 0.0, true};
  std::vector<double> x(static_cast<std::size_t>(dim)), g(static_cast<std::size_t>(dim));
  std::vector<long double> xl(static_cast<std::size_t>(dim));
  for (int p = 0; p < points; ++p) {
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    target.value_and_gradient(x, g);
    for (int k = 0; k < dim; ++k) {
      std::copy(x.begin(), x.end(), xl.begin());
      const long double h = 1e-5L * std::max(1.0L, std::abs(static_cast<long double>(x[k])));
      xl[k] = x[k] + h;
      const long double up = target(std::span<const long double>(xl));
      xl[k] = x[k] - h;
      const long double down = target(std::span<const long double>(xl));
      const double fd = static_cast<double>((up - down) / (2.0L * h));
      const double err = std::abs(g[k] - fd);
      out.max_abs_error = std::max(out.max_abs_error, err);
      if (err <= abs_tol) continue;
      const double rel = err / std::max(std::abs(fd), std::abs(g[k]));
      out.max_rel_error = std::max(out.max_rel_error, rel);
      if (!(rel < rel_tol)) out.passed = false;
    }
  }
  return out;
}

struct PushForwardCheck {
  PriorKind kind;
  int d;
  KsResult sigma1;
  KsResult rho12;
  double max_rhat;
  double divergence_rate;
};

/// Direct prior draws against NUTS on the prior-only target (prior-study
/// hyperparameters). NUTS draws are pooled over cfg.num_chains chains; use
/// cfg.thin to reduce autocorrelation.
inline PushForwardCheck pushforward_check(PriorKind kind, int d, int draws, const ChainConfig& cfg, std::uint64_t seed) {
  const PriorSpec spec = default_spec(kind, d, SpecMode::prior_study);
  RngStream rng(seed, stream_key("pushforward-direct|" + to_string(kind) + "|" + std::to_string(d)));
  std::vector<double> s_direct, r_direct;
  for (int i = 0; i < draws; ++i) {
    const auto [sigma, dec] = prior_sample(spec, rng);
    s_direct.push_back(dec.sigma(0));
    r_direct.push_back(dec.corr.matrix()(0, 1));
  }
  ChainConfig local = cfg;
  local.seed = RngStream(seed, stream_key("pushforward-nuts|" + to_string(kind) + "|" + std::to_string(d))).next_u64();
  local.sample_iters = (draws + cfg.num_chains - 1) / cfg.num_chains;
  const FitReport fit = nuts_fit(spec, Dataset::empty(d), local);
  std::vector<double> s_nuts, r_nuts;
  for (const auto& chain : fit.draws.chains) {
    for (const auto& dr : chain) {
      if (static_cast<int>(s_nuts.size()) == draws) break;
      s_nuts.push_back(dr.sigma(0));
      r_nuts.push_back(dr.rho[0]);
    }
  }
  return {kind, d, ks_test_two_sample(s_direct, s_nuts), ks_test_two_sample(r_direct, r_nuts), fit.max_rhat,
          fit.divergence_rate()};
}

struct ConjugacyCheck {
  int datasets;
  int comparisons;
  int failures;
  double max_abs_z;
  double max_rhat;
  double max_divergence_rate;
};

/// NUTS (or the exact sampler) under IW(3, I) against the analytic posterior
/// mean (Lambda0 + S) / (n + nu0 - d - 1) for Sigma_11, Sigma_12, Sigma_22
/// on random d = 2 datasets; a comparison fails when |z| > z_max with z in
/// units of the Monte Carlo standard error.
inline ConjugacyCheck conjugacy_check(int datasets, int n, const ChainConfig& cfg, std::uint64_t seed, bool exact_sampler,
                                      double z_max = 3.0) {
  const int d = 2;
  const double nu0 = d + 1.0;
  const SpdMatrix lambda0 = SpdMatrix::identity(d);
  ConjugacyCheck out{datasets, 0, 0, 0.0, 1.0, 0.0};
  for (int k = 0; k < datasets; ++k) {
    RngStream rng(seed, stream_key("conjugacy-data|" + std::to_string(k)));
    // Random truth: sigma in (0.5, 2), rho in (-0.8, 0.8).
    const double s1 = rng.uniform(0.5, 2.0), s2 = rng.uniform(0.5, 2.0), r = rng.uniform(-0.8, 0.8);
    Eigen::Matrix2d truth;
    truth << s1 * s1, r * s1 * s2, r * s1 * s2, s2 * s2;
    const Dataset data = simulate_mvn(n, Eigen::VectorXd::Zero(d), SpdMatrix::from_matrix(truth), rng);
    const Eigen::MatrixXd post_mean =
        (lambda0.matrix() + suff_stats(data, Eigen::VectorXd::Zero(d))) / (n + nu0 - d - 1.0);
    ChainConfig local = cfg;
    local.seed = RngStream(seed, stream_key("conjugacy-fit|" + std::to_string(k))).next_u64();
    const FitReport fit = exact_sampler ? gibbs_iw_fit(nu0, lambda0, data, local)
                                        : nuts_fit(PriorSpec::iw(nu0, lambda0), data, local);
    out.max_rhat = std::max(out.max_rhat, fit.max_rhat);
    out.max_divergence_rate = std::max(out.max_divergence_rate, fit.divergence_rate());
    const std::pair<int, int> idx[] = {{0, 0}, {0, 1}, {1, 1}};
    for (const auto& [i, j] : idx) {
      const auto& q = fit.at("cov_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
      const double z = (q.mean - post_mean(i, j)) / q.mcse;
      out.comparisons += 1;
      out.max_abs_z = std::max(out.max_abs_z, std::abs(z));
      if (!(std::abs(z) <= z_max)) out.failures += 1;
    }
  }
  return out;
}

}  // namespace covprior
