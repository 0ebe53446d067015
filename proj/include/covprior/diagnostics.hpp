#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "covprior/error.hpp"

namespace covprior {

namespace detail {
inline double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}
inline double var_of(std::span<const double> x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}
}  // namespace detail

/// Split potential scale reduction factor. Each chain is cut in half; with
/// m half-chains of length n, W the mean within-half variance and B = n times
/// the variance of half-chain means, R = sqrt(((n-1)/n W + B/n) / W).
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw DomainError("split_rhat needs at least two chains");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  if (len < 4) throw DomainError("split_rhat needs chains of length >= 4");
  const std::size_t half = len / 2;
  std::vector<std::span<const double>> parts;
  for (const auto& c : chains) {
    // An odd middle draw is dropped.
    parts.emplace_back(c.data(), half);
    parts.emplace_back(c.data() + (len - half), half);
  }
  const double n = static_cast<double>(half);
  std::vector<double> means, vars;
  for (const auto& p : parts) {
    means.push_back(detail::mean_of(p));
    vars.push_back(detail::var_of(p));
  }
  const double w = detail::mean_of(vars);
  const double b = n * detail::var_of(means);
  if (!(w > 0.0)) {
    if (b > 0.0) return std::numeric_limits<double>::infinity();
    throw ZeroVariance("split_rhat: all draws identical");
  }
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

/// Multi-chain effective sample size with Geyer's initial monotone sequence.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m == 0) return 0.0;
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) return static_cast<double>(m * n);
  std::vector<double> means(m), vars(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::span<const double> c(chains[k].data(), n);
    means[k] = detail::mean_of(c);
    vars[k] = detail::var_of(c);
  }
  const double w = detail::mean_of(vars);
  const double b_over_n = m > 1 ? detail::var_of(means) : 0.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);

  auto autocov = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) s += (chains[k][t] - means[k]) * (chains[k][t + lag] - means[k]);
      total += s / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (w - autocov(lag)) / var_plus; };

  // Sum of consecutive pairs, truncated at the first non-positive pair and
  // forced non-increasing.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

/// Quantile by linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw DomainError("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov tests.

/// Asymptotic Kolmogorov survival function Q(lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic;
  double p_value;
};

inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw DomainError("ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)};
}

inline KsResult ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_test_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double se = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((se + 0.12 + 0.11 / se) * d)};
}

// ---------------------------------------------------------------------------
// Sample correlation.

/// Sample Pearson correlation.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("pearson: need equal lengths >= 2");
  const double mx = detail::mean_of(x);
  const double my = detail::mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ZeroVariance("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

namespace detail {
inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}
}  // namespace detail

inline double spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = detail::ranks(x);
  const auto ry = detail::ranks(y);
  return pearson(rx, ry);
}

}  // namespace covprior
