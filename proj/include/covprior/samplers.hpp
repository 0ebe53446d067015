#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covprior/autodiff.hpp"
#include "covprior/concurrency.hpp"
#include "covprior/diagnostics.hpp"
#include "covprior/distributions.hpp"
#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "covprior/likelihood.hpp"
#include "covprior/matrix.hpp"
#include "covprior/priors.hpp"
#include "covprior/rng.hpp"
#include "json.hpp"

namespace covprior {

struct ChainConfig {
  int num_chains = 3;
  int warmup_iters = 1000;
  int sample_iters = 1000;
  std::uint64_t seed = 20140601;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  int thin = 1;
  // Worker threads for chains (0: COVPRIOR_JOBS or 1).
  int jobs = 0;
  // Escalation when any R-hat exceeds rhat_threshold: one rerun with this many
  // post-warmup iterations per chain.
  bool rerun_on_rhat = true;
  double rhat_threshold = 1.1;
  int rerun_sample_iters = 2000;
  // Dual averaging.
  double gamma = 0.05;
  double t0 = 10.0;
  double kappa = 0.75;
  double init_radius = 2.0;

  void validate() const {
    if (num_chains < 1) throw ConfigError("num_chains must be >= 1");
    if (warmup_iters < 0 || sample_iters < 1) throw ConfigError("iteration counts must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
    if (max_tree_depth < 1) throw ConfigError("max_tree_depth must be >= 1");
    if (thin < 1) throw ConfigError("thin must be >= 1");
  }
};

inline nlohmann::json to_json(const ChainConfig& c) {
  return {{"num_chains", c.num_chains}, {"warmup_iters", c.warmup_iters}, {"sample_iters", c.sample_iters},
          {"seed", c.seed}, {"target_accept", c.target_accept}, {"max_tree_depth", c.max_tree_depth},
          {"thin", c.thin}, {"rerun_on_rhat", c.rerun_on_rhat}, {"rhat_threshold", c.rhat_threshold},
          {"rerun_sample_iters", c.rerun_sample_iters}};
}

/// Log posterior in unconstrained coordinates with mean fixed at zero.
class PosteriorTarget {
 public:
  PosteriorTarget(PriorSpec spec, SufficientStats stats) : spec_(std::move(spec)), stats_(std::move(stats)) {
    if (stats_.n > 0 && stats_.d != spec_.dim()) throw DomainError("data dimension differs from prior dimension");
    stats_.d = spec_.dim();
  }

  int dimension() const { return param_length(spec_.kind(), spec_.dim()); }
  const PriorSpec& spec() const { return spec_; }
  const SufficientStats& stats() const { return stats_; }

  template <class T>
  T operator()(std::span<const T> p) const {
    PriorTerms<T> terms = evaluate_prior(spec_, p);
    if (!std::isfinite(value_of(terms.log_prior))) return terms.log_prior;
    if (stats_.n == 0) return terms.log_prior;
    return terms.log_prior + log_likelihood_chol<T>(terms.sigma_chol, terms.sigma_log_diag, stats_);
  }

  double value_and_gradient(std::span<const double> x, std::span<double> grad) const {
    return gradient(*this, x, grad);
  }

 private:
  PriorSpec spec_;
  SufficientStats stats_;
};

/// One retained posterior draw.
struct Draw {
  SpdMatrix sigma_mat;
  Eigen::VectorXd sigma;
  std::vector<double> rho;  // upper off-diagonal correlations, row-major
  double log_posterior = 0.0;
  bool divergent = false;
  int tree_depth = 0;
};

struct ChainDraws {
  int dim = 0;
  std::vector<std::vector<Draw>> chains;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& c : chains) t += c.size();
    return t;
  }
};

struct QuantitySummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  // Monte Carlo standard error of the mean, sd / sqrt(ess).
  double mcse = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
  double rhat = 1.0;
  double ess = 0.0;
};

struct FitReport {
  std::string prior;
  ChainDraws draws;
  std::vector<QuantitySummary> quantities;
  double max_rhat = 1.0;
  int reruns_performed = 0;
  int divergences = 0;
  std::vector<double> step_sizes;

  const QuantitySummary& at(const std::string& name) const {
    for (const auto& q : quantities)
      if (q.name == name) return q;
    throw DomainError("no quantity named " + name);
  }
  double posterior_mean(const std::string& name) const { return at(name).mean; }
  double divergence_rate() const {
    const auto t = draws.total();
    return t ? static_cast<double>(divergences) / static_cast<double>(t) : 0.0;
  }
};

/// Names in output order: sigma_i, rho_i_j (i < j), cov_i_j (i <= j); 1-based.
inline std::vector<std::string> quantity_names(int d) {
  std::vector<std::string> out;
  for (int i = 1; i <= d; ++i) out.push_back("sigma_" + std::to_string(i));
  for (int i = 1; i <= d; ++i)
    for (int j = i + 1; j <= d; ++j) out.push_back("rho_" + std::to_string(i) + "_" + std::to_string(j));
  for (int i = 1; i <= d; ++i)
    for (int j = i; j <= d; ++j) out.push_back("cov_" + std::to_string(i) + "_" + std::to_string(j));
  return out;
}

namespace detail {

inline std::vector<double> flatten(const Draw& dr) {
  const int d = static_cast<int>(dr.sigma.size());
  std::vector<double> out(dr.sigma.data(), dr.sigma.data() + d);
  out.insert(out.end(), dr.rho.begin(), dr.rho.end());
  const Eigen::MatrixXd m = dr.sigma_mat.matrix();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) out.push_back(m(i, j));
  return out;
}

inline Draw make_draw(SpdMatrix sigma_mat, double logpost, bool divergent, int depth) {
  const CovDecomposition dec = decompose(sigma_mat);
  return Draw{std::move(sigma_mat), dec.sigma, dec.corr.upper_entries(), logpost, divergent, depth};
}

}  // namespace detail

/// Posterior means, quantiles, split R-hat and ESS for every quantity,
/// pooled across chains.
inline std::vector<QuantitySummary> summarize(const ChainDraws& draws) {
  if (draws.total() == 0) throw DomainError("summarize: no draws");
  const auto names = quantity_names(draws.dim);
  const std::size_t q = names.size();
  // per quantity, per chain
  std::vector<std::vector<std::vector<double>>> series(q, std::vector<std::vector<double>>(draws.chains.size()));
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    for (const auto& dr : draws.chains[c]) {
      const auto flat = detail::flatten(dr);
      for (std::size_t k = 0; k < q; ++k) series[k][c].push_back(flat[k]);
    }
  }
  std::vector<QuantitySummary> out;
  out.reserve(q);
  for (std::size_t k = 0; k < q; ++k) {
    std::vector<double> pooled;
    for (const auto& c : series[k]) pooled.insert(pooled.end(), c.begin(), c.end());
    QuantitySummary s;
    s.name = names[k];
    s.mean = detail::mean_of(pooled);
    s.q025 = quantile(pooled, 0.025);
    s.q500 = quantile(pooled, 0.5);
    s.q975 = quantile(pooled, 0.975);
    s.rhat = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> nonempty;
    for (const auto& c : series[k])
      if (!c.empty()) nonempty.push_back(c);
    if (nonempty.size() >= 2 && nonempty.front().size() >= 4) {
      try {
        s.rhat = split_rhat(nonempty);
      } catch (const ZeroVariance&) {
        s.rhat = 1.0;
      }
    }
    s.ess = effective_sample_size(nonempty);
    s.sd = pooled.size() > 1 ? std::sqrt(detail::var_of(pooled)) : 0.0;
    s.mcse = s.ess > 0.0 ? s.sd / std::sqrt(s.ess) : std::numeric_limits<double>::infinity();
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// No-U-Turn sampler.

/// Value-and-gradient callback over unconstrained coordinates.
using LogDensityFn = std::function<double(std::span<const double>, std::span<double>)>;

struct ChainOutput {
  std::vector<std::vector<double>> positions;
  std::vector<double> log_density;
  std::vector<char> divergent;
  std::vector<int> tree_depth;
  double step_size = 0.0;
  std::vector<double> inv_metric;
};

namespace detail {

struct PhasePoint {
  std::vector<double> q, p, g;
  double logp = 0.0;
};

class NutsChain {
 public:
  NutsChain(const LogDensityFn& f, int dim, const ChainConfig& cfg, RngStream rng)
      : f_(f), dim_(dim), cfg_(cfg), rng_(rng), inv_metric_(static_cast<std::size_t>(dim), 1.0) {}

  ChainOutput run() {
    PhasePoint cur = initial_point();
    find_step_size(cur);
    const int warm = cfg_.warmup_iters;
    // Step size only, then a metric window, then step size again.
    const bool adapt_metric = warm >= 20;
    const int window_start = adapt_metric ? static_cast<int>(0.15 * warm) : warm;
    const int window_end = adapt_metric ? static_cast<int>(0.75 * warm) : warm;
    start_dual_averaging();
    std::vector<double> wmean(static_cast<std::size_t>(dim_), 0.0), wm2(static_cast<std::size_t>(dim_), 0.0);
    int wcount = 0;
    for (int it = 0; it < warm; ++it) {
      const auto stats = transition(cur);
      adapt_step(stats.accept_stat);
      if (it >= window_start && it < window_end) {
        ++wcount;
        for (int i = 0; i < dim_; ++i) {
          const double delta = cur.q[i] - wmean[i];
          wmean[i] += delta / wcount;
          wm2[i] += delta * (cur.q[i] - wmean[i]);
        }
      }
      if (it + 1 == window_end && wcount > 2) {
        for (int i = 0; i < dim_; ++i) {
          const double var = wm2[i] / (wcount - 1);
          inv_metric_[i] = (wcount / (wcount + 5.0)) * var + 1e-3 * (5.0 / (wcount + 5.0));
        }
        find_step_size(cur);
        start_dual_averaging();
      }
    }
    if (warm > 0) step_ = std::exp(log_step_bar_);
    if (!(step_ > 1e-12) || !std::isfinite(step_)) throw AdaptationFailure("step size collapsed during warmup");

    ChainOutput out;
    out.step_size = step_;
    out.inv_metric = inv_metric_;
    const int total = cfg_.sample_iters * cfg_.thin;
    for (int it = 0; it < total; ++it) {
      const auto stats = transition(cur);
      if ((it + 1) % cfg_.thin == 0) {
        out.positions.push_back(cur.q);
        out.log_density.push_back(cur.logp);
        out.divergent.push_back(stats.divergent ? 1 : 0);
        out.tree_depth.push_back(stats.depth);
      }
    }
    return out;
  }

 private:
  struct TransitionStats {
    double accept_stat;
    bool divergent;
    int depth;
  };

  struct Subtree {
    PhasePoint minus, plus;
    PhasePoint proposal;
    double n_valid = 0.0;
    bool keep_going = true;
    bool divergent = false;
    double sum_alpha = 0.0;
    int n_alpha = 0;
  };

  double evaluate(std::span<const double> q, std::span<double> g) const {
    try {
      const double v = f_(q, g);
      if (std::isnan(v)) return -std::numeric_limits<double>::infinity();
      return v;
    } catch (const Error&) {
      return -std::numeric_limits<double>::infinity();
    }
  }

  double kinetic(const std::vector<double>& p) const {
    double k = 0.0;
    for (int i = 0; i < dim_; ++i) k += inv_metric_[i] * p[i] * p[i];
    return 0.5 * k;
  }

  PhasePoint initial_point() {
    PhasePoint z;
    z.q.resize(static_cast<std::size_t>(dim_));
    z.p.assign(static_cast<std::size_t>(dim_), 0.0);
    z.g.resize(static_cast<std::size_t>(dim_));
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (auto& x : z.q) x = rng_.uniform(-cfg_.init_radius, cfg_.init_radius);
      z.logp = evaluate(z.q, z.g);
      bool ok = std::isfinite(z.logp);
      for (double x : z.g) ok = ok && std::isfinite(x);
      if (ok) return z;
    }
    throw AdaptationFailure("no finite initial point after 100 attempts");
  }

  void sample_momentum(PhasePoint& z) {
    for (int i = 0; i < dim_; ++i) z.p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
  }

  void leapfrog(PhasePoint& z, double eps) const {
    for (int i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.g[i];
    for (int i = 0; i < dim_; ++i) z.q[i] += eps * inv_metric_[i] * z.p[i];
    z.logp = evaluate(z.q, z.g);
    if (!std::isfinite(z.logp)) return;
    for (int i = 0; i < dim_; ++i) z.p[i] += 0.5 * eps * z.g[i];
  }

  double joint(const PhasePoint& z) const { return z.logp - kinetic(z.p); }

  bool no_uturn(const PhasePoint& minus, const PhasePoint& plus) const {
    double a = 0.0, b = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double dq = plus.q[i] - minus.q[i];
      a += dq * inv_metric_[i] * minus.p[i];
      b += dq * inv_metric_[i] * plus.p[i];
    }
    return a >= 0.0 && b >= 0.0;
  }

  Subtree build_tree(const PhasePoint& from, double log_u, int direction, int depth, double joint0) {
    if (depth == 0) {
      Subtree t;
      PhasePoint z = from;
      leapfrog(z, direction * step_);
      const double h = std::isfinite(z.logp) ? joint(z) : -std::numeric_limits<double>::infinity();
      t.divergent = !std::isfinite(h) || (joint0 - h) > 1000.0;
      t.keep_going = !t.divergent;
      t.n_valid = (log_u <= h) ? 1.0 : 0.0;
      t.sum_alpha = std::isfinite(h) ? std::min(1.0, std::exp(h - joint0)) : 0.0;
      t.n_alpha = 1;
      t.minus = z;
      t.plus = z;
      t.proposal = std::move(z);
      return t;
    }
    Subtree first = build_tree(from, log_u, direction, depth - 1, joint0);
    if (!first.keep_going) return first;
    Subtree second = build_tree(direction < 0 ? first.minus : first.plus, log_u, direction, depth - 1, joint0);
    const double n_total = first.n_valid + second.n_valid;
    if (second.n_valid > 0.0 && rng_.uniform() < second.n_valid / n_total) first.proposal = std::move(second.proposal);
    if (direction < 0) {
      first.minus = std::move(second.minus);
    } else {
      first.plus = std::move(second.plus);
    }
    first.n_valid = n_total;
    first.sum_alpha += second.sum_alpha;
    first.n_alpha += second.n_alpha;
    first.divergent = first.divergent || second.divergent;
    first.keep_going = second.keep_going && no_uturn(first.minus, first.plus);
    return first;
  }

  TransitionStats transition(PhasePoint& cur) {
    sample_momentum(cur);
    const double joint0 = joint(cur);
    const double log_u = joint0 - rng_.exponential();
    PhasePoint minus = cur, plus = cur;
    double n_valid = 1.0;
    bool keep_going = true, divergent = false;
    double sum_alpha = 0.0;
    int n_alpha = 0, depth = 0;
    while (keep_going && depth < cfg_.max_tree_depth) {
      const int direction = rng_.uniform() < 0.5 ? -1 : 1;
      Subtree t = build_tree(direction < 0 ? minus : plus, log_u, direction, depth, joint0);
      if (direction < 0) {
        minus = std::move(t.minus);
      } else {
        plus = std::move(t.plus);
      }
      if (t.keep_going && t.n_valid > 0.0 && rng_.uniform() < std::min(1.0, t.n_valid / n_valid)) {
        cur.q = t.proposal.q;
        cur.g = t.proposal.g;
        cur.logp = t.proposal.logp;
      }
      n_valid += t.n_valid;
      sum_alpha += t.sum_alpha;
      n_alpha += t.n_alpha;
      divergent = divergent || t.divergent;
      keep_going = t.keep_going && no_uturn(minus, plus);
      ++depth;
    }
    return {n_alpha ? sum_alpha / n_alpha : 0.0, divergent, depth};
  }

  void find_step_size(const PhasePoint& cur) {
    if (!(step_ > 0.0) || !std::isfinite(step_)) step_ = 1.0;
    PhasePoint z = cur;
    sample_momentum(z);
    const double joint0 = joint(z);
    auto log_ratio = [&] {
      PhasePoint y = z;
      leapfrog(y, step_);
      const double h = std::isfinite(y.logp) ? joint(y) : -std::numeric_limits<double>::infinity();
      return h - joint0;
    };
    double lr = log_ratio();
    const int dir = lr > std::log(0.5) ? 1 : -1;
    for (int k = 0; k < 100; ++k) {
      if (!(dir * lr > -dir * std::log(2.0))) break;
      step_ *= dir > 0 ? 2.0 : 0.5;
      if (step_ < 1e-12) throw AdaptationFailure("step size collapsed below 1e-12");
      if (step_ > 1e7) break;
      lr = log_ratio();
    }
  }

  void start_dual_averaging() {
    mu_ = std::log(10.0 * step_);
    h_bar_ = 0.0;
    log_step_bar_ = 0.0;
    adapt_t_ = 0;
  }

  void adapt_step(double accept_stat) {
    ++adapt_t_;
    const double t = adapt_t_;
    const double w = 1.0 / (t + cfg_.t0);
    h_bar_ = (1.0 - w) * h_bar_ + w * (cfg_.target_accept - accept_stat);
    const double log_step = mu_ - std::sqrt(t) / cfg_.gamma * h_bar_;
    const double eta = std::pow(t, -cfg_.kappa);
    log_step_bar_ = eta * log_step + (1.0 - eta) * log_step_bar_;
    step_ = std::exp(log_step);
    if (!(step_ > 1e-12)) throw AdaptationFailure("step size collapsed below 1e-12");
  }

  const LogDensityFn& f_;
  int dim_;
  ChainConfig cfg_;
  RngStream rng_;
  std::vector<double> inv_metric_;
  double step_ = 1.0;
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_step_bar_ = 0.0;
  int adapt_t_ = 0;
};

}  // namespace detail

/// Runs one NUTS chain on an arbitrary log density.
inline ChainOutput run_nuts_chain(const LogDensityFn& f, int dim, const ChainConfig& cfg, RngStream rng) {
  cfg.validate();
  detail::NutsChain chain(f, dim, cfg, rng);
  return chain.run();
}

namespace detail {

inline FitReport nuts_once(const PosteriorTarget& target, const ChainConfig& cfg, std::uint64_t stream_offset) {
  const int k = cfg.num_chains;
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(k));
  const LogDensityFn f = [&target](std::span<const double> x, std::span<double> g) {
    return target.value_and_gradient(x, g);
  };
  parallel_for(static_cast<std::size_t>(k), resolve_jobs(cfg.jobs), [&](std::size_t c) {
    outputs[c] = run_nuts_chain(f, target.dimension(), cfg, RngStream(cfg.seed, stream_offset + c));
  });
  FitReport report;
  report.prior = to_string(target.spec().kind());
  report.draws.dim = target.spec().dim();
  const int d = target.spec().dim();
  for (const auto& out : outputs) {
    std::vector<Draw> chain;
    chain.reserve(out.positions.size());
    for (std::size_t i = 0; i < out.positions.size(); ++i) {
      const ParamVector p{target.spec().kind(), d, out.positions[i]};
      auto [sigma, dec] = params_to_cov(target.spec(), p);
      chain.push_back(detail::make_draw(std::move(sigma), out.log_density[i], out.divergent[i] != 0, out.tree_depth[i]));
      report.divergences += out.divergent[i] ? 1 : 0;
    }
    report.draws.chains.push_back(std::move(chain));
    report.step_sizes.push_back(out.step_size);
  }
  report.quantities = summarize(report.draws);
  report.max_rhat = 1.0;
  for (const auto& q : report.quantities)
    if (std::isfinite(q.rhat)) report.max_rhat = std::max(report.max_rhat, q.rhat);
  return report;
}

}  // namespace detail

/// NUTS over the prior's unconstrained coordinates with mu = 0. If any
/// quantity's R-hat exceeds the threshold the fit is redone once with
/// cfg.rerun_sample_iters post-warmup iterations per chain.
inline FitReport nuts_fit(const PriorSpec& spec, const SufficientStats& stats, const ChainConfig& cfg) {
  cfg.validate();
  const PosteriorTarget target(spec, stats);
  FitReport report = detail::nuts_once(target, cfg, 0);
  if (cfg.rerun_on_rhat && report.max_rhat > cfg.rhat_threshold && cfg.num_chains >= 2) {
    ChainConfig longer = cfg;
    longer.sample_iters = cfg.rerun_sample_iters;
    report = detail::nuts_once(target, longer, static_cast<std::uint64_t>(cfg.num_chains));
    report.reruns_performed = 1;
  }
  return report;
}

inline FitReport nuts_fit(const PriorSpec& spec, const Dataset& data, const ChainConfig& cfg) {
  if (data.n() > 0 && data.d() != spec.dim()) throw DomainError("data dimension differs from prior dimension");
  if (data.n() == 0) return nuts_fit(spec, SufficientStats::from_scatter(0, Eigen::MatrixXd::Zero(spec.dim(), spec.dim())), cfg);
  return nuts_fit(spec, SufficientStats::from_data(data), cfg);
}

/// Exact posterior sampling under the inverse-Wishart prior with mu = 0:
/// independent draws from IW(n + nu0, lambda0 + S).
inline FitReport gibbs_iw_fit(double nu0, const SpdMatrix& lambda0, const Dataset& data, const ChainConfig& cfg) {
  cfg.validate();
  const int d = lambda0.dim();
  if (data.n() > 0 && data.d() != d) throw DomainError("data dimension differs from prior dimension");
  const Eigen::MatrixXd s = data.n() > 0 ? suff_stats(data, Eigen::VectorXd::Zero(d)) : Eigen::MatrixXd::Zero(d, d);
  const double nu_post = nu0 + data.n();
  const SpdMatrix scale_post = SpdMatrix::from_matrix(lambda0.matrix() + s);
  const SufficientStats stats = SufficientStats::from_scatter(data.n(), s);
  const PosteriorTarget target(PriorSpec::iw(nu0, lambda0), stats);

  FitReport report;
  report.prior = "iw";
  report.draws.dim = d;
  report.draws.chains.resize(static_cast<std::size_t>(cfg.num_chains));
  parallel_for(static_cast<std::size_t>(cfg.num_chains), resolve_jobs(cfg.jobs), [&](std::size_t c) {
    RngStream rng(cfg.seed, c);
    auto& chain = report.draws.chains[c];
    chain.reserve(static_cast<std::size_t>(cfg.sample_iters));
    for (int it = 0; it < cfg.sample_iters; ++it) {
      SpdMatrix sigma = sample_inverse_wishart(nu_post, scale_post, rng);
      const auto v = spd_unconstrain(sigma);
      const double lp = target(std::span<const double>(v));
      chain.push_back(detail::make_draw(std::move(sigma), lp, false, 0));
    }
  });
  report.step_sizes.assign(static_cast<std::size_t>(cfg.num_chains), 0.0);
  report.quantities = summarize(report.draws);
  for (const auto& q : report.quantities)
    if (std::isfinite(q.rhat)) report.max_rhat = std::max(report.max_rhat, q.rhat);
  return report;
}

// ---------------------------------------------------------------------------
// Output.

inline nlohmann::json to_json(const QuantitySummary& q) {
  auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  return {{"name", q.name}, {"mean", num(q.mean)}, {"sd", num(q.sd)}, {"mcse", num(q.mcse)}, {"q025", num(q.q025)}, {"q500", num(q.q500)},
          {"q975", num(q.q975)}, {"rhat", num(q.rhat)}, {"ess", num(q.ess)}};
}

inline nlohmann::json to_json(const FitReport& r) {
  nlohmann::json qs = nlohmann::json::array();
  for (const auto& q : r.quantities) qs.push_back(to_json(q));
  return {{"prior", r.prior},
          {"dim", r.draws.dim},
          {"chains", r.draws.chains.size()},
          {"draws_per_chain", r.draws.chains.empty() ? 0 : r.draws.chains.front().size()},
          {"max_rhat", r.max_rhat},
          {"reruns_performed", r.reruns_performed},
          {"divergences", r.divergences},
          {"step_sizes", r.step_sizes},
          {"quantities", qs}};
}

/// One row per draw: chain, iter, sigma_1..sigma_d, rho_1_2..rho_{d-1}_d,
/// logpost, divergent, depth.
inline void write_draws_csv(std::ostream& os, const ChainDraws& draws) {
  const int d = draws.dim;
  os << "chain,iter";
  for (int i = 1; i <= d; ++i) os << ",sigma_" << i;
  for (int i = 1; i <= d; ++i)
    for (int j = i + 1; j <= d; ++j) os << ",rho_" << i << '_' << j;
  os << ",logpost,divergent,depth\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    for (std::size_t it = 0; it < draws.chains[c].size(); ++it) {
      const Draw& dr = draws.chains[c][it];
      os << c << ',' << it;
      for (int i = 0; i < d; ++i) os << ',' << format_double(dr.sigma(i));
      for (double r : dr.rho) os << ',' << format_double(r);
      os << ',' << format_double(dr.log_posterior) << ',' << (dr.divergent ? 1 : 0) << ',' << dr.tree_depth << '\n';
    }
  }
}

}  // namespace covprior
