#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "covprior/analysis.hpp"
#include "covprior/concurrency.hpp"
#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "covprior/likelihood.hpp"
#include "covprior/matrix.hpp"
#include "covprior/rng.hpp"
#include "covprior/samplers.hpp"

namespace covprior {

struct DimGrid {
  int d = 2;
  std::vector<int> n;
  std::vector<double> sigma;
  std::vector<double> rho;
  int replicates = 5;
};

/// Factorial design: for each dimension, every (n, rho, replicate, sigma, prior).
struct ScenarioGrid {
  std::vector<DimGrid> dims;
  std::vector<FitPrior> priors;
  std::uint64_t master_seed = 20140601;

  static DimGrid table_d2() { return {2, {10, 50, 250}, {0.01, 0.1, 1.0, 10.0, 100.0}, {0.0, 0.25, 0.5, 0.75, 0.99}, 5}; }
  static DimGrid table_d10(int replicates) { return {10, {10, 50}, {0.1, 1.0, 100.0}, {0.0, 0.99}, replicates}; }

  /// d=2 at five replicates; with `full` the d=10 cells are added at two
  /// replicates each.
  static ScenarioGrid desk_default(bool full) {
    ScenarioGrid g;
    g.dims.push_back(table_d2());
    if (full) g.dims.push_back(table_d10(2));
    g.priors = {FitPrior::iw, FitPrior::siw, FitPrior::hiw_ht, FitPrior::bmm_mu};
    return g;
  }

  void validate() const {
    if (dims.empty()) throw ConfigError("grid has no dimensions");
    if (priors.empty()) throw ConfigError("grid has no priors");
    for (const auto& g : dims) {
      if (g.d < 2) throw ConfigError("grid dimension must be >= 2");
      if (g.replicates < 1) throw ConfigError("replicates must be >= 1");
      if (g.n.empty() || g.sigma.empty() || g.rho.empty()) throw ConfigError("grid axes must be nonempty");
      for (int n : g.n)
        if (n < 1) throw ConfigError("n must be >= 1");
      for (double s : g.sigma)
        if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("sigma values must be positive");
      for (double r : g.rho)
        if (!(r < 1.0 && r > -1.0 / (g.d - 1))) throw ConfigError("rho " + format_double(r) + " invalid for d=" + std::to_string(g.d));
    }
  }
};

inline nlohmann::json to_json(const ScenarioGrid& g) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& d : g.dims)
    dims.push_back({{"d", d.d}, {"n", d.n}, {"sigma", d.sigma}, {"rho", d.rho}, {"replicates", d.replicates}});
  std::vector<std::string> priors;
  for (auto p : g.priors) priors.push_back(to_string(p));
  return {{"dims", dims}, {"priors", priors}, {"master_seed", g.master_seed}};
}

/// Equal unit variances with common correlation rho.
inline SpdMatrix equicorrelation(int d, double rho) {
  if (!(rho < 1.0 && rho > -1.0 / (d - 1))) throw DomainError("rho " + format_double(rho) + " invalid for equicorrelation");
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(d, d, rho);
  m.diagonal().setOnes();
  return SpdMatrix::from_matrix(m);
}

/// Base dataset (sigma = 1) for one replicate; other sigma scenarios are
/// rescale(base, sigma).
inline Dataset generate_scenario_data(int d, int n, double rho, std::uint64_t replicate_seed) {
  const SpdMatrix sigma = equicorrelation(d, rho);
  RngStream rng(replicate_seed, 0);
  return simulate_mvn(n, Eigen::VectorXd::Zero(d), sigma, rng);
}

inline std::uint64_t replicate_seed(std::uint64_t master, int d, int n, double rho, int replicate) {
  RngStream s(master, stream_key("data|" + std::to_string(d) + "|" + std::to_string(n) + "|" + format_double(rho) + "|" +
                                 std::to_string(replicate)));
  return s.next_u64();
}

struct ParamEstimate {
  std::string name;
  double true_value = 0.0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double q025 = std::numeric_limits<double>::quiet_NaN();
  double q500 = std::numeric_limits<double>::quiet_NaN();
  double q975 = std::numeric_limits<double>::quiet_NaN();
};

struct CellResult {
  int d = 0;
  int n = 0;
  double sigma = 0.0;
  double rho = 0.0;
  int replicate = 0;
  FitPrior prior = FitPrior::iw;
  // sigma_1 then rho_i_j for i < j.
  std::vector<ParamEstimate> params;
  double cov12_true = 0.0;
  double cov12_mean = std::numeric_limits<double>::quiet_NaN();
  double rhat_max = std::numeric_limits<double>::quiet_NaN();
  int reruns = 0;
  int divergences = 0;
  std::size_t draws = 0;
  double runtime_s = 0.0;
  std::string error;

  bool ok() const { return error.empty(); }
  const ParamEstimate& param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p;
    throw DomainError("no parameter " + name);
  }
};

struct CellSpec {
  int d;
  int n;
  double sigma;
  double rho;
  int replicate;
  FitPrior prior;
};

inline std::vector<CellSpec> enumerate_cells(const ScenarioGrid& grid) {
  std::vector<CellSpec> cells;
  for (const auto& g : grid.dims)
    for (int n : g.n)
      for (double rho : g.rho)
        for (int r = 0; r < g.replicates; ++r)
          for (double s : g.sigma)
            for (FitPrior p : grid.priors) cells.push_back({g.d, n, s, rho, r, p});
  return cells;
}

/// Fits one cell. The sampler seed depends only on the cell's coordinates.
inline CellResult run_cell(const CellSpec& c, std::uint64_t master_seed, const ChainConfig& cfg) {
  CellResult out;
  out.d = c.d;
  out.n = c.n;
  out.sigma = c.sigma;
  out.rho = c.rho;
  out.replicate = c.replicate;
  out.prior = c.prior;
  out.cov12_true = c.rho * c.sigma * c.sigma;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Dataset base = generate_scenario_data(c.d, c.n, c.rho, replicate_seed(master_seed, c.d, c.n, c.rho, c.replicate));
    const Dataset data = rescale(base, c.sigma);
    ChainConfig local = cfg;
    RngStream s(master_seed, stream_key("fit|" + std::to_string(c.d) + "|" + std::to_string(c.n) + "|" +
                                        format_double(c.sigma) + "|" + format_double(c.rho) + "|" +
                                        std::to_string(c.replicate) + "|" + to_string(c.prior)));
    local.seed = s.next_u64();
    const FitReport fit = fit_with_prior(c.prior, data, local);
    auto push = [&](const std::string& name, double truth) {
      const auto& q = fit.at(name);
      out.params.push_back({name, truth, q.mean, q.q025, q.q500, q.q975});
    };
    push("sigma_1", c.sigma);
    for (int i = 1; i <= c.d; ++i)
      for (int j = i + 1; j <= c.d; ++j) push("rho_" + std::to_string(i) + "_" + std::to_string(j), c.rho);
    out.cov12_mean = fit.posterior_mean("cov_1_2");
    out.rhat_max = fit.max_rhat;
    out.reruns = fit.reruns_performed;
    out.divergences = fit.divergences;
    out.draws = fit.draws.total();
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Runs every cell on at most `jobs` workers (0: COVPRIOR_JOBS or 1). Cell
/// failures are recorded in CellResult::error. Results follow enumerate_cells order.
inline std::vector<CellResult> run_grid(const ScenarioGrid& grid, const ChainConfig& cfg, int jobs = 0) {
  grid.validate();
  cfg.validate();
  const auto cells = enumerate_cells(grid);
  const int workers = resolve_jobs(jobs);
  ChainConfig inner = cfg;
  if (workers > 1) inner.jobs = 1;
  std::vector<CellResult> results(cells.size());
  parallel_for(cells.size(), workers, [&](std::size_t i) { results[i] = run_cell(cells[i], grid.master_seed, inner); });
  return results;
}

struct BiasRow {
  int d;
  int n;
  double sigma;
  double rho;
  FitPrior prior;
  int replicates;  // successful cells averaged
  double rho_bias;
  double sigma_bias;
  double cov12_bias;
};

/// Mean over replicates of (posterior mean - truth) for rho_1_2, sigma_1 and
/// Sigma_12, per (d, n, sigma, rho, prior). Failed cells are skipped.
inline std::vector<BiasRow> bias_summary(const std::vector<CellResult>& results) {
  using Key = std::tuple<int, int, double, double, int>;
  struct Acc {
    int count = 0;
    double rho = 0.0, sigma = 0.0, cov = 0.0;
  };
  std::map<Key, Acc> acc;
  for (const auto& r : results) {
    if (!r.ok()) continue;
    auto& a = acc[Key{r.d, r.n, r.sigma, r.rho, static_cast<int>(r.prior)}];
    a.count += 1;
    a.rho += r.param("rho_1_2").mean - r.rho;
    a.sigma += r.param("sigma_1").mean - r.sigma;
    a.cov += r.cov12_mean - r.cov12_true;
  }
  std::vector<BiasRow> out;
  for (const auto& [k, a] : acc) {
    const double c = a.count;
    out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), static_cast<FitPrior>(std::get<4>(k)),
                   a.count, a.rho / c, a.sigma / c, a.cov / c});
  }
  return out;
}

inline void write_results_csv(std::ostream& os, const std::vector<CellResult>& results) {
  os << "d,n,sigma,rho,replicate,prior,param,true_value,post_mean,post_q025,post_q500,post_q975,rhat_max,runtime_s\n";
  for (const auto& r : results) {
    for (const auto& p : r.params) {
      os << r.d << ',' << r.n << ',' << format_double(r.sigma) << ',' << format_double(r.rho) << ',' << r.replicate << ','
         << to_string(r.prior) << ',' << p.name << ',' << format_double(p.true_value) << ',' << format_double(p.mean) << ','
         << format_double(p.q025) << ',' << format_double(p.q500) << ',' << format_double(p.q975) << ','
         << format_double(r.rhat_max) << ',' << format_double(r.runtime_s) << '\n';
    }
  }
  for (const auto& r : results) {
    if (r.ok()) continue;
    os << "# failed cell d=" << r.d << " n=" << r.n << " sigma=" << format_double(r.sigma) << " rho=" << format_double(r.rho)
       << " replicate=" << r.replicate << " prior=" << to_string(r.prior) << ": " << r.error << '\n';
  }
}

inline void write_bias_csv(std::ostream& os, const std::vector<BiasRow>& rows) {
  os << "d,n,sigma,rho,prior,replicates,rho_bias,sigma_bias,cov12_bias\n";
  for (const auto& b : rows) {
    os << b.d << ',' << b.n << ',' << format_double(b.sigma) << ',' << format_double(b.rho) << ',' << to_string(b.prior) << ','
       << b.replicates << ',' << format_double(b.rho_bias) << ',' << format_double(b.sigma_bias) << ','
       << format_double(b.cov12_bias) << '\n';
  }
}

}  // namespace covprior
