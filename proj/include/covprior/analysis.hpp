#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "covprior/likelihood.hpp"
#include "covprior/priors.hpp"
#include "covprior/samplers.hpp"

namespace covprior {

/// A prior as used in an analysis: the four families plus IWsc, which
/// standardizes every data column before fitting the inverse Wishart.
enum class FitPrior { iw, siw, hiw_ht, bmm_mu, iwsc };

inline std::string to_string(FitPrior p) {
  switch (p) {
    case FitPrior::iw: return "iw";
    case FitPrior::siw: return "siw";
    case FitPrior::hiw_ht: return "hiw";
    case FitPrior::bmm_mu: return "bmm";
    case FitPrior::iwsc: return "iwsc";
  }
  return "?";
}

inline FitPrior parse_fit_prior(const std::string& s) {
  if (s == "iwsc") return FitPrior::iwsc;
  switch (parse_prior_kind(s)) {
    case PriorKind::iw: return FitPrior::iw;
    case PriorKind::siw: return FitPrior::siw;
    case PriorKind::hiw_ht: return FitPrior::hiw_ht;
    case PriorKind::bmm_mu: return FitPrior::bmm_mu;
  }
  throw ConfigError("unknown prior " + s);
}

inline std::vector<FitPrior> parse_fit_priors(const std::string& csv) {
  std::vector<FitPrior> out;
  for (const auto& tok : split_csv_line(csv)) {
    if (!tok.empty()) out.push_back(parse_fit_prior(tok));
  }
  if (out.empty()) throw ConfigError("empty prior list");
  return out;
}

inline const std::vector<FitPrior>& all_fit_priors() {
  static const std::vector<FitPrior> all = {FitPrior::iw, FitPrior::siw, FitPrior::hiw_ht, FitPrior::bmm_mu,
                                            FitPrior::iwsc};
  return all;
}

inline PriorKind base_kind(FitPrior p) {
  switch (p) {
    case FitPrior::iw:
    case FitPrior::iwsc: return PriorKind::iw;
    case FitPrior::siw: return PriorKind::siw;
    case FitPrior::hiw_ht: return PriorKind::hiw_ht;
    case FitPrior::bmm_mu: return PriorKind::bmm_mu;
  }
  return PriorKind::iw;
}

/// Maps every draw of a standardized fit back to data units, Sigma -> F Sigma F
/// with F = diag(scale), and recomputes the summaries. Correlations are unchanged.
inline FitReport unscale_report(FitReport report, const Eigen::VectorXd& scale) {
  for (auto& chain : report.draws.chains) {
    for (auto& dr : chain) {
      Eigen::MatrixXd L = dr.sigma_mat.chol();
      for (Eigen::Index i = 0; i < L.rows(); ++i) L.row(i) *= scale(i);
      dr.sigma_mat = SpdMatrix::from_cholesky(L);
      dr.sigma = dr.sigma.cwiseProduct(scale);
    }
  }
  report.quantities = summarize(report.draws);
  report.max_rhat = 1.0;
  for (const auto& q : report.quantities)
    if (std::isfinite(q.rhat)) report.max_rhat = std::max(report.max_rhat, q.rhat);
  return report;
}

/// NUTS fit of mean-zero data under the posterior-inference hyperparameters.
inline FitReport fit_with_prior(FitPrior prior, const Dataset& data, const ChainConfig& cfg) {
  const PriorSpec spec = default_spec(base_kind(prior), data.d(), SpecMode::posterior_inference);
  if (prior != FitPrior::iwsc) {
    FitReport r = nuts_fit(spec, data, cfg);
    r.prior = to_string(prior);
    return r;
  }
  const auto [standardized, scale] = standardize(data);
  FitReport r = unscale_report(nuts_fit(spec, standardized, cfg), scale);
  r.prior = "iwsc";
  return r;
}

}  // namespace covprior
