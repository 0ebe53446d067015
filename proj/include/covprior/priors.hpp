#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "covprior/distributions.hpp"
#include "covprior/error.hpp"
#include "covprior/matrix.hpp"
#include "covprior/rng.hpp"
#include "json.hpp"

namespace covprior {

enum class PriorKind { iw, siw, hiw_ht, bmm_mu };

/// Which column of the hyperparameter table to use.
enum class SpecMode { prior_study, posterior_inference };

inline std::string to_string(PriorKind k) {
  switch (k) {
    case PriorKind::iw: return "iw";
    case PriorKind::siw: return "siw";
    case PriorKind::hiw_ht: return "hiw";
    case PriorKind::bmm_mu: return "bmm";
  }
  return "?";
}

inline PriorKind parse_prior_kind(const std::string& s) {
  if (s == "iw") return PriorKind::iw;
  if (s == "siw") return PriorKind::siw;
  if (s == "hiw" || s == "hiwht" || s == "hiw_ht") return PriorKind::hiw_ht;
  if (s == "bmm" || s == "bmmmu" || s == "bmm_mu") return PriorKind::bmm_mu;
  throw ConfigError("unknown prior kind '" + s + "'");
}

// Sigma ~ IW(nu, lambda).
struct IwParams {
  double nu;
  SpdMatrix lambda;
};

// Sigma = Delta Q Delta, Q ~ IW(nu, lambda), log delta_i ~ N(b_i, xi_i^2).
struct SiwParams {
  double nu;
  SpdMatrix lambda;
  Eigen::VectorXd b;
  Eigen::VectorXd xi;
};

// Sigma ~ IW(nu + d - 1, 2 nu diag(lambda)), lambda_i ~ Ga(1/2, rate 1/xi_i^2).
struct HiwParams {
  double nu;
  Eigen::VectorXd xi;
  // Cholesky factor of 2 nu I, the scale of the standardized block.
  LowerTriangular<double> z_scale_chol;
};

// Sigma = diag(sigma) R diag(sigma), R from a normalized IW(nu, I) draw,
// log sigma_i ~ N(b_i, xi_i^2).
struct BmmParams {
  double nu;
  Eigen::VectorXd b;
  Eigen::VectorXd xi;
};

/// One of the four covariance priors with its hyperparameters. Construct
/// through the named factories, which enforce the invariants.
class PriorSpec {
 public:
  using Params = std::variant<IwParams, SiwParams, HiwParams, BmmParams>;

  static PriorSpec iw(double nu, SpdMatrix lambda) {
    const int d = lambda.dim();
    check_dof(nu, d);
    return PriorSpec(d, IwParams{nu, std::move(lambda)});
  }
  static PriorSpec siw(double nu, SpdMatrix lambda, Eigen::VectorXd b, Eigen::VectorXd xi) {
    const int d = lambda.dim();
    check_dof(nu, d);
    check_vectors(d, b, xi);
    return PriorSpec(d, SiwParams{nu, std::move(lambda), std::move(b), std::move(xi)});
  }
  static PriorSpec hiw_ht(double nu, Eigen::VectorXd xi) {
    const int d = static_cast<int>(xi.size());
    if (!(nu > 0.0)) throw InvalidDegreesOfFreedom("half-t degrees of freedom must be positive");
    check_vectors(d, Eigen::VectorXd::Zero(d), xi);
    LowerTriangular<double> z_scale(d);
    for (int i = 0; i < d; ++i) z_scale(i, i) = std::sqrt(2.0 * nu);
    return PriorSpec(d, HiwParams{nu, std::move(xi), std::move(z_scale)});
  }
  static PriorSpec bmm_mu(double nu, Eigen::VectorXd b, Eigen::VectorXd xi) {
    const int d = static_cast<int>(b.size());
    check_dof(nu, d);
    check_vectors(d, b, xi);
    return PriorSpec(d, BmmParams{nu, std::move(b), std::move(xi)});
  }

  int dim() const { return dim_; }
  PriorKind kind() const { return static_cast<PriorKind>(params_.index()); }
  const Params& params() const { return params_; }
  double nu() const {
    return std::visit([](const auto& p) { return p.nu; }, params_);
  }

 private:
  PriorSpec(int d, Params p) : dim_(d), params_(std::move(p)) {}

  static void check_dof(double nu, int d) {
    if (d < 1) throw DomainError("prior dimension must be positive");
    if (!(nu > d - 1)) throw InvalidDegreesOfFreedom("nu must exceed d - 1");
  }
  static void check_vectors(int d, const Eigen::VectorXd& b, const Eigen::VectorXd& xi) {
    if (d < 1) throw DomainError("prior dimension must be positive");
    if (b.size() != d || xi.size() != d) throw DomainError("b and xi must have length d");
    for (int i = 0; i < d; ++i) {
      if (!(xi(i) > 0.0) || !std::isfinite(xi(i))) throw DomainError("xi entries must be positive");
      if (!std::isfinite(b(i))) throw DomainError("b entries must be finite");
    }
  }

  int dim_ = 0;
  Params params_;
};

/// Hyperparameters used for prior sampling and for posterior inference.
inline PriorSpec default_spec(PriorKind kind, int d, SpecMode mode) {
  if (d < 2) throw DomainError("default specs need d >= 2");
  const bool study = mode == SpecMode::prior_study;
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(d);
  switch (kind) {
    case PriorKind::iw:
      return PriorSpec::iw(d + 1.0, SpdMatrix::identity(d));
    case PriorKind::siw: {
      const Eigen::MatrixXd lambda = (study ? 0.8 : 1.0) * Eigen::MatrixXd::Identity(d, d);
      return PriorSpec::siw(d + 1.0, SpdMatrix::from_matrix(lambda), Eigen::VectorXd::Zero(d),
                            (study ? 1.0 : 100.0) * ones);
    }
    case PriorKind::hiw_ht:
      return PriorSpec::hiw_ht(2.0, (study ? 1.04 : std::sqrt(1000.0)) * ones);
    case PriorKind::bmm_mu:
      return PriorSpec::bmm_mu(d + 1.0, (study ? std::log(0.72) / 2.0 : 0.0) * ones, (study ? 1.0 : 100.0) * ones);
  }
  throw DomainError("unknown prior kind");
}

// ---------------------------------------------------------------------------
// Direct sampling.

inline std::pair<SpdMatrix, CovDecomposition> prior_sample(const PriorSpec& spec, RngStream& rng) {
  const int d = spec.dim();
  SpdMatrix sigma = std::visit(
      [&](const auto& p) -> SpdMatrix {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IwParams>) {
          return sample_inverse_wishart(p.nu, p.lambda, rng);
        } else if constexpr (std::is_same_v<P, SiwParams>) {
          const SpdMatrix q = sample_inverse_wishart(p.nu, p.lambda, rng);
          Eigen::MatrixXd L = q.chol();
          for (int i = 0; i < d; ++i) L.row(i) *= sample_lognormal(p.b(i), p.xi(i), rng);
          return SpdMatrix::from_cholesky(L);
        } else if constexpr (std::is_same_v<P, HiwParams>) {
          Eigen::VectorXd scale(d);
          for (int i = 0; i < d; ++i) {
            scale(i) = 2.0 * p.nu * sample_gamma(0.5, 1.0 / (p.xi(i) * p.xi(i)), rng);
          }
          const Eigen::MatrixXd chol = scale.cwiseSqrt().asDiagonal();
          return sample_inverse_wishart(p.nu + d - 1.0, SpdMatrix::from_cholesky(chol), rng);
        } else {
          const SpdMatrix q = sample_inverse_wishart(p.nu, SpdMatrix::identity(d), rng);
          CovDecomposition dec = decompose(q);
          for (int i = 0; i < d; ++i) dec.sigma(i) = sample_lognormal(p.b(i), p.xi(i), rng);
          return compose(dec);
        }
      },
      spec.params());
  CovDecomposition dec = decompose(sigma);
  return {std::move(sigma), std::move(dec)};
}

// ---------------------------------------------------------------------------
// Unconstrained parameterization.

/// Length of the unconstrained vector for a prior of dimension d.
inline int param_length(PriorKind kind, int d) {
  switch (kind) {
    case PriorKind::iw: return packed_size(d);
    case PriorKind::siw:
    case PriorKind::hiw_ht: return packed_size(d) + d;
    case PriorKind::bmm_mu: return d + offdiag_size(d);
  }
  return 0;
}

/// Unconstrained coordinates of one prior's latent quantities.
///   iw:  packed Cholesky of Sigma with log diagonal
///   siw: same for Q, then log delta
///   hiw: same for Z = D^{-1} Sigma D^{-1}, D = diag(sqrt(lambda)), then log lambda
///   bmm: log sigma, then canonical-partial-correlation coordinates of R
struct ParamVector {
  PriorKind kind;
  int dim;
  std::vector<double> values;
};

template <class T>
struct PriorTerms {
  LowerTriangular<T> sigma_chol;
  std::vector<T> sigma_log_diag;  // log of sigma_chol's diagonal
  T log_prior;
};

namespace detail {

template <class T>
T normal_logpdf(const T& x, double mean, double sd) {
  const T z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// log IW(Sigma; nu, C C^T) for Sigma = L L^T, given log L_ii.
template <class T>
T iw_logpdf_chol(const LowerTriangular<T>& L, std::span<const T> log_diag, double nu,
                 const LowerTriangular<double>& scale_chol) {
  const int d = L.dim();
  double log_det_scale = 0.0;
  for (int i = 0; i < d; ++i) log_det_scale += 2.0 * std::log(scale_chol(i, i));
  T sum_log_diag(0.0);
  for (const T& x : log_diag) sum_log_diag += x;
  const LowerTriangular<T> X = solve_lower(L, scale_chol);
  T trace(0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j <= i; ++j) add_square(trace, X(i, j));
  return -(nu + d + 1.0) * sum_log_diag - 0.5 * trace + 0.5 * nu * log_det_scale -
         0.5 * nu * d * std::numbers::ln2 - log_multigamma(0.5 * nu, d);
}

// Diagonal of (L L^T)^{-1}.
template <class T>
std::vector<T> inverse_diagonal(const LowerTriangular<T>& L) {
  const int d = L.dim();
  const LowerTriangular<T> linv = invert_lower(L);
  std::vector<T> out(static_cast<std::size_t>(d), T(0.0));
  for (int i = 0; i < d; ++i)
    for (int k = i; k < d; ++k) add_square(out[i], linv(k, i));
  return out;
}

template <class T>
std::vector<T> packed_log_diag(std::span<const T> v, int d) {
  std::vector<T> out(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) out[i] = v[static_cast<std::size_t>(i * (i + 1) / 2 + i)];
  return out;
}

template <class T>
bool degenerate(const LowerTriangular<T>& L) {
  for (int i = 0; i < L.dim(); ++i) {
    const double x = value_of(L(i, i));
    if (!(x > 0.0) || !std::isfinite(x)) return true;
  }
  return false;
}

}  // namespace detail

/// Log prior in unconstrained coordinates (density of the constrained
/// quantities plus the log-Jacobians of every constraining map), together
/// with the Cholesky factor of the implied covariance.
template <class T>
PriorTerms<T> evaluate_prior(const PriorSpec& spec, std::span<const T> p) {
  using std::exp;
  const int d = spec.dim();
  if (static_cast<int>(p.size()) != param_length(spec.kind(), d)) {
    throw LayoutMismatch("parameter vector length " + std::to_string(p.size()) + " does not match prior " +
                         to_string(spec.kind()) + " at d = " + std::to_string(d));
  }
  const auto vech = p.subspan(0, static_cast<std::size_t>(packed_size(d)));
  PriorTerms<T> out;
  out.log_prior = T(0.0);
  const double neg_inf = -std::numeric_limits<double>::infinity();

  std::visit(
      [&](const auto& hp) {
        using P = std::decay_t<decltype(hp)>;
        if constexpr (std::is_same_v<P, IwParams>) {
          out.sigma_chol = spd_factor_from_unconstrained(vech, d, out.log_prior);
          out.sigma_log_diag = detail::packed_log_diag(vech, d);
          if (detail::degenerate(out.sigma_chol)) {
            out.log_prior = T(neg_inf);
            return;
          }
          out.log_prior += detail::iw_logpdf_chol<T>(out.sigma_chol, out.sigma_log_diag, hp.nu, hp.lambda.packed_chol());
        } else if constexpr (std::is_same_v<P, SiwParams>) {
          LowerTriangular<T> q = spd_factor_from_unconstrained(vech, d, out.log_prior);
          const std::vector<T> q_log_diag = detail::packed_log_diag(vech, d);
          const auto log_delta = p.subspan(static_cast<std::size_t>(packed_size(d)));
          out.sigma_log_diag = q_log_diag;
          out.sigma_chol = q;
          for (int i = 0; i < d; ++i) {
            const T delta = exp(log_delta[i]);
            for (int j = 0; j <= i; ++j) out.sigma_chol(i, j) *= delta;
            out.sigma_log_diag[i] += log_delta[i];
            out.log_prior += detail::normal_logpdf(log_delta[i], hp.b(i), hp.xi(i));
          }
          if (detail::degenerate(q) || detail::degenerate(out.sigma_chol)) {
            out.log_prior = T(neg_inf);
            return;
          }
          out.log_prior += detail::iw_logpdf_chol<T>(q, q_log_diag, hp.nu, hp.lambda.packed_chol());
        } else if constexpr (std::is_same_v<P, HiwParams>) {
          // Non-centered: Sigma = D Z D with D = diag(sqrt(lambda)) and
          // Z ~ IW(nu + d - 1, 2 nu I), which is IW(nu + d - 1, 2 nu diag(lambda)).
          LowerTriangular<T> z = spd_factor_from_unconstrained(vech, d, out.log_prior);
          const std::vector<T> z_log_diag = detail::packed_log_diag(vech, d);
          const auto log_lambda = p.subspan(static_cast<std::size_t>(packed_size(d)));
          out.sigma_chol = z;
          out.sigma_log_diag = z_log_diag;
          for (int i = 0; i < d; ++i) {
            const T half_log = 0.5 * log_lambda[i];
            const T root = exp(half_log);
            for (int j = 0; j <= i; ++j) out.sigma_chol(i, j) *= root;
            out.sigma_log_diag[i] += half_log;
            const T lambda = root * root;
            const double rate = 1.0 / (hp.xi(i) * hp.xi(i));
            // Ga(1/2, rate) on lambda plus the log-lambda Jacobian.
            out.log_prior += 0.5 * std::log(rate) - std::lgamma(0.5) + 0.5 * log_lambda[i] - rate * lambda;
          }
          if (detail::degenerate(z) || detail::degenerate(out.sigma_chol)) {
            out.log_prior = T(neg_inf);
            return;
          }
          out.log_prior += detail::iw_logpdf_chol<T>(z, z_log_diag, hp.nu + d - 1.0, hp.z_scale_chol);
        } else {
          const auto log_sigma = p.subspan(0, static_cast<std::size_t>(d));
          const auto cpc = p.subspan(static_cast<std::size_t>(d));
          std::vector<T> r_log_diag;
          const LowerTriangular<T> lr = corr_factor_from_unconstrained(cpc, d, out.log_prior, &r_log_diag);
          out.sigma_chol = LowerTriangular<T>(d);
          out.sigma_log_diag.resize(static_cast<std::size_t>(d));
          T sum_log_diag_r(0.0);
          for (int i = 0; i < d; ++i) {
            const T s = exp(log_sigma[i]);
            for (int j = 0; j <= i; ++j) out.sigma_chol(i, j) = s * lr(i, j);
            out.sigma_log_diag[i] = log_sigma[i] + r_log_diag[i];
            sum_log_diag_r += r_log_diag[i];
            out.log_prior += detail::normal_logpdf(log_sigma[i], hp.b(i), hp.xi(i));
          }
          if (detail::degenerate(out.sigma_chol) || detail::degenerate(lr)) {
            out.log_prior = T(neg_inf);
            return;
          }
          using std::log;
          // p(R) up to a constant: |R|^{-(nu+d+1)/2} prod_i (r^{ii})^{-nu/2}.
          const std::vector<T> inv_diag = detail::inverse_diagonal(lr);
          T lp = -(hp.nu + d + 1.0) * sum_log_diag_r;
          for (int i = 0; i < d; ++i) lp -= 0.5 * hp.nu * log(inv_diag[i]);
          out.log_prior += lp;
        }
      },
      spec.params());
  return out;
}

inline double logprior_unconstrained(const PriorSpec& spec, const ParamVector& p) {
  if (p.kind != spec.kind() || p.dim != spec.dim()) throw LayoutMismatch("parameter vector belongs to another prior");
  return evaluate_prior<double>(spec, std::span<const double>(p.values)).log_prior;
}

inline std::pair<SpdMatrix, CovDecomposition> params_to_cov(const PriorSpec& spec, const ParamVector& p) {
  if (p.kind != spec.kind() || p.dim != spec.dim()) throw LayoutMismatch("parameter vector belongs to another prior");
  const auto terms = evaluate_prior<double>(spec, std::span<const double>(p.values));
  SpdMatrix sigma = SpdMatrix::from_cholesky(detail::to_dense(terms.sigma_chol));
  CovDecomposition dec = decompose(sigma);
  return {std::move(sigma), std::move(dec)};
}

/// Unconstrained coordinates reproducing a given covariance. The auxiliary
/// coordinates (delta for siw, lambda for hiw) are set to `aux`.
inline ParamVector cov_to_params(const PriorSpec& spec, const SpdMatrix& sigma, double aux = 0.0) {
  const int d = spec.dim();
  ParamVector out{spec.kind(), d, {}};
  switch (spec.kind()) {
    case PriorKind::iw:
      out.values = spd_unconstrain(sigma);
      break;
    case PriorKind::siw: {
      Eigen::MatrixXd L = sigma.chol();
      for (int i = 0; i < d; ++i) L.row(i) /= std::exp(aux);
      out.values = spd_unconstrain(SpdMatrix::from_cholesky(L));
      out.values.insert(out.values.end(), static_cast<std::size_t>(d), aux);
      break;
    }
    case PriorKind::hiw_ht: {
      Eigen::MatrixXd L = sigma.chol();
      for (int i = 0; i < d; ++i) L.row(i) /= std::exp(0.5 * aux);
      out.values = spd_unconstrain(SpdMatrix::from_cholesky(L));
      out.values.insert(out.values.end(), static_cast<std::size_t>(d), aux);
      break;
    }
    case PriorKind::bmm_mu: {
      const CovDecomposition dec = decompose(sigma);
      for (int i = 0; i < d; ++i) out.values.push_back(std::log(dec.sigma(i)));
      const auto v = corr_unconstrain(dec.corr);
      out.values.insert(out.values.end(), v.begin(), v.end());
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON: {kind, dim, nu, lambda, b, xi}.

inline nlohmann::json to_json(const PriorSpec& spec) {
  nlohmann::json j;
  j["kind"] = to_string(spec.kind());
  j["dim"] = spec.dim();
  j["nu"] = spec.nu();
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IwParams>) {
          j["lambda"] = to_json(p.lambda);
        } else if constexpr (std::is_same_v<P, SiwParams>) {
          j["lambda"] = to_json(p.lambda);
          j["b"] = vec(p.b);
          j["xi"] = vec(p.xi);
        } else if constexpr (std::is_same_v<P, HiwParams>) {
          j["xi"] = vec(p.xi);
        } else {
          j["b"] = vec(p.b);
          j["xi"] = vec(p.xi);
        }
      },
      spec.params());
  return j;
}

/// Parses a prior object. Missing fields fall back to the posterior-inference
/// defaults for that kind and dimension; scalars broadcast over vectors;
/// `lambda` may be a scalar multiple of the identity, a row-major matrix, or
/// a {dim, lower_chol} object. Unknown keys are rejected.
inline PriorSpec prior_from_json(const nlohmann::json& j, int default_dim = 2) {
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "dim" && key != "nu" && key != "lambda" && key != "b" && key != "xi") {
      throw ConfigError("unknown prior key '" + key + "'");
    }
  }
  const PriorKind kind = parse_prior_kind(j.at("kind").get<std::string>());
  const int d = j.value("dim", default_dim);
  const PriorSpec base = default_spec(kind, d, SpecMode::posterior_inference);
  const double nu = j.value("nu", base.nu());
  auto read_vec = [&](const char* key, const Eigen::VectorXd& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number()) return Eigen::VectorXd(Eigen::VectorXd::Constant(d, v.get<double>()));
    const auto xs = v.get<std::vector<double>>();
    if (static_cast<int>(xs.size()) != d) throw ConfigError(std::string(key) + " must have length dim");
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(xs.data(), d));
  };
  auto read_lambda = [&]() {
    if (!j.contains("lambda")) return SpdMatrix::identity(d);
    const auto& v = j.at("lambda");
    if (v.is_number()) return SpdMatrix::from_matrix(v.get<double>() * Eigen::MatrixXd::Identity(d, d));
    SpdMatrix m = spd_from_json(v);
    if (m.dim() != d) throw ConfigError("lambda dimension differs from dim");
    return m;
  };
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(d);
  switch (kind) {
    case PriorKind::iw: return PriorSpec::iw(nu, read_lambda());
    case PriorKind::siw:
      return PriorSpec::siw(nu, read_lambda(), read_vec("b", zeros), read_vec("xi", Eigen::VectorXd::Constant(d, 100.0)));
    case PriorKind::hiw_ht: return PriorSpec::hiw_ht(nu, read_vec("xi", Eigen::VectorXd::Constant(d, std::sqrt(1000.0))));
    case PriorKind::bmm_mu:
      return PriorSpec::bmm_mu(nu, read_vec("b", zeros), read_vec("xi", Eigen::VectorXd::Constant(d, 100.0)));
  }
  throw ConfigError("unknown prior kind");
}

}  // namespace covprior
