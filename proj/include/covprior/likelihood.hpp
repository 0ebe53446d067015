#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "covprior/matrix.hpp"
#include "covprior/rng.hpp"

namespace covprior {

/// Observations stored row-wise (n x d).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
    if (!rows_.allFinite()) throw DomainError("dataset entries must be finite");
  }
  /// No observations; used for prior-only targets.
  static Dataset empty(int d) { return Dataset(Eigen::MatrixXd(0, d)); }

  int n() const { return static_cast<int>(rows_.rows()); }
  int d() const { return static_cast<int>(rows_.cols()); }
  const Eigen::MatrixXd& rows() const { return rows_; }

 private:
  Eigen::MatrixXd rows_;
};

/// S_mu = sum_i (y_i - mu)(y_i - mu)^T with compensated summation.
inline Eigen::MatrixXd suff_stats(const Dataset& data, const Eigen::VectorXd& mu) {
  const int d = data.d();
  if (mu.size() != d) throw DomainError("mu length must equal data dimension");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd r(d);
  for (int k = 0; k < data.n(); ++k) {
    r = data.rows().row(k).transpose() - mu;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j) {
        // Neumaier summation.
        const double x = r(i) * r(j);
        const double t = sum(i, j) + x;
        if (std::abs(sum(i, j)) >= std::abs(x)) {
          comp(i, j) += (sum(i, j) - t) + x;
        } else {
          comp(i, j) += (x - t) + sum(i, j);
        }
        sum(i, j) = t;
      }
    }
  }
  Eigen::MatrixXd s(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      s(i, j) = sum(i, j) + comp(i, j);
      s(j, i) = s(i, j);
    }
  }
  return s;
}

/// Scatter matrix with a square-root factor F (S = F F^T) for evaluating
/// tr(Sigma^{-1} S) through a triangular solve.
struct SufficientStats {
  int n = 0;
  int d = 0;
  Eigen::MatrixXd scatter;
  Eigen::MatrixXd factor;

  static SufficientStats from_scatter(int n, const Eigen::MatrixXd& s) {
    SufficientStats out;
    out.n = n;
    out.d = static_cast<int>(s.rows());
    out.scatter = s;
    if (n == 0 || s.isZero(0.0)) {
      out.factor = Eigen::MatrixXd::Zero(out.d, 0);
      return out;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() == Eigen::Success) {
      out.factor = llt.matrixL();
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
      out.factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    return out;
  }

  static SufficientStats from_data(const Dataset& data, const Eigen::VectorXd& mu) {
    return from_scatter(data.n(), suff_stats(data, mu));
  }
  static SufficientStats from_data(const Dataset& data) {
    return from_data(data, Eigen::VectorXd::Zero(data.d()));
  }
};

/// Multivariate normal log likelihood, fully normalized.
inline double log_likelihood(const SpdMatrix& sigma, const Eigen::MatrixXd& s_mu, int n, int d) {
  if (sigma.dim() != d || s_mu.rows() != d || s_mu.cols() != d) throw DomainError("log_likelihood: dimension mismatch");
  return -0.5 * n * d * std::log(2.0 * std::numbers::pi) - 0.5 * n * sigma.log_det() - 0.5 * sigma.trace_solve(s_mu);
}

/// Same as log_likelihood for Sigma = L L^T, generic over the scalar.
template <class T>
T log_likelihood_chol(const LowerTriangular<T>& L, std::span<const T> log_diag, const SufficientStats& stats) {
  T sum_log_diag(0.0);
  for (const T& x : log_diag) sum_log_diag += x;
  T out = -0.5 * stats.n * stats.d * std::log(2.0 * std::numbers::pi) - static_cast<double>(stats.n) * sum_log_diag;
  if (stats.factor.cols() > 0) out -= 0.5 * detail::solve_sq_norm(L, stats.factor);
  return out;
}

inline Dataset simulate_mvn(int n, const Eigen::VectorXd& mu, const SpdMatrix& sigma, RngStream& rng) {
  const int d = sigma.dim();
  if (n < 0) throw DomainError("n must be non-negative");
  if (mu.size() != d) throw DomainError("mu length must equal dimension");
  Eigen::MatrixXd rows(n, d);
  Eigen::VectorXd z(d);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < d; ++i) z(i) = rng.normal();
    rows.row(k) = (mu + sigma.chol() * z).transpose();
  }
  return Dataset(std::move(rows));
}

inline Dataset rescale(const Dataset& data, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw DomainError("rescale factor must be positive");
  return Dataset(data.rows() * factor);
}

/// Sample standard deviation (n - 1 denominator) of each column.
inline Eigen::VectorXd column_sd(const Eigen::MatrixXd& rows) {
  const auto n = rows.rows();
  Eigen::VectorXd sd(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double mean = rows.col(c).mean();
    sd(c) = n > 1 ? std::sqrt((rows.col(c).array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
  }
  return sd;
}

/// Divides each column by its sample standard deviation. The returned
/// factors undo the scaling: original = standardized * factor.
inline std::pair<Dataset, Eigen::VectorXd> standardize(const Dataset& data) {
  const Eigen::VectorXd sd = column_sd(data.rows());
  for (int c = 0; c < data.d(); ++c) {
    if (!(sd(c) > 0.0)) throw ZeroVariance("column " + std::to_string(c) + " has zero sample variance", c);
  }
  Eigen::MatrixXd rows = data.rows();
  for (int c = 0; c < data.d(); ++c) rows.col(c) /= sd(c);
  return {Dataset(std::move(rows)), sd};
}

/// Centers each column at its sample mean.
inline Dataset center(const Dataset& data) {
  Eigen::MatrixXd rows = data.rows();
  rows.rowwise() -= rows.colwise().mean();
  return Dataset(std::move(rows));
}

// Headerless CSV, one observation per line; '#' lines are comments.
inline Dataset read_dataset_csv(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split_csv_line(t)) row.push_back(parse_double(cell, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged row", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no observations", lineno);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return Dataset(std::move(m));
}

inline void write_dataset_csv(std::ostream& os, const Dataset& data) { write_csv(os, data.rows()); }

}  // namespace covprior
