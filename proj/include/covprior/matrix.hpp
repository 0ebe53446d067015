#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "covprior/autodiff.hpp"
#include "covprior/error.hpp"
#include "covprior/format.hpp"
#include "json.hpp"

namespace covprior {

inline constexpr int packed_size(int d) { return d * (d + 1) / 2; }
inline constexpr int offdiag_size(int d) { return d * (d - 1) / 2; }

/// Lower-triangular matrix packed row by row: (i, j) with j <= i lives at
/// i(i+1)/2 + j. Generic over the scalar so the same code runs on doubles and
/// on dual numbers.
template <class T>
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(int dim) : dim_(dim), data_(static_cast<std::size_t>(packed_size(dim)), T(0.0)) {}

  int dim() const { return dim_; }
  T& operator()(int i, int j) { return data_[static_cast<std::size_t>(i * (i + 1) / 2 + j)]; }
  const T& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * (i + 1) / 2 + j)]; }

 private:
  int dim_ = 0;
  std::vector<T> data_;
};

namespace detail {

/// L^{-1} B for lower-triangular L and B; the result is lower-triangular.
template <class T, class U>
LowerTriangular<T> solve_lower(const LowerTriangular<T>& L, const LowerTriangular<U>& B) {
  const int d = L.dim();
  LowerTriangular<T> X(d);
  for (int c = 0; c < d; ++c) {
    for (int i = c; i < d; ++i) {
      T acc = T(B(i, c));
      for (int k = c; k < i; ++k) sub_product(acc, L(i, k), X(k, c));
      X(i, c) = acc / L(i, i);
    }
  }
  return X;
}

template <class T>
LowerTriangular<T> invert_lower(const LowerTriangular<T>& L) {
  LowerTriangular<double> eye(L.dim());
  for (int i = 0; i < L.dim(); ++i) eye(i, i) = 1.0;
  return solve_lower(L, eye);
}

/// Squared Frobenius norm of L^{-1} F for a d x r matrix F. Leading zero
/// rows of each column of F are skipped, so a triangular F costs a third.
template <class T>
T solve_sq_norm(const LowerTriangular<T>& L, const Eigen::MatrixXd& F) {
  const int d = L.dim();
  T total(0.0);
  std::vector<T> x(static_cast<std::size_t>(d));
  for (Eigen::Index c = 0; c < F.cols(); ++c) {
    int first = 0;
    while (first < d && F(first, c) == 0.0) ++first;
    for (int i = first; i < d; ++i) {
      T acc = T(F(i, c));
      for (int k = first; k < i; ++k) sub_product(acc, L(i, k), x[k]);
      x[i] = acc / L(i, i);
      add_square(total, x[i]);
    }
  }
  return total;
}

/// log(1 - tanh(v)^2), stable for large |v|.
template <class T>
T log1m_tanh_sq(const T& v) {
  using std::abs;
  using std::exp;
  using std::log1p;
  const T a = abs(v);
  return 2.0 * std::log(2.0) - 2.0 * a - 2.0 * log1p(exp(-2.0 * a));
}

}  // namespace detail

/// Cholesky factor of a symmetric matrix. Inputs within 1e-10 relative
/// asymmetry are symmetrized by averaging; larger asymmetry is a DomainError.
inline Eigen::MatrixXd cholesky(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("cholesky: matrix must be square and non-empty");
  const Eigen::Index d = m.rows();
  const double scale = m.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale) throw DomainError("cholesky: matrix is not symmetric");
    }
  }
  if (!m.allFinite()) throw NotPositiveDefinite("cholesky: non-finite entry");
  const Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite("cholesky: non-positive pivot at index " + std::to_string(j));
    }
    L(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      double acc = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) acc -= L(i, k) * L(j, k);
      L(i, j) = acc / L(j, j);
    }
  }
  return L;
}

/// Symmetric positive-definite matrix held by its lower Cholesky factor.
class SpdMatrix {
 public:
  SpdMatrix() = default;

  static SpdMatrix from_matrix(const Eigen::MatrixXd& m) { return SpdMatrix(cholesky(m)); }

  /// Takes ownership of a lower factor; strict upper entries are ignored.
  static SpdMatrix from_cholesky(const Eigen::MatrixXd& lower) {
    if (lower.rows() != lower.cols() || lower.rows() == 0) throw DomainError("factor must be square");
    Eigen::MatrixXd L = lower.triangularView<Eigen::Lower>();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) {
        throw NotPositiveDefinite("factor diagonal must be positive and finite");
      }
    }
    if (!L.allFinite()) throw NotPositiveDefinite("factor has non-finite entries");
    return SpdMatrix(std::move(L));
  }

  static SpdMatrix identity(int d) { return SpdMatrix(Eigen::MatrixXd::Identity(d, d)); }

  int dim() const { return static_cast<int>(chol_.rows()); }
  const Eigen::MatrixXd& chol() const { return chol_; }
  Eigen::MatrixXd matrix() const { return chol_ * chol_.transpose(); }
  double operator()(int i, int j) const { return chol_.row(i).head(std::min(i, j) + 1).dot(chol_.row(j).head(std::min(i, j) + 1)); }
  double log_det() const { return 2.0 * chol_.diagonal().array().log().sum(); }

  Eigen::MatrixXd inverse() const {
    const Eigen::MatrixXd linv =
        chol_.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dim(), dim()));
    return linv.transpose() * linv;
  }

  /// tr(A * this^{-1}) for symmetric A.
  double trace_solve(const Eigen::MatrixXd& a) const {
    const Eigen::MatrixXd x = chol_.triangularView<Eigen::Lower>().solve(a);
    const Eigen::MatrixXd y = chol_.triangularView<Eigen::Lower>().solve(x.transpose());
    return y.trace();
  }

  LowerTriangular<double> packed_chol() const {
    LowerTriangular<double> out(dim());
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j <= i; ++j) out(i, j) = chol_(i, j);
    return out;
  }

 private:
  explicit SpdMatrix(Eigen::MatrixXd L) : chol_(std::move(L)) {}
  Eigen::MatrixXd chol_;
};

/// Correlation matrix: unit diagonal, symmetric, positive definite.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;

  static CorrelationMatrix identity(int d) {
    return CorrelationMatrix(Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d));
  }

  static CorrelationMatrix from_matrix(const Eigen::MatrixXd& r) {
    if (r.rows() != r.cols() || r.rows() == 0) throw DomainError("correlation matrix must be square");
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      if (std::abs(r(i, i) - 1.0) > 1e-10) throw DomainError("correlation matrix diagonal must be 1");
    }
    Eigen::MatrixXd sym = 0.5 * (r + r.transpose());
    sym.diagonal().setOnes();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        if (std::abs(r(i, j) - r(j, i)) > 1e-10) throw DomainError("correlation matrix must be symmetric");
        if (!(std::abs(sym(i, j)) < 1.0)) throw DomainError("correlation outside (-1, 1)");
      }
    }
    Eigen::MatrixXd L = cholesky(sym);
    return CorrelationMatrix(std::move(sym), std::move(L));
  }

  /// Builds R = L L^T from a lower factor with unit-norm rows.
  static CorrelationMatrix from_cholesky(const Eigen::MatrixXd& lower) {
    const Eigen::MatrixXd L = lower.triangularView<Eigen::Lower>();
    Eigen::MatrixXd r = L * L.transpose();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      r(i, i) = 1.0;
      for (Eigen::Index j = 0; j < i; ++j) r(j, i) = r(i, j);
    }
    return CorrelationMatrix(std::move(r), L);
  }

  int dim() const { return static_cast<int>(r_.rows()); }
  const Eigen::MatrixXd& matrix() const { return r_; }
  const Eigen::MatrixXd& chol() const { return chol_; }
  double operator()(int i, int j) const { return r_(i, j); }

  /// Off-diagonal entries in row-major upper order (1,2), (1,3), ..., (d-1,d).
  std::vector<double> upper_entries() const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(offdiag_size(dim())));
    for (int i = 0; i < dim(); ++i)
      for (int j = i + 1; j < dim(); ++j) out.push_back(r_(i, j));
    return out;
  }

 private:
  CorrelationMatrix(Eigen::MatrixXd r, Eigen::MatrixXd L) : r_(std::move(r)), chol_(std::move(L)) {}
  Eigen::MatrixXd r_;
  Eigen::MatrixXd chol_;
};

/// Covariance split into standard deviations and correlations.
struct CovDecomposition {
  Eigen::VectorXd sigma;
  CorrelationMatrix corr;
};

inline CovDecomposition decompose(const SpdMatrix& s) {
  const int d = s.dim();
  const Eigen::MatrixXd& L = s.chol();
  Eigen::VectorXd sigma(d);
  for (int i = 0; i < d; ++i) sigma(i) = L.row(i).head(i + 1).norm();
  // The factor of R is the row-normalized factor of Sigma.
  Eigen::MatrixXd lr = L;
  for (int i = 0; i < d; ++i) lr.row(i) /= sigma(i);
  return {sigma, CorrelationMatrix::from_cholesky(lr)};
}

inline SpdMatrix compose(const CovDecomposition& dec) {
  const int d = dec.corr.dim();
  if (dec.sigma.size() != d) throw DomainError("compose: sigma length differs from correlation dimension");
  for (int i = 0; i < d; ++i) {
    if (!(dec.sigma(i) > 0.0) || !std::isfinite(dec.sigma(i))) throw DomainError("compose: sigma must be positive");
  }
  Eigen::MatrixXd L = dec.corr.chol();
  for (int i = 0; i < d; ++i) L.row(i) *= dec.sigma(i);
  return SpdMatrix::from_cholesky(L);
}

// ---------------------------------------------------------------------------
// Unconstrained parameterizations.

/// Lower factor from its unconstrained vector: row-wise fill, log diagonal.
/// Adds to `log_jac` the log |det| of v -> lower-triangle entries of L L^T.
template <class T>
LowerTriangular<T> spd_factor_from_unconstrained(std::span<const T> v, int d, T& log_jac) {
  using std::exp;
  if (static_cast<int>(v.size()) != packed_size(d)) throw LayoutMismatch("spd vector length must be d(d+1)/2");
  LowerTriangular<T> L(d);
  std::size_t pos = 0;
  log_jac += d * std::log(2.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = v[pos++];
    const T& logdiag = v[pos++];
    L(i, i) = exp(logdiag);
    log_jac += static_cast<double>(d - i + 1) * logdiag;
  }
  return L;
}

/// Cholesky factor of a correlation matrix from unconstrained values: each
/// entry maps through tanh to a canonical partial correlation and rows are
/// filled so they have unit norm. Adds the log |det| of v -> off-diagonal
/// entries of R to `log_jac`. `log_diag`, when given, receives log L_ii.
template <class T>
LowerTriangular<T> corr_factor_from_unconstrained(std::span<const T> v, int d, T& log_jac,
                                                  std::vector<T>* log_diag = nullptr) {
  using std::exp;
  using std::tanh;
  if (static_cast<int>(v.size()) != offdiag_size(d)) throw LayoutMismatch("correlation vector length must be d(d-1)/2");
  LowerTriangular<T> L(d);
  if (log_diag) log_diag->assign(static_cast<std::size_t>(d), T(0.0));
  std::size_t pos = 0;
  L(0, 0) = T(1.0);
  for (int i = 1; i < d; ++i) {
    T log_remaining(0.0);  // log of 1 - sum_{k<j} L_ik^2
    for (int j = 0; j < i; ++j) {
      const T& x = v[pos++];
      const T l1m = detail::log1m_tanh_sq(x);
      L(i, j) = tanh(x) * exp(0.5 * log_remaining);
      log_jac += (1.0 + 0.5 * (d - j - 2)) * l1m;
      log_remaining += l1m;
    }
    L(i, i) = exp(0.5 * log_remaining);
    if (log_diag) (*log_diag)[static_cast<std::size_t>(i)] = 0.5 * log_remaining;
  }
  return L;
}

namespace detail {
inline Eigen::MatrixXd to_dense(const LowerTriangular<double>& L) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L.dim(), L.dim());
  for (int i = 0; i < L.dim(); ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = L(i, j);
  return m;
}
}  // namespace detail

inline std::pair<SpdMatrix, double> spd_constrain(std::span<const double> v, int d) {
  double lj = 0.0;
  const auto L = spd_factor_from_unconstrained(v, d, lj);
  return {SpdMatrix::from_cholesky(detail::to_dense(L)), lj};
}

inline std::vector<double> spd_unconstrain(const SpdMatrix& s) {
  const int d = s.dim();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(packed_size(d)));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) v.push_back(s.chol()(i, j));
    v.push_back(std::log(s.chol()(i, i)));
  }
  return v;
}

inline std::pair<CorrelationMatrix, double> corr_constrain(std::span<const double> v, int d) {
  double lj = 0.0;
  const auto L = corr_factor_from_unconstrained(v, d, lj);
  return {CorrelationMatrix::from_cholesky(detail::to_dense(L)), lj};
}

inline std::vector<double> corr_unconstrain(const CorrelationMatrix& r) {
  const int d = r.dim();
  const Eigen::MatrixXd& L = r.chol();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(offdiag_size(d)));
  for (int i = 1; i < d; ++i) {
    // Squared norm of the row from column j on, summed from the diagonal
    // backwards: all terms are positive, so no cancellation when partial
    // correlations are near +-1.
    std::vector<double> tail(static_cast<std::size_t>(i + 1));
    tail[static_cast<std::size_t>(i)] = L(i, i) * L(i, i);
    for (int j = i - 1; j >= 0; --j) tail[static_cast<std::size_t>(j)] = tail[static_cast<std::size_t>(j + 1)] + L(i, j) * L(i, j);
    for (int j = 0; j < i; ++j) {
      const double z = L(i, j) / std::sqrt(tail[static_cast<std::size_t>(j)]);
      v.push_back(std::atanh(std::clamp(z, -1.0 + 1e-16, 1.0 - 1e-16)));
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Serialization.

/// Row-major CSV block, one matrix row per line.
inline void write_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << format_double(m(i, j));
    }
    os << '\n';
  }
}

/// Reads a square row-major CSV block; stops at the first blank line.
inline Eigen::MatrixXd read_csv_matrix(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) {
      if (rows.empty()) continue;
      break;
    }
    if (t.front() == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split_csv_line(t)) row.push_back(parse_double(cell, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged matrix row", lineno);
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.size() != rows.front().size()) throw ParseError("matrix block must be square", lineno);
  const auto d = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[i][j];
  return m;
}

inline nlohmann::json to_json(const SpdMatrix& s) {
  nlohmann::json lower = nlohmann::json::array();
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j <= i; ++j) lower.push_back(s.chol()(i, j));
  return {{"dim", s.dim()}, {"lower_chol", lower}};
}

/// Accepts {dim, lower_chol: packed row-wise factor} or a nested row-major
/// array of the matrix itself.
inline SpdMatrix spd_from_json(const nlohmann::json& j) {
  if (j.is_array()) {
    const auto d = static_cast<Eigen::Index>(j.size());
    Eigen::MatrixXd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != d) throw ConfigError("matrix rows must be length d");
      for (Eigen::Index c = 0; c < d; ++c) m(r, c) = j[r][c].get<double>();
    }
    return SpdMatrix::from_matrix(m);
  }
  const int d = j.at("dim").get<int>();
  const auto& lower = j.at("lower_chol");
  if (d < 1 || static_cast<int>(lower.size()) != packed_size(d)) throw ConfigError("lower_chol must hold d(d+1)/2 entries");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  std::size_t pos = 0;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c <= r; ++c) L(r, c) = lower[pos++].get<double>();
  return SpdMatrix::from_cholesky(L);
}

}  // namespace covprior
