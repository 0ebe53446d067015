#pragma once

#include <array>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "covprior/error.hpp"

namespace covprior {

/// Forward-mode dual number carrying N directional partials.
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static Dual variable(double value, std::size_t slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t k = 0; k < N; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t k = 0; k < N; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t k = 0; k < N; ++k) d[k] = d[k] * o.v + v * o.d[k];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t k = 0; k < N; ++k) d[k] = (d[k] - q * o.d[k]) * inv;
    v = q;
    return *this;
  }
  Dual& operator+=(double c) {
    v += c;
    return *this;
  }
  Dual& operator-=(double c) {
    v -= c;
    return *this;
  }
  Dual& operator*=(double c) {
    v *= c;
    for (auto& x : d) x *= c;
    return *this;
  }
  Dual& operator/=(double c) { return *this *= (1.0 / c); }
};

template <class T>
struct is_dual : std::false_type {};
template <std::size_t N>
struct is_dual<Dual<N>> : std::true_type {};

/// Primal value of a plain or dual scalar.
inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) {
  return x.v;
}

namespace detail {
// Applies f(x) with derivative f'(x) = slope.
template <std::size_t N>
Dual<N> chain(const Dual<N>& x, double fx, double slope) {
  Dual<N> r(fx);
  for (std::size_t k = 0; k < N; ++k) r.d[k] = slope * x.d[k];
  return r;
}
}  // namespace detail

template <std::size_t N>
Dual<N> operator-(Dual<N> x) {
  x *= -1.0;
  return x;
}
template <std::size_t N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) {
  return a += b;
}
template <std::size_t N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) {
  return a -= b;
}
template <std::size_t N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) {
  return a *= b;
}
template <std::size_t N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) {
  return a /= b;
}
template <std::size_t N>
Dual<N> operator+(Dual<N> a, double c) {
  return a += c;
}
template <std::size_t N>
Dual<N> operator+(double c, Dual<N> a) {
  return a += c;
}
template <std::size_t N>
Dual<N> operator-(Dual<N> a, double c) {
  return a -= c;
}
template <std::size_t N>
Dual<N> operator-(double c, const Dual<N>& a) {
  return -a + c;
}
template <std::size_t N>
Dual<N> operator*(Dual<N> a, double c) {
  return a *= c;
}
template <std::size_t N>
Dual<N> operator*(double c, Dual<N> a) {
  return a *= c;
}
template <std::size_t N>
Dual<N> operator/(Dual<N> a, double c) {
  return a /= c;
}
template <std::size_t N>
Dual<N> operator/(double c, const Dual<N>& a) {
  return detail::chain(a, c / a.v, -c / (a.v * a.v));
}

template <std::size_t N>
bool operator<(const Dual<N>& a, const Dual<N>& b) {
  return a.v < b.v;
}
template <std::size_t N>
bool operator<(const Dual<N>& a, double b) {
  return a.v < b;
}
template <std::size_t N>
bool operator>(const Dual<N>& a, double b) {
  return a.v > b;
}

template <std::size_t N>
Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return detail::chain(x, e, e);
}
template <std::size_t N>
Dual<N> log(const Dual<N>& x) {
  if (x.v < 0.0) throw DomainError("log of negative value");
  return detail::chain(x, std::log(x.v), 1.0 / x.v);
}
template <std::size_t N>
Dual<N> log1p(const Dual<N>& x) {
  if (x.v < -1.0) throw DomainError("log1p below -1");
  return detail::chain(x, std::log1p(x.v), 1.0 / (1.0 + x.v));
}
template <std::size_t N>
Dual<N> sqrt(const Dual<N>& x) {
  if (x.v < 0.0) throw DomainError("sqrt of negative value");
  const double s = std::sqrt(x.v);
  return detail::chain(x, s, 0.5 / s);
}
template <std::size_t N>
Dual<N> tanh(const Dual<N>& x) {
  const double t = std::tanh(x.v);
  return detail::chain(x, t, 1.0 - t * t);
}
template <std::size_t N>
Dual<N> atanh(const Dual<N>& x) {
  if (!(std::abs(x.v) < 1.0)) throw DomainError("atanh outside (-1, 1)");
  return detail::chain(x, std::atanh(x.v), 1.0 / (1.0 - x.v * x.v));
}
template <std::size_t N>
Dual<N> abs(const Dual<N>& x) {
  return x.v < 0.0 ? -x : x;
}
template <std::size_t N>
Dual<N> square(const Dual<N>& x) {
  return detail::chain(x, x.v * x.v, 2.0 * x.v);
}
inline double square(double x) { return x * x; }

/// acc -= a * b without a temporary.
template <std::size_t N>
void sub_product(Dual<N>& acc, const Dual<N>& a, const Dual<N>& b) {
  for (std::size_t k = 0; k < N; ++k) acc.d[k] -= a.d[k] * b.v + a.v * b.d[k];
  acc.v -= a.v * b.v;
}
template <std::size_t N>
void sub_product(Dual<N>& acc, const Dual<N>& a, double b) {
  for (std::size_t k = 0; k < N; ++k) acc.d[k] -= a.d[k] * b;
  acc.v -= a.v * b;
}
template <std::floating_point F>
void sub_product(F& acc, F a, F b) {
  acc -= a * b;
}
template <std::floating_point F>
void sub_product(F& acc, F a, double b) requires(!std::same_as<F, double>) {
  acc -= a * b;
}

/// acc += a * a without a temporary.
template <std::size_t N>
void add_square(Dual<N>& acc, const Dual<N>& a) {
  const double two_v = 2.0 * a.v;
  for (std::size_t k = 0; k < N; ++k) acc.d[k] += two_v * a.d[k];
  acc.v += a.v * a.v;
}
template <std::floating_point F>
void add_square(F& acc, F a) {
  acc += a * a;
}

namespace detail {

template <std::size_t N, class F>
double gradient_chunked(F& f, std::span<const double> x, std::span<double> grad) {
  const std::size_t n = x.size();
  std::vector<Dual<N>> xs(n);
  double value = 0.0;
  std::size_t start = 0;
  do {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = Dual<N>(x[i]);
      if (i >= start && i < start + N) xs[i].d[i - start] = 1.0;
    }
    const Dual<N> y = f(std::span<const Dual<N>>(xs));
    value = y.v;
    for (std::size_t k = 0; k < N && start + k < n; ++k) grad[start + k] = y.d[k];
    start += N;
  } while (start < n);
  if (std::isfinite(value)) {
    for (double g : grad) {
      if (std::isnan(g)) throw NonFiniteGradient("NaN partial at a finite value");
    }
  }
  return value;
}

}  // namespace detail

/// Value and gradient of `f` at `x`.
///
/// `f` must be callable with a `std::span<const T>` for T = double and for
/// every Dual<N>; the partials width is chosen from the input dimension and
/// larger problems are processed in chunks of directional seeds.
template <class F>
double gradient(F&& f, std::span<const double> x, std::span<double> grad) {
  if (grad.size() != x.size()) throw LayoutMismatch("gradient buffer size differs from input");
  const std::size_t n = x.size();
  if (n == 0) {
    return f(x);
  }
  if (n <= 4) return detail::gradient_chunked<4>(f, x, grad);
  if (n <= 8) return detail::gradient_chunked<8>(f, x, grad);
  if (n <= 16) return detail::gradient_chunked<16>(f, x, grad);
  if (n <= 32) return detail::gradient_chunked<32>(f, x, grad);
  if (n <= 48) return detail::gradient_chunked<48>(f, x, grad);
  return detail::gradient_chunked<72>(f, x, grad);
}

template <class F>
std::vector<double> gradient(F&& f, std::span<const double> x, double* value = nullptr) {
  std::vector<double> g(x.size());
  const double v = gradient(f, x, std::span<double>(g));
  if (value) *value = v;
  return g;
}

}  // namespace covprior
