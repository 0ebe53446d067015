#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "covprior/autodiff.hpp"

using namespace covprior;

TEST(Dual, ElementaryExamples) {
  const auto x = Dual<3>::variable(0.0, 1);
  const auto e = exp(x);
  EXPECT_EQ(e.v, 1.0);
  EXPECT_EQ(e.d[0], 0.0);
  EXPECT_EQ(e.d[1], 1.0);
  const auto l = log(Dual<3>::variable(1.0, 2));
  EXPECT_EQ(l.v, 0.0);
  EXPECT_EQ(l.d[2], 1.0);
}

TEST(Dual, CompositeMatchesCentralDifference) {
  auto f = [](double x) { return std::tanh(std::log(x)); };
  const auto y = tanh(log(Dual<1>::variable(2.0, 0)));
  const double h = 1e-5;
  EXPECT_NEAR(y.v, f(2.0), 1e-15);
  EXPECT_NEAR(y.d[0], (f(2.0 + h) - f(2.0 - h)) / (2 * h), 1e-8);
}

TEST(Dual, ArithmeticRules) {
  const auto a = Dual<2>::variable(3.0, 0);
  const auto b = Dual<2>::variable(-2.0, 1);
  const auto q = (a * b + 1.0) / (b - a);
  // q = (ab + 1)/(b - a); dq/da = (b(b - a) + (ab + 1)) / (b - a)^2
  const double den = -5.0;
  EXPECT_NEAR(q.v, (-6.0 + 1.0) / den, 1e-15);
  EXPECT_NEAR(q.d[0], (-2.0 * den + (-5.0)) / (den * den), 1e-15);
  EXPECT_NEAR(q.d[1], (3.0 * den - (-5.0)) / (den * den), 1e-15);

  const auto s = sqrt(Dual<2>::variable(4.0, 0));
  EXPECT_NEAR(s.d[0], 0.25, 1e-15);
  const auto t = atanh(Dual<2>::variable(0.5, 1));
  EXPECT_NEAR(t.d[1], 1.0 / 0.75, 1e-15);
  const auto p = log1p(Dual<2>::variable(0.5, 0));
  EXPECT_NEAR(p.d[0], 1.0 / 1.5, 1e-15);
  const auto m = abs(Dual<2>::variable(-1.5, 0));
  EXPECT_EQ(m.v, 1.5);
  EXPECT_EQ(m.d[0], -1.0);
}

TEST(Gradient, SumOfSquares) {
  auto f = [](auto x) {
    using T = typename decltype(x)::value_type;
    T s(0.0);
    for (const auto& v : x) s += v * v;
    return s;
  };
  const std::vector<double> x{1.0, 2.0};
  double value = 0.0;
  const auto g = gradient(f, x, &value);
  EXPECT_EQ(value, 5.0);
  EXPECT_EQ(g[0], 2.0);
  EXPECT_EQ(g[1], 4.0);
}

TEST(Gradient, Constant) {
  auto f = [](auto x) {
    using T = typename decltype(x)::value_type;
    return T(7.0);
  };
  const std::vector<double> x{1.0, -3.0, 0.5};
  const auto g = gradient(f, x);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, ChunkedWideInput) {
  // 100 inputs exercise several seeding chunks.
  auto f = [](auto x) {
    using T = typename decltype(x)::value_type;
    T s(0.0);
    for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<double>(i + 1) * exp(x[i]);
    return s;
  };
  std::vector<double> x(100);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i);
  const auto g = gradient(f, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], (i + 1) * std::exp(x[i]), 1e-12 * (i + 1));
}

TEST(Gradient, NaNPartialThrows) {
  // sqrt at 0 has an infinite slope; multiplied by zero it gives NaN.
  auto f = [](auto x) {
    using T = typename decltype(x)::value_type;
    return T(0.0) * sqrt(x[0]) + x[1];
  };
  const std::vector<double> x{0.0, 1.0};
  EXPECT_THROW(gradient(f, x), NonFiniteGradient);
}

TEST(Gradient, BufferSizeChecked) {
  auto f = [](auto x) { return x[0]; };
  const std::vector<double> x{1.0, 2.0};
  std::vector<double> g(1);
  EXPECT_THROW(gradient(f, std::span<const double>(x), std::span<double>(g)), LayoutMismatch);
}
