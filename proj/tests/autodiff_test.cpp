#include "consensus/autodiff.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace consensus::ad {
namespace {

TEST(Tape, SquareHasDerivativeSix) {
  Tape t;
  Var x = t.input(3.0);
  Var xs[] = {x, x};
  Var f = record(Op::Mul, xs);
  EXPECT_DOUBLE_EQ(f.value(), 9.0);
  EXPECT_DOUBLE_EQ(t.gradient(f)[0], 6.0);
}

TEST(Tape, LogSigmoidAtZero) {
  Tape t;
  Var x = t.input(0.0);
  Var s = sigmoid(x);
  Var f = log(s);
  EXPECT_NEAR(t.gradient(f)[0], 0.5, 1e-15);
  Var g = log_sigmoid(x);
  EXPECT_NEAR(g.value(), std::log(0.5), 1e-15);
  EXPECT_NEAR(t.gradient(g)[0], 0.5, 1e-15);
}

TEST(Tape, LogSumExpDoesNotOverflow) {
  Tape t;
  std::vector<Var> v = {t.input(1000.0), t.input(1000.0)};
  Var f = logsumexp(v);
  EXPECT_NEAR(f.value(), 1000.0 + std::log(2.0), 1e-12);
  auto g = t.gradient(f);
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], 0.5, 1e-15);
}

TEST(Tape, SumRuleAndUnreachableLeaf) {
  Tape t;
  Var x = t.input(2.0), y = t.input(5.0), z = t.input(-1.0);
  Var f = x + y;
  auto g = t.gradient(f);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 1.0);
  EXPECT_EQ(g[2], 0.0);
  (void)z;
}

TEST(Tape, DomainAndUsageErrors) {
  Tape t, other;
  Var x = t.input(-1.0), y = other.input(1.0);
  EXPECT_THROW(log(x), std::domain_error);
  EXPECT_THROW(log(t.input(0.0)), std::domain_error);
  EXPECT_THROW(log1p(t.input(-1.0)), std::domain_error);
  EXPECT_THROW(x + y, std::logic_error);
  EXPECT_THROW(x / t.input(0.0), std::domain_error);
  EXPECT_THROW(logsumexp(std::span<const Var>{}), std::invalid_argument);
  Var one[] = {x};
  EXPECT_THROW(record(Op::Add, one), std::invalid_argument);
}

TEST(Tape, ParentsPrecedeChildren) {
  Tape t;
  Var a = t.input(0.3), b = t.input(1.7);
  Var c = a * b + exp(a) / b;
  EXPECT_GT(c.id(), a.id());
  EXPECT_GT(c.id(), b.id());
  EXPECT_EQ(t.size(), static_cast<std::size_t>(c.id()) + 1);
}

using Fn = std::function<Var(std::span<const Var>)>;

double central_difference(const Fn& f, std::vector<double> x, std::size_t i, double h) {
  auto eval = [&](double xi) {
    Tape t;
    std::vector<Var> v;
    x[i] = xi;
    for (double xk : x) v.push_back(t.input(xk));
    return f(v).value();
  };
  const double x0 = x[i];
  return (eval(x0 + h) - eval(x0 - h)) / (2 * h);
}

void expect_matches_finite_differences(const Fn& f, const std::vector<double>& x, double tol) {
  Tape t;
  std::vector<Var> v;
  for (double xk : x) v.push_back(t.input(xk));
  auto g = t.gradient(f(v));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = central_difference(f, x, i, 1e-5);
    EXPECT_LT(std::abs(g[i] - fd) / (std::abs(g[i]) + 1e-8), tol) << "coordinate " << i;
  }
}

TEST(Gradient, LogSoftmaxMatchesFiniteDifferences) {
  Fn log_softmax0 = [](std::span<const Var> v) { return v[0] - logsumexp(v); };
  expect_matches_finite_differences(log_softmax0, {0.2, -1.3, 0.7}, 1e-6);
}

// Random compositions of every primitive checked against central differences.
TEST(GradientProperty, PrimitivesMatchFiniteDifferences) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Fn> fns = {
      [](std::span<const Var> v) { return v[0] * v[1] - v[2] / (v[1] * v[1] + 1.0); },
      [](std::span<const Var> v) { return exp(v[0] - v[1]) + log(v[2] * v[2] + 0.5); },
      [](std::span<const Var> v) { return log1p(sigmoid(v[0]) * v[1] * v[1]) - (-v[2]); },
      [](std::span<const Var> v) { return log_sigmoid(v[0] * v[2]) + logsumexp(v) * 2.0; },
      [](std::span<const Var> v) { return sum(v) * v[0] - 3.0 / (exp(v[1]) + v[2] * v[2]); },
  };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = {u(rng), u(rng), u(rng)};
    for (const auto& f : fns) expect_matches_finite_differences(f, x, 1e-4);
  }
}

TEST(GradientProperty, LogSumExpShiftInvariance) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = 100 * u(rng);
    Tape t;
    std::vector<Var> a, b;
    for (int i = 0; i < 4; ++i) {
      const double x = u(rng);
      a.push_back(t.input(x));
      b.push_back(t.input(x + c));
    }
    Var fa = logsumexp(a), fb = logsumexp(b);
    EXPECT_NEAR(fb.value() - fa.value(), c, 1e-9 * (1 + std::abs(c)));
    auto ga = t.gradient(fa), gb = t.gradient(fb);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(ga[2 * i], gb[2 * i + 1], 1e-12);
  }
}

}  // namespace
}  // namespace consensus::ad
