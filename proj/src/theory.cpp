#include "consensus/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace consensus::theory {

namespace {

// k * log(p) with 0 * log(0) = 0.
double xlogy(int k, double p) {
  if (k == 0) return 0.0;
  return p > 0 ? k * std::log(p) : -std::numeric_limits<double>::infinity();
}

void check_counts(int n1, int n) {
  if (n < 1 || n1 < 0 || n1 > n) throw std::invalid_argument("require 0 <= n1 <= n and n >= 1");
}

}  // namespace

double flip(double q, double a) { return q * a + (1.0 - q) * (1.0 - a); }

double la_posterior(int n1, int n, double a, double r) {
  check_counts(n1, n);
  const double one = std::log(r) + xlogy(n1, a) + xlogy(n - n1, 1.0 - a);
  const double zero = std::log1p(-r) + xlogy(n1, 1.0 - a) + xlogy(n - n1, a);
  if (std::isinf(one) && std::isinf(zero)) return r;
  // 1 / (1 + exp(zero - one))
  const double d = zero - one;
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

double da_estimate(int n1, int n, double a, bool clamp) {
  check_counts(n1, n);
  if (a == 0.5) throw std::domain_error("a = 0.5 makes the label flip non-invertible");
  const double s = static_cast<double>(n1) / n;
  const double q = (s - (1.0 - a)) / (2.0 * a - 1.0);
  return clamp ? std::clamp(q, 0.0, 1.0) : q;
}

double da_pmf(int n1, int n, double q, double a) {
  check_counts(n1, n);
  const double f = flip(q, a);
  const double log_choose = std::lgamma(n + 1.0) - std::lgamma(n1 + 1.0) - std::lgamma(n - n1 + 1.0);
  return std::exp(log_choose + xlogy(n1, f) + xlogy(n - n1, 1.0 - f));
}

double expected_la_estimate(double q, int n, double a, double r) {
  double e = 0.0;
  for (int n1 = 0; n1 <= n; ++n1) e += la_posterior(n1, n, a, r) * da_pmf(n1, n, q, a);
  return e;
}

double expected_da_estimate(double q, int n, double a, bool clamp) {
  double e = 0.0;
  for (int n1 = 0; n1 <= n; ++n1) e += da_estimate(n1, n, a, clamp) * da_pmf(n1, n, q, a);
  return e;
}

double la_limit(double q, double r) {
  if (q < 0.5) return 0.0;
  if (q > 0.5) return 1.0;
  return r;
}

std::vector<BiasRow> bias_curves(const std::vector<int>& ns, const std::vector<double>& as, double r,
                                 int points) {
  if (points < 2) throw std::invalid_argument("grid needs at least 2 points");
  std::vector<BiasRow> rows;
  rows.reserve(ns.size() * as.size() * points);
  for (int n : ns)
    for (double a : as)
      for (int i = 0; i < points; ++i) {
        const double q = static_cast<double>(i) / (points - 1);
        rows.push_back({q, n, a, r, expected_la_estimate(q, n, a, r), expected_da_estimate(q, n, a)});
      }
  return rows;
}

}  // namespace consensus::theory
