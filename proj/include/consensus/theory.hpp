#pragma once

// Single-object binary estimator analysis. One object with latent
// Bernoulli(q) labels is labelled by n workers who each report the sampled
// label correctly with the same known probability a > 0.5; n1 of the n
// observed labels are ones.

#include <vector>

namespace consensus::theory {

/// Probability that an observed label equals 1: q a + (1 - q)(1 - a).
double flip(double q, double a);

/// Posterior probability of label 1 under the latent-label model with prior r.
double la_posterior(int n1, int n, double a, double r);

/// Maximum-likelihood estimate of q under the latent-distribution model,
/// (n1/n - (1 - a)) / (2a - 1). Unclamped it may leave [0, 1].
/// Throws std::domain_error when a == 0.5.
double da_estimate(int n1, int n, double a, bool clamp = false);

/// P(N1 = n1) = C(n, n1) f^n1 (1 - f)^(n - n1), f = flip(q, a).
double da_pmf(int n1, int n, double q, double a);

/// E[la_posterior(N1)] under the latent-distribution process.
double expected_la_estimate(double q, int n, double a, double r);

/// E[da_estimate(N1)] under the latent-distribution process.
double expected_da_estimate(double q, int n, double a, bool clamp = false);

/// Large-n limit of the latent-label estimate: 0 below q = 0.5, r at 0.5, 1 above.
double la_limit(double q, double r);

struct BiasRow {
  double q;
  int n;
  double a;
  double r;
  double e_la;
  double e_da;
};

/// Expected estimates over the grid q = 0, 1/(points-1), ..., 1 for every (n, a).
std::vector<BiasRow> bias_curves(const std::vector<int>& ns, const std::vector<double>& as, double r,
                                 int points = 101);

}  // namespace consensus::theory
