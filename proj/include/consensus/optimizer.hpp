#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "consensus/numeric.hpp"

namespace consensus {

/// Returns the objective at `x` and writes its gradient into `grad`.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct ObjectiveHandle {
  ObjectiveFn eval;
  Eigen::Index dim = 0;
};

struct CGConfig {
  int max_iters = 500;
  double grad_tol = 1e-6;      // infinity norm
  double rel_obj_tol = 1e-8;   // per-iteration relative improvement
  int stall_window = 5;        // consecutive iterations below rel_obj_tol
  double sufficient_increase = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  int restart_period = 0;      // 0 means every `dim` iterations

  void validate() const;
};

enum class Termination { GradientTolerance, ObjectiveTolerance, MaxIterations, LineSearchFailure };

std::string to_string(Termination t);

struct IterationRecord {
  double objective;
  double grad_norm;
  double step;
};

/// records[0] is the starting point; each later record is an accepted step.
struct OptTrace {
  std::vector<IterationRecord> records;
  Termination reason = Termination::MaxIterations;

  int iterations() const { return static_cast<int>(records.size()) - 1; }
};

struct OptResult {
  Eigen::VectorXd x;
  double value;
  OptTrace trace;
};

/// Raised when the objective or gradient is not finite at an accepted iterate.
class NonFiniteObjective : public std::runtime_error {
 public:
  NonFiniteObjective(const std::string& what, Eigen::VectorXd x)
      : std::runtime_error(what), iterate(std::move(x)) {}
  Eigen::VectorXd iterate;
};

/// Nonlinear conjugate-gradient ascent (Polak-Ribiere-plus) with Armijo
/// backtracking. Restarts along the gradient every `restart_period`
/// iterations and whenever the CG direction is not an ascent direction.
OptResult maximize(const ObjectiveHandle& objective, Eigen::VectorXd x0,
                   const CGConfig& cfg = {});

// Reparameterizations between constrained model parameters and the
// unconstrained coordinates the optimizer works in.

/// Softmax of unconstrained logits. The output sums to one.
template <class Derived>
Eigen::VectorXd simplex_param(const Eigen::MatrixBase<Derived>& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - m).exp().matrix();
  return p / p.sum();
}

/// Pulls a gradient w.r.t. the simplex point back to the logits:
/// J^T g with J = diag(p) - p p^T.
template <class DP, class DG>
Eigen::VectorXd simplex_pullback(const Eigen::MatrixBase<DP>& p, const Eigen::MatrixBase<DG>& g) {
  return (p.array() * (g.array() - p.dot(g))).matrix();
}

/// Logits whose softmax is `p`; zero entries are floored at `floor`.
template <class Derived>
Eigen::VectorXd simplex_unparam(const Eigen::MatrixBase<Derived>& p, double floor = 1e-8) {
  Eigen::VectorXd l = p.array().max(floor).log().matrix();
  return l.array() - l.mean();
}

inline double positive_param(double u) { return std::exp(u); }
inline double positive_pullback(double u, double g) { return std::exp(u) * g; }
inline double positive_unparam(double v) {
  if (!(v > 0)) throw std::domain_error("positive_unparam requires v > 0");
  return std::log(v);
}

}  // namespace consensus
