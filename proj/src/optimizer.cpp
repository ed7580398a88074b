#include "consensus/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace consensus {

void CGConfig::validate() const {
  if (max_iters < 0) throw std::invalid_argument("max_iters must be non-negative");
  if (!(grad_tol > 0) || !(rel_obj_tol > 0) || !(sufficient_increase > 0))
    throw std::invalid_argument("tolerances must be positive");
  if (!(backtrack > 0 && backtrack < 1))
    throw std::invalid_argument("backtracking factor must lie in (0, 1)");
  if (max_backtracks < 1 || stall_window < 1)
    throw std::invalid_argument("max_backtracks and stall_window must be >= 1");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::ObjectiveTolerance: return "objective_tolerance";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::LineSearchFailure: return "line_search_failure";
  }
  return "unknown";
}

namespace {

bool finite(double f, const Eigen::VectorXd& g) { return std::isfinite(f) && g.allFinite(); }

}  // namespace

OptResult maximize(const ObjectiveHandle& objective, Eigen::VectorXd x0, const CGConfig& cfg) {
  cfg.validate();
  if (x0.size() != objective.dim) throw std::invalid_argument("x0 has wrong dimension");
  const Eigen::Index n = objective.dim;
  const int period = cfg.restart_period > 0 ? cfg.restart_period : static_cast<int>(std::max<Eigen::Index>(n, 1));

  OptResult out{std::move(x0), 0.0, {}};
  Eigen::VectorXd& x = out.x;
  Eigen::VectorXd g(n);
  double f = objective.eval(x, g);
  if (!finite(f, g)) throw NonFiniteObjective("objective not finite at the initial point", x);
  auto& records = out.trace.records;
  records.push_back({f, n ? g.lpNorm<Eigen::Infinity>() : 0.0, 0.0});

  if (n == 0) {
    out.value = f;
    out.trace.reason = Termination::GradientTolerance;
    return out;
  }

  Eigen::VectorXd d = g;
  Eigen::VectorXd x_trial(n), g_trial(n), x_alt(n), g_alt(n);
  int since_restart = 0;
  int stalled = 0;
  double alpha_prev = 0.0, slope_prev = 0.0;
  out.trace.reason = Termination::MaxIterations;

  for (int it = 0; it < cfg.max_iters; ++it) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= cfg.grad_tol) {
      out.trace.reason = Termination::GradientTolerance;
      break;
    }
    double slope = g.dot(d);
    if (!(slope > 0)) {
      d = g;
      slope = g.squaredNorm();
      since_restart = 0;
    }

    double alpha = alpha_prev > 0 ? alpha_prev * slope_prev / slope
                                  : 1.0 / std::max(1.0, d.lpNorm<Eigen::Infinity>());
    if (!std::isfinite(alpha) || alpha <= 0) alpha = 1.0 / std::max(1.0, d.lpNorm<Eigen::Infinity>());
    alpha = std::min(alpha, 1e10);

    // Backtracking on a quadratic model of phi(t) = f(x + t d): a rejected
    // trial is replaced by the model maximizer clamped to [0.1, backtrack] of
    // the step. When the first trial is accepted, the model maximizer is
    // tried once more (shorter or longer) and kept if it increases further.
    auto curvature = [&](double a, double fa) { return (fa - f - slope * a) / (a * a); };
    auto armijo = [&](double a, double fa) { return fa >= f + cfg.sufficient_increase * a * slope; };
    bool accepted = false;
    double f_trial = 0.0;
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      x_trial = x + alpha * d;
      f_trial = objective.eval(x_trial, g_trial);
      const bool ok = finite(f_trial, g_trial);
      if (ok && armijo(alpha, f_trial)) {
        accepted = true;
        if (b == 0) {
          const double c = curvature(alpha, f_trial);
          const double alt = c < 0 ? std::clamp(-slope / (2 * c), 0.1 * alpha, 2 * alpha) : alpha;
          if (std::abs(alt - alpha) > 0.1 * alpha) {
            x_alt = x + alt * d;
            const double f_alt = objective.eval(x_alt, g_alt);
            if (finite(f_alt, g_alt) && f_alt > f_trial && armijo(alt, f_alt)) {
              x_trial.swap(x_alt);
              g_trial.swap(g_alt);
              f_trial = f_alt;
              alpha = alt;
            }
          }
        }
        break;
      }
      double next = cfg.backtrack * alpha;
      if (ok) {
        const double c = curvature(alpha, f_trial);
        if (c < 0) next = std::clamp(-slope / (2 * c), 0.1 * alpha, cfg.backtrack * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      out.trace.reason = Termination::LineSearchFailure;
      break;
    }

    const double improvement = (f_trial - f) / std::max(std::abs(f), 1e-10);
    const double beta = std::max(0.0, g_trial.dot(g_trial - g) / g.squaredNorm());
    x.swap(x_trial);
    g.swap(g_trial);
    f = f_trial;
    records.push_back({f, g.lpNorm<Eigen::Infinity>(), alpha});
    alpha_prev = alpha;
    slope_prev = slope;

    if (++since_restart >= period) {
      d = g;
      since_restart = 0;
    } else {
      d = g + beta * d;
    }

    stalled = improvement < cfg.rel_obj_tol ? stalled + 1 : 0;
    if (stalled >= cfg.stall_window) {
      out.trace.reason = Termination::ObjectiveTolerance;
      break;
    }
  }
  if (out.trace.reason == Termination::MaxIterations && g.lpNorm<Eigen::Infinity>() <= cfg.grad_tol)
    out.trace.reason = Termination::GradientTolerance;
  out.value = f;
  return out;
}

}  // namespace consensus
