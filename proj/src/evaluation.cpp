#include "consensus/evaluation.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace consensus {

AccuracyResult accuracy(const ConsensusResult& result, const GoldenSet& golden, std::uint64_t seed,
                        int n_runs) {
  if (golden.empty()) throw std::invalid_argument("accuracy on an empty golden set");
  if (n_runs < 1) throw std::invalid_argument("n_runs must be >= 1");
  std::mt19937_64 rng(seed);
  int ties = 0;
  double total = 0.0;
  std::vector<int> best;
  for (int run = 0; run < n_runs; ++run) {
    int correct = 0;
    int run_ties = 0;
    for (const auto& [j, t] : golden.entries) {
      const auto row = result.probs.row(j);
      const double m = row.maxCoeff();
      best.clear();
      for (Eigen::Index k = 0; k < row.size(); ++k)
        if (row[k] == m) best.push_back(static_cast<int>(k));
      int pick = best.front();
      if (best.size() > 1) {
        ++run_ties;
        pick = best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
      }
      correct += pick == t;
    }
    ties = run_ties;
    total += static_cast<double>(correct) / golden.size();
  }
  return {total / n_runs, ties};
}

double log_loss(const ConsensusResult& result, const GoldenSet& golden, int K) {
  if (golden.empty()) throw std::invalid_argument("log loss on an empty golden set");
  const double log_k = std::log(static_cast<double>(K));
  double total = 0.0;
  for (const auto& [j, t] : golden.entries) {
    const double p = result.probs(j, t);
    if (!(p > 0)) return std::numeric_limits<double>::infinity();
    // -log_K p written as 1 - log_K(pK), exact for p = 1/K.
    total += 1.0 - std::log(p * K) / log_k;
  }
  return total / golden.size();
}

double mse(const Eigen::VectorXd& estimated, const Eigen::VectorXd& truth) {
  if (estimated.size() != truth.size() || truth.size() == 0)
    throw std::invalid_argument("mse needs equal, non-zero lengths");
  return (estimated - truth).squaredNorm() / truth.size();
}

std::vector<CalibrationBin> calibration_bins(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimated,
                                             int n_bins) {
  if (truth.size() != estimated.size()) throw std::invalid_argument("calibration length mismatch");
  if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
  std::vector<CalibrationBin> bins(n_bins);
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const double q = truth[i], e = estimated[i];
    if (!(q >= 0 && q <= 1 && e >= 0 && e <= 1))
      throw std::invalid_argument("calibration values must lie in [0, 1]");
    const int b = std::min(static_cast<int>(q * n_bins), n_bins - 1);
    bins[b].mean_true += q;
    bins[b].mean_estimated += e;
    ++bins[b].count;
  }
  for (auto& b : bins)
    if (b.count) {
      b.mean_true /= b.count;
      b.mean_estimated /= b.count;
    }
  return bins;
}

double calibration_deviation(const std::vector<CalibrationBin>& bins) {
  double total = 0.0;
  int used = 0;
  for (const auto& b : bins)
    if (b.count) {
      total += std::abs(b.mean_true - b.mean_estimated);
      ++used;
    }
  return used ? total / used : 0.0;
}

}  // namespace consensus
