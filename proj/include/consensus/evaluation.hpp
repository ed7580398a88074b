#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "consensus/label_data.hpp"
#include "consensus/models.hpp"

namespace consensus {

struct AccuracyResult {
  double accuracy;  // mean over runs
  int tie_count;    // golden objects whose argmax is not unique
};

/// Fraction of golden objects whose argmax label matches; ties are broken
/// uniformly at random and the result is averaged over `n_runs` draws.
/// Throws std::invalid_argument for an empty golden set.
AccuracyResult accuracy(const ConsensusResult& result, const GoldenSet& golden, std::uint64_t seed,
                        int n_runs = 1);

/// Mean of -log_K q_j[t_j] over the golden set; +inf if any golden label has
/// probability zero.
double log_loss(const ConsensusResult& result, const GoldenSet& golden, int K);

double mse(const Eigen::VectorXd& estimated, const Eigen::VectorXd& truth);

struct CalibrationBin {
  double mean_true = 0.0;
  double mean_estimated = 0.0;
  int count = 0;
};

/// Equal-width bins on the true probability. Values must lie in [0, 1].
std::vector<CalibrationBin> calibration_bins(const Eigen::VectorXd& truth, const Eigen::VectorXd& estimated,
                                             int n_bins = 10);

/// Mean |mean_true - mean_estimated| over non-empty bins.
double calibration_deviation(const std::vector<CalibrationBin>& bins);

struct MetricReport {
  double accuracy;
  double logloss;
  int n_test;
  int tie_count;
  std::uint64_t seed;
};

}  // namespace consensus
