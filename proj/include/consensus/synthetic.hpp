#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "consensus/label_data.hpp"
#include "consensus/models.hpp"
#include "consensus/optimizer.hpp"

namespace consensus::synth {

/// Binary latent-distribution GLAD generator:
///   q_j ~ U[0, 1], e_w ~ U[0, expertise_max], log d_j ~ U[0, log_difficulty_max],
///   z_jw ~ Bernoulli(q_j), y_jw = z_jw with probability sigmoid(e_w d_j), else flipped.
struct SynthConfig {
  int n_objects = 2000;
  int n_workers = 20;
  std::uint64_t seed = 0;
  int labels_per_object = 0;  // 0: every worker labels every object
  double expertise_max = 4.0;
  double log_difficulty_max = 3.0;
};

struct SynthDataset {
  LabelMatrix labels;       // label tokens "0" and "1" with codes 0 and 1
  Eigen::VectorXd true_q;   // P(label 1) per object
  Eigen::VectorXd true_e;
  Eigen::VectorXd true_d;
  GoldenSet golden;         // one fresh noiseless draw z_j ~ Bernoulli(q_j) per object
};

SynthDataset generate(const SynthConfig& cfg);

/// Independent child seed for sub-task `index` of a run seeded with `master`.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t index);

/// Keeps a uniform random subset of min(n, |W_j|) labels per object. Objects
/// keep their indices; workers left without labels are dropped.
LabelMatrix subsample_overlap(const LabelMatrix& data, int n, std::uint64_t seed);

struct MseSimulation {
  std::uint64_t seed;
  bool failed = false;
  std::string error;
  double mse_la = 0.0;
  double mse_da = 0.0;
  Eigen::VectorXd true_q, est_la, est_da;  // P(label 1) per object
};

struct MeanStderr {
  double mean = 0.0;
  double std_error = 0.0;
};

struct MseExperiment {
  std::vector<MseSimulation> sims;
  MeanStderr mse_la, mse_da;
};

/// Repeats generate + LA-GLAD/DA-GLAD fits `n_sims` times with seeds split
/// from cfg.seed. Throws std::runtime_error if more than two simulations fail.
MseExperiment run_mse_experiment(const SynthConfig& cfg, int n_sims = 10, const CGConfig& cg = {});

struct OverlapRow {
  int n;
  double mean_labels;
  double acc_la, acc_da;
  double logloss_la, logloss_da;
};

/// For each n in [n_min, n_max]: subsample, fit LA-GLAD and DA-GLAD, and
/// average accuracy and log loss on `golden` over `n_sims` draws.
std::vector<OverlapRow> run_overlap_sweep(const LabelMatrix& data, const GoldenSet& golden, int n_min,
                                          int n_max, int n_sims, std::uint64_t seed, const CGConfig& cg = {});

}  // namespace consensus::synth
