#include "consensus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "consensus/evaluation.hpp"

namespace consensus::synth {

std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over (master, index)
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Builds a matrix from triples whose worker indices may leave gaps; unused
// workers are dropped and the rest renumbered in order.
LabelMatrix compact_workers(std::vector<Triple> triples, const std::vector<std::string>& worker_ids,
                            std::vector<std::string> object_ids, LabelEncoding labels) {
  std::vector<int> remap(worker_ids.size(), -1);
  for (const auto& t : triples) remap[t.worker] = 0;
  std::vector<std::string> kept;
  for (std::size_t w = 0; w < remap.size(); ++w)
    if (remap[w] == 0) {
      remap[w] = static_cast<int>(kept.size());
      kept.push_back(worker_ids[w]);
    }
  for (auto& t : triples) t.worker = remap[t.worker];
  return LabelMatrix(std::move(triples), std::move(kept), std::move(object_ids), std::move(labels));
}

}  // namespace

SynthDataset generate(const SynthConfig& cfg) {
  if (cfg.n_objects < 1 || cfg.n_workers < 1) throw std::invalid_argument("counts must be >= 1");
  if (cfg.labels_per_object < 0 || cfg.labels_per_object > cfg.n_workers)
    throw std::invalid_argument("labels_per_object must lie in [0, n_workers]");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthDataset out;
  out.true_q.resize(cfg.n_objects);
  out.true_d.resize(cfg.n_objects);
  out.true_e.resize(cfg.n_workers);
  for (int j = 0; j < cfg.n_objects; ++j) out.true_q[j] = unit(rng);
  for (int w = 0; w < cfg.n_workers; ++w) out.true_e[w] = cfg.expertise_max * unit(rng);
  for (int j = 0; j < cfg.n_objects; ++j) out.true_d[j] = std::exp(cfg.log_difficulty_max * unit(rng));

  std::vector<std::string> worker_ids(cfg.n_workers), object_ids(cfg.n_objects);
  for (int w = 0; w < cfg.n_workers; ++w) worker_ids[w] = "w" + std::to_string(w);
  for (int j = 0; j < cfg.n_objects; ++j) object_ids[j] = "o" + std::to_string(j);

  const int per_object = cfg.labels_per_object == 0 ? cfg.n_workers : cfg.labels_per_object;
  std::vector<int> workers(cfg.n_workers);
  std::iota(workers.begin(), workers.end(), 0);
  std::vector<Triple> triples;
  triples.reserve(static_cast<std::size_t>(cfg.n_objects) * per_object);
  for (int j = 0; j < cfg.n_objects; ++j) {
    if (per_object < cfg.n_workers) {
      // partial Fisher-Yates: first per_object entries are a uniform subset
      for (int i = 0; i < per_object; ++i) {
        std::uniform_int_distribution<int> pick(i, cfg.n_workers - 1);
        std::swap(workers[i], workers[pick(rng)]);
      }
    }
    for (int i = 0; i < per_object; ++i) {
      const int w = workers[i];
      const int z = unit(rng) < out.true_q[j] ? 1 : 0;
      const double a = sigmoid(out.true_e[w] * out.true_d[j]);
      const int y = unit(rng) < a ? z : 1 - z;
      triples.push_back({w, j, y});
    }
  }
  for (int j = 0; j < cfg.n_objects; ++j) out.golden.entries[j] = unit(rng) < out.true_q[j] ? 1 : 0;

  out.labels = compact_workers(std::move(triples), worker_ids, std::move(object_ids),
                               LabelEncoding({"0", "1"}));
  return out;
}

LabelMatrix subsample_overlap(const LabelMatrix& data, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("subsample size must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Triple> triples;
  std::vector<Response> labels;
  for (int j = 0; j < data.n_objects(); ++j) {
    labels = data.by_object(j);
    const int keep = std::min<int>(n, static_cast<int>(labels.size()));
    if (keep < static_cast<int>(labels.size())) {
      for (int i = 0; i < keep; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(labels.size()) - 1);
        std::swap(labels[i], labels[pick(rng)]);
      }
    }
    for (int i = 0; i < keep; ++i) triples.push_back({labels[i].index, j, labels[i].label});
  }
  return compact_workers(std::move(triples), data.worker_ids(), data.object_ids(), data.labels());
}

namespace {

MeanStderr summarize(const std::vector<double>& v) {
  MeanStderr s;
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std_error = std::sqrt(ss / (v.size() - 1) / v.size());
  }
  return s;
}

}  // namespace

MseExperiment run_mse_experiment(const SynthConfig& cfg, int n_sims, const CGConfig& cg) {
  if (n_sims < 1) throw std::invalid_argument("n_sims must be >= 1");
  const ModelId la{Family::GLAD, Assumption::LatentLabel};
  const ModelId da{Family::GLAD, Assumption::LatentDistribution};
  FitOptions options;
  options.cg = cg;

  MseExperiment out;
  std::vector<double> la_values, da_values;
  int failures = 0;
  for (int s = 0; s < n_sims; ++s) {
    SynthConfig sim_cfg = cfg;
    sim_cfg.seed = split_seed(cfg.seed, static_cast<std::uint64_t>(s));
    MseSimulation sim;
    sim.seed = sim_cfg.seed;
    try {
      const auto data = generate(sim_cfg);
      sim.true_q = data.true_q;
      sim.est_la = fit(la, data.labels, options).consensus.probs.col(1);
      sim.est_da = fit(da, data.labels, options).consensus.probs.col(1);
      sim.mse_la = mse(sim.est_la, sim.true_q);
      sim.mse_da = mse(sim.est_da, sim.true_q);
      la_values.push_back(sim.mse_la);
      da_values.push_back(sim.mse_da);
    } catch (const std::exception& e) {
      sim.failed = true;
      sim.error = e.what();
      if (++failures > 2) throw std::runtime_error("mse experiment aborted: " + sim.error);
    }
    out.sims.push_back(std::move(sim));
  }
  out.mse_la = summarize(la_values);
  out.mse_da = summarize(da_values);
  return out;
}

std::vector<OverlapRow> run_overlap_sweep(const LabelMatrix& data, const GoldenSet& golden, int n_min,
                                          int n_max, int n_sims, std::uint64_t seed, const CGConfig& cg) {
  if (n_min < 1 || n_max < n_min) throw std::invalid_argument("invalid overlap range");
  if (n_sims < 1) throw std::invalid_argument("n_sims must be >= 1");
  if (golden.empty()) throw std::invalid_argument("overlap sweep needs a golden set");
  const ModelId la{Family::GLAD, Assumption::LatentLabel};
  const ModelId da{Family::GLAD, Assumption::LatentDistribution};
  FitOptions options;
  options.cg = cg;
  const int K = data.n_classes();

  std::vector<OverlapRow> rows;
  for (int n = n_min; n <= n_max; ++n) {
    OverlapRow row{n, 0, 0, 0, 0, 0};
    for (int s = 0; s < n_sims; ++s) {
      const auto sim_seed = split_seed(seed, static_cast<std::uint64_t>(n) * 1000 + s);
      const auto sub = subsample_overlap(data, n, sim_seed);
      const auto fit_la = fit(la, sub, options);
      const auto fit_da = fit(da, sub, options);
      row.mean_labels += sub.mean_labels_per_object();
      row.acc_la += accuracy(fit_la.consensus, golden, sim_seed).accuracy;
      row.acc_da += accuracy(fit_da.consensus, golden, sim_seed).accuracy;
      row.logloss_la += log_loss(fit_la.consensus, golden, K);
      row.logloss_da += log_loss(fit_da.consensus, golden, K);
    }
    row.mean_labels /= n_sims;
    row.acc_la /= n_sims;
    row.acc_da /= n_sims;
    row.logloss_la /= n_sims;
    row.logloss_da /= n_sims;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace consensus::synth
