// consensus: fit, evaluate and experiment driver.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "consensus/evaluation.hpp"
#include "consensus/label_data.hpp"
#include "consensus/models.hpp"
#include "consensus/synthetic.hpp"
#include "consensus/theory.hpp"

namespace {

using nlohmann::ordered_json;
using namespace consensus;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MismatchError : std::runtime_error {
  std::vector<std::string> offenders;
  MismatchError(const std::string& what, std::vector<std::string> ids)
      : std::runtime_error(what), offenders(std::move(ids)) {}
};

// Writes to --out when given, otherwise stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file_.open(path);
    if (!file_) throw UsageError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  void close() {
    stream().flush();
    if (file_.is_open()) {
      file_.close();
      if (file_.fail()) throw std::runtime_error("failed writing output");
    }
  }

 private:
  std::ofstream file_;
};

std::ostream& csv(std::ostream& out) { return out << std::setprecision(17); }

// +inf has no JSON encoding; it is written as the string "inf".
ordered_json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json consensus_json(const Eigen::MatrixXd& probs, const LabelMatrix& data) {
  ordered_json out = ordered_json::object();
  for (int j = 0; j < data.n_objects(); ++j) {
    ordered_json row = ordered_json::object();
    for (int k = 0; k < data.n_classes(); ++k) row[data.labels().token(k)] = probs(j, k);
    out[data.object_ids()[j]] = std::move(row);
  }
  return out;
}

ordered_json params_json(const ModelParams& params, ModelId model, const LabelMatrix& data) {
  ordered_json out = ordered_json::object();
  const auto& wid = data.worker_ids();
  const auto& oid = data.object_ids();
  if (const auto* ds = std::get_if<DSParams>(&params)) {
    if (model.latent_label()) {
      ordered_json prior = ordered_json::array();
      for (Eigen::Index k = 0; k < ds->prior.size(); ++k) prior.push_back(ds->prior[k]);
      out["prior"] = std::move(prior);
    }
    ordered_json conf = ordered_json::object();
    for (int w = 0; w < data.n_workers(); ++w) conf[wid[w]] = matrix_json(ds->confusion[w]);
    out["confusion"] = std::move(conf);
  } else if (const auto* g = std::get_if<GLADParams>(&params)) {
    ordered_json e = ordered_json::object(), d = ordered_json::object();
    for (int w = 0; w < data.n_workers(); ++w) e[wid[w]] = g->expertise[w];
    for (int j = 0; j < data.n_objects(); ++j) d[oid[j]] = g->difficulty[j];
    out["expertise"] = std::move(e);
    out["difficulty"] = std::move(d);
  } else {
    const auto& m = std::get<MMEParams>(params);
    ordered_json wj = ordered_json::object(), oj = ordered_json::object();
    for (int w = 0; w < data.n_workers(); ++w) wj[wid[w]] = matrix_json(m.worker[w]);
    for (int j = 0; j < data.n_objects(); ++j) oj[oid[j]] = matrix_json(m.object[j]);
    out["worker"] = std::move(wj);
    out["object"] = std::move(oj);
  }
  return out;
}

ordered_json label_alphabet(const LabelMatrix& data) {
  ordered_json out = ordered_json::array();
  for (int k = 0; k < data.n_classes(); ++k) out.push_back(data.labels().token(k));
  return out;
}

struct CommonFlags {
  std::string out;
  std::uint64_t seed = 0;
  CGConfig cg;
};

void add_cg_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--max-iters", f.cg.max_iters, "Conjugate-gradient iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--grad-tol", f.cg.grad_tol, "Gradient infinity-norm tolerance")->check(CLI::PositiveNumber);
}

// ---- fit ------------------------------------------------------------------

struct FitFlags : CommonFlags {
  std::string model;
  std::string labels;
  bool no_timing = false;
};

void cmd_fit(const FitFlags& f) {
  f.cg.validate();
  const auto start = std::chrono::steady_clock::now();
  const LabelMatrix data = ingest_labels(f.labels);

  ordered_json report = ordered_json::object();
  report["model"] = f.model;
  report["labels"] = label_alphabet(data);
  report["n_objects"] = data.n_objects();
  report["n_workers"] = data.n_workers();
  report["n_labels"] = data.n_labels();
  report["seed"] = f.seed;

  if (f.model == "rfe") {
    report["semantics"] = "latent_distribution";
    report["consensus"] = consensus_json(rfe(data, false).probs, data);
    report["consensus_smoothed"] = consensus_json(rfe(data, true).probs, data);
    report["log_likelihood"] = nullptr;
    report["iterations"] = 0;
    report["termination"] = "closed_form";
  } else {
    const ModelId model = ModelId::parse(f.model);
    FitOptions options;
    options.cg = f.cg;
    const FitResult r = fit(model, data, options);
    report["semantics"] =
        r.consensus.semantics == Semantics::LatentPosterior ? "latent_posterior" : "latent_distribution";
    report["consensus"] = consensus_json(r.consensus.probs, data);
    report["log_likelihood"] = number(r.log_likelihood);
    report["iterations"] = r.trace.iterations();
    report["termination"] = to_string(r.trace.reason);
    ordered_json obj = ordered_json::array(), gn = ordered_json::array();
    for (const auto& rec : r.trace.records) {
      obj.push_back(number(rec.objective));
      gn.push_back(number(rec.grad_norm));
    }
    report["trace"] = {{"objective", std::move(obj)}, {"grad_norm", std::move(gn)}};
    report["params"] = params_json(r.params, model, data);
  }
  if (!f.no_timing)
    report["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Output out(f.out);
  out.stream() << report.dump(2) << '\n';
  out.close();
}

// ---- evaluate -------------------------------------------------------------

struct EvalFlags : CommonFlags {
  std::string report;
  std::string golden;
};

struct ParsedReport {
  std::string model;
  std::vector<std::string> tokens;
  std::vector<std::string> object_ids;
  Eigen::MatrixXd probs, smoothed;
};

Eigen::MatrixXd read_consensus(const ordered_json& block, const std::vector<std::string>& tokens,
                               std::vector<std::string>* ids) {
  if (!block.is_object()) throw DataError("report consensus must be an object keyed by object id");
  Eigen::MatrixXd probs(static_cast<Eigen::Index>(block.size()), static_cast<Eigen::Index>(tokens.size()));
  Eigen::Index j = 0;
  for (const auto& [id, row] : block.items()) {
    if (ids) ids->push_back(id);
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      if (!row.contains(tokens[k]) || !row[tokens[k]].is_number())
        throw DataError("report object '" + id + "' lacks a probability for label '" + tokens[k] + "'");
      probs(j, static_cast<Eigen::Index>(k)) = row[tokens[k]].get<double>();
    }
    ++j;
  }
  return probs;
}

ParsedReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.contains("model") || !j.contains("labels") || !j.contains("consensus"))
    throw DataError("report '" + path + "' lacks model, labels or consensus");
  ParsedReport r;
  r.model = j["model"].get<std::string>();
  r.tokens = j["labels"].get<std::vector<std::string>>();
  r.probs = read_consensus(j["consensus"], r.tokens, &r.object_ids);
  if (r.model == "rfe") {
    if (!j.contains("consensus_smoothed")) throw DataError("rfe report lacks consensus_smoothed");
    std::vector<std::string> ids;
    r.smoothed = read_consensus(j["consensus_smoothed"], r.tokens, &ids);
    if (ids != r.object_ids) throw DataError("rfe report consensus blocks cover different objects");
  }
  return r;
}

void cmd_evaluate(const EvalFlags& f) {
  const ParsedReport report = read_report(f.report);
  std::unordered_map<std::string, int> index;
  for (std::size_t j = 0; j < report.object_ids.size(); ++j) index[report.object_ids[j]] = static_cast<int>(j);
  const LabelEncoding encoding(report.tokens);

  std::ifstream in(f.golden);
  if (!in) throw DataError("cannot open '" + f.golden + "'");
  GoldenSet golden;
  std::vector<std::string> missing;
  for (const auto& row : read_golden_rows(in)) {
    auto it = index.find(row.object);
    if (it == index.end()) {
      missing.push_back(row.object);
      continue;
    }
    const int code = encoding.code(row.label);
    if (code < 0)
      throw DataError("golden row " + std::to_string(row.row) + ": label '" + row.label + "' absent from report");
    if (!golden.entries.emplace(it->second, code).second)
      throw DataError("golden row " + std::to_string(row.row) + ": duplicate object '" + row.object + "'");
  }
  if (!missing.empty())
    throw MismatchError(std::to_string(missing.size()) + " golden object(s) absent from the report", missing);
  if (golden.empty()) throw DataError("golden file contains no rows");

  const bool is_rfe = report.model == "rfe";
  const int n_runs = is_rfe ? 10 : 1;
  const auto acc = accuracy({report.probs, Semantics::LatentDistribution}, golden, f.seed, n_runs);
  const double ll =
      log_loss({is_rfe ? report.smoothed : report.probs, Semantics::LatentDistribution}, golden,
               static_cast<int>(report.tokens.size()));
  ordered_json m = ordered_json::object();
  m["model"] = report.model;
  m["accuracy"] = acc.accuracy;
  m["logloss"] = number(ll);
  m["n_test"] = golden.size();
  m["tie_count"] = acc.tie_count;
  m["seed"] = f.seed;
  m["n_runs"] = n_runs;
  Output out(f.out);
  out.stream() << m.dump(2) << '\n';
  out.close();
}

// ---- synth ----------------------------------------------------------------

struct SynthFlags : CommonFlags {
  synth::SynthConfig cfg;
};

void cmd_synth(const SynthFlags& f) {
  if (f.out.empty()) throw UsageError("synth needs --out DIR");
  synth::SynthConfig cfg = f.cfg;
  cfg.seed = f.seed;
  const auto d = synth::generate(cfg);
  const std::filesystem::path dir(f.out);
  std::filesystem::create_directories(dir);

  Output labels((dir / "labels.tsv").string());
  write_labels(labels.stream(), d.labels);
  labels.close();
  Output golden((dir / "golden.tsv").string());
  write_golden(golden.stream(), d.golden, d.labels);
  golden.close();

  ordered_json truth = ordered_json::object();
  truth["seed"] = f.seed;
  ordered_json q = ordered_json::object(), diff = ordered_json::object(), e = ordered_json::object();
  for (int j = 0; j < d.labels.n_objects(); ++j) {
    q[d.labels.object_ids()[j]] = d.true_q[j];
    diff[d.labels.object_ids()[j]] = d.true_d[j];
  }
  for (int w = 0; w < cfg.n_workers; ++w) e["w" + std::to_string(w)] = d.true_e[w];
  truth["q"] = std::move(q);
  truth["expertise"] = std::move(e);
  truth["difficulty"] = std::move(diff);
  Output params((dir / "true_params.json").string());
  params.stream() << truth.dump(2) << '\n';
  params.close();
}

// ---- mse-experiment -------------------------------------------------------

void cmd_mse(const SynthFlags& f, int sims) {
  f.cg.validate();
  Output out(f.out);
  synth::SynthConfig cfg = f.cfg;
  cfg.seed = f.seed;
  const auto ex = synth::run_mse_experiment(cfg, sims, f.cg);
  auto& s = csv(out.stream());
  s << "sim,mse_la,mse_da\n";
  for (std::size_t i = 0; i < ex.sims.size(); ++i) {
    if (ex.sims[i].failed)
      s << i << ",nan,nan\n";
    else
      s << i << ',' << ex.sims[i].mse_la << ',' << ex.sims[i].mse_da << '\n';
  }
  s << "summary," << ex.mse_la.mean << ',' << ex.mse_da.mean << '\n';
  out.close();
}

// ---- overlap-sweep --------------------------------------------------------

struct SweepFlags : CommonFlags {
  std::string labels, golden;
  int n_min = 3;
  int n_max = 0;
  int sims = 10;
};

void cmd_sweep(const SweepFlags& f) {
  f.cg.validate();
  Output out(f.out);
  const LabelMatrix data = ingest_labels(f.labels);
  const GoldenSet golden = ingest_golden(f.golden, data);
  int n_max = f.n_max;
  if (n_max == 0)
    for (int j = 0; j < data.n_objects(); ++j) n_max = std::max<int>(n_max, data.by_object(j).size());
  const auto rows = synth::run_overlap_sweep(data, golden, f.n_min, n_max, f.sims, f.seed, f.cg);
  auto& s = csv(out.stream());
  s << "n,mean_labels,acc_la,acc_da,logloss_la,logloss_da\n";
  for (const auto& r : rows)
    s << r.n << ',' << r.mean_labels << ',' << r.acc_la << ',' << r.acc_da << ',' << r.logloss_la << ','
      << r.logloss_da << '\n';
  out.close();
}

// ---- theory-curves --------------------------------------------------------

struct CurveFlags : CommonFlags {
  std::vector<int> n{5, 10, 20};
  std::vector<double> a{0.6, 0.7, 0.8, 0.9};
  double r = 0.5;
  int points = 101;
};

void cmd_curves(const CurveFlags& f) {
  for (double a : f.a)
    if (!(a > 0.5 && a <= 1.0)) throw UsageError("--a values must lie in (0.5, 1]");
  for (int n : f.n)
    if (n < 1) throw UsageError("--n values must be >= 1");
  Output out(f.out);
  const auto rows = theory::bias_curves(f.n, f.a, f.r, f.points);
  auto& s = csv(out.stream());
  s << "q,n,a,r,e_la,e_da\n";
  for (const auto& row : rows)
    s << row.q << ',' << row.n << ',' << row.a << ',' << row.r << ',' << row.e_la << ',' << row.e_da << '\n';
  out.close();
}

void emit_error(const std::string& kind, const std::string& message,
                const std::vector<std::string>& offenders = {}) {
  ordered_json e = {{"error", {{"kind", kind}, {"message", message}}}};
  if (!offenders.empty()) e["error"]["offenders"] = offenders;
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced label aggregation under latent-label and latent-distribution models"};
  app.require_subcommand(1);

  FitFlags fit_f;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a consensus model and write a FitReport JSON");
  fit_cmd->add_option("--model", fit_f.model, "la-ds, da-ds, la-glad, da-glad, la-mme, da-mme or rfe")->required();
  fit_cmd->add_option("--labels", fit_f.labels, "worker<TAB>object<TAB>label file")->required();
  fit_cmd->add_option("--out", fit_f.out, "Output path (default stdout)");
  fit_cmd->add_option("--seed", fit_f.seed, "Recorded in the report; fitting is deterministic");
  fit_cmd->add_flag("--no-timing", fit_f.no_timing, "Omit wall time so reruns are byte-identical");
  add_cg_flags(fit_cmd, fit_f);

  EvalFlags eval_f;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a FitReport against golden labels");
  eval_cmd->add_option("--report", eval_f.report, "FitReport JSON written by fit")->required();
  eval_cmd->add_option("--golden", eval_f.golden, "object<TAB>label file")->required();
  eval_cmd->add_option("--out", eval_f.out, "Output path (default stdout)");
  eval_cmd->add_option("--seed", eval_f.seed, "Tie-breaking seed");

  SynthFlags synth_f;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic latent-distribution GLAD data set");
  synth_cmd->add_option("--out", synth_f.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_f.seed);
  synth_cmd->add_option("--n-objects", synth_f.cfg.n_objects)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-workers", synth_f.cfg.n_workers)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--labels-per-object", synth_f.cfg.labels_per_object, "0: every worker labels every object");

  SynthFlags mse_f;
  int mse_sims = 10;
  auto* mse_cmd = app.add_subcommand("mse-experiment", "Repeated LA vs DA GLAD fits on synthetic data");
  mse_cmd->add_option("--out", mse_f.out, "CSV path (default stdout)");
  mse_cmd->add_option("--seed", mse_f.seed);
  mse_cmd->add_option("--sims", mse_sims)->check(CLI::PositiveNumber);
  mse_cmd->add_option("--n-objects", mse_f.cfg.n_objects)->check(CLI::PositiveNumber);
  mse_cmd->add_option("--n-workers", mse_f.cfg.n_workers)->check(CLI::PositiveNumber);
  add_cg_flags(mse_cmd, mse_f);

  SweepFlags sweep_f;
  auto* sweep_cmd = app.add_subcommand("overlap-sweep", "Accuracy and log loss against labels per object");
  sweep_cmd->add_option("--labels", sweep_f.labels)->required();
  sweep_cmd->add_option("--golden", sweep_f.golden)->required();
  sweep_cmd->add_option("--out", sweep_f.out, "CSV path (default stdout)");
  sweep_cmd->add_option("--seed", sweep_f.seed);
  sweep_cmd->add_option("--sims", sweep_f.sims)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--overlap-min", sweep_f.n_min)->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--overlap-max", sweep_f.n_max, "Default: largest labels per object");
  add_cg_flags(sweep_cmd, sweep_f);

  CurveFlags curve_f;
  auto* curve_cmd = app.add_subcommand("theory-curves", "Expected LA and DA estimates of a single object");
  curve_cmd->add_option("--n", curve_f.n, "Comma-separated label counts")->delimiter(',');
  curve_cmd->add_option("--a", curve_f.a, "Comma-separated worker accuracies")->delimiter(',');
  curve_cmd->add_option("--r", curve_f.r, "Latent-label prior")->check(CLI::Range(0.0, 1.0));
  curve_cmd->add_option("--points", curve_f.points, "Grid points over q");
  curve_cmd->add_option("--out", curve_f.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage_error", e.what());
    return 2;
  }

  try {
    if (*fit_cmd) cmd_fit(fit_f);
    if (*eval_cmd) cmd_evaluate(eval_f);
    if (*synth_cmd) cmd_synth(synth_f);
    if (*mse_cmd) cmd_mse(mse_f, mse_sims);
    if (*sweep_cmd) cmd_sweep(sweep_f);
    if (*curve_cmd) cmd_curves(curve_f);
  } catch (const MismatchError& e) {
    emit_error("mismatch", e.what(), e.offenders);
    return 1;
  } catch (const UsageError& e) {
    emit_error("usage_error", e.what());
    return 2;
  } catch (const DataError& e) {
    emit_error("data_error", e.what());
    return 1;
  } catch (const ModelError& e) {
    emit_error("model_error", e.what());
    return 1;
  } catch (const std::exception& e) {
    emit_error("error", e.what());
    return 1;
  }
  return 0;
}
