#pragma once

// The six likelihood models: {latent-label, latent-distribution} x
// {Dawid-Skene, GLAD, minimax-entropy conditional}, plus the relative
// frequency baseline.
//
// Every model is optimized in unconstrained coordinates laid out by
// ParamLayout. The log-likelihood is a template over the scalar type so the
// same expression is evaluated on plain doubles and recorded on an AD tape.

#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "consensus/autodiff.hpp"
#include "consensus/label_data.hpp"
#include "consensus/numeric.hpp"
#include "consensus/optimizer.hpp"

namespace consensus {

enum class Family { DS, GLAD, MME };
enum class Assumption { LatentLabel, LatentDistribution };

struct ModelId {
  Family family;
  Assumption assumption;

  bool latent_label() const { return assumption == Assumption::LatentLabel; }
  std::string name() const;
  /// Accepts la-ds, da-ds, la-glad, da-glad, la-mme, da-mme.
  static ModelId parse(std::string_view name);
  static const std::vector<ModelId>& all();

  friend bool operator==(const ModelId&, const ModelId&) = default;
};

/// Dawid-Skene: confusion[w](z, y) = P(observed y | latent z).
struct DSParams {
  ProbLabel prior;                       // latent-label only
  std::vector<Eigen::MatrixXd> confusion;
  Eigen::MatrixXd q;                     // J x K, latent-distribution only
};

struct GLADParams {
  Eigen::VectorXd expertise;
  Eigen::VectorXd difficulty;  // > 0
  Eigen::MatrixXd q;
};

struct MMEParams {
  std::vector<Eigen::MatrixXd> worker;
  std::vector<Eigen::MatrixXd> object;
  Eigen::MatrixXd q;
};

using ModelParams = std::variant<DSParams, GLADParams, MMEParams>;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Conditional label probabilities P(y | z).

inline double cond_ds(const Eigen::MatrixXd& confusion, int z, int y) { return confusion(z, y); }

template <class Scalar>
Scalar cond_glad(const Scalar& expertise, const Scalar& difficulty, int z, int y, int K) {
  using std::exp;
  Scalar a = 1.0 / (1.0 + exp(-(expertise * difficulty)));
  if (y == z) return a;
  return (1.0 - a) / static_cast<double>(K - 1);
}

double cond_mme(const Eigen::MatrixXd& worker, const Eigen::MatrixXd& object, int z, int y);

enum class ParamGroup { Prior, Workers, Objects, Distributions };

/// Position of every parameter group inside the unconstrained vector.
///   prior          K logits (la-ds only)
///   workers        DS/MME: W blocks of K*K row-major logits/scores; GLAD: W expertises
///   objects        GLAD: J log-difficulties; MME: J blocks of K*K scores
///   distributions  J blocks of K logits (latent-distribution models)
class ParamLayout {
 public:
  struct Range {
    Eigen::Index offset = 0;
    Eigen::Index length = 0;
  };

  ParamLayout(ModelId model, int n_objects, int n_workers, int n_classes);
  ParamLayout(ModelId model, const LabelMatrix& data)
      : ParamLayout(model, data.n_objects(), data.n_workers(), data.n_classes()) {}

  const ModelId& model() const { return model_; }
  int n_objects() const { return J_; }
  int n_workers() const { return W_; }
  int n_classes() const { return K_; }
  Eigen::Index size() const { return size_; }
  Range range(ParamGroup g) const { return ranges_[static_cast<int>(g)]; }

  Eigen::Index worker_offset(int w) const;
  Eigen::Index object_offset(int j) const;
  Eigen::Index distribution_offset(int j) const;

  /// Constrained -> unconstrained. Probabilities are floored at 1e-8 before
  /// taking logs.
  Eigen::VectorXd encode(const ModelParams& params) const;
  ModelParams decode(const Eigen::VectorXd& x) const;

 private:
  ModelId model_;
  int J_, W_, K_;
  Eigen::Index size_ = 0;
  Range ranges_[4];
};

namespace detail {

template <std::floating_point T>
T value_of(T v) {
  return v;
}
inline double value_of(const ad::Var& v) { return v.value(); }

template <std::floating_point T>
T sum(std::span<const T> xs) {
  T s = 0;
  for (T x : xs) s += x;
  return s;
}

template <class Scalar>
Scalar lse_of(const std::vector<Scalar>& xs) {
  return logsumexp(std::span<const Scalar>(xs));
}

template <class Scalar>
Scalar sum_of(const std::vector<Scalar>& xs) {
  return sum(std::span<const Scalar>(xs));
}

/// Writes log P(y | z) for z = 0..K-1 of every label of object j into `out`
/// (one K-block per entry of data.by_object(j)). `cache` holds per-worker
/// normalizers for DS and per-object difficulties for GLAD.
template <class Scalar>
struct LogConditionals {
  const ParamLayout& layout;
  std::span<const Scalar> x;
  std::vector<Scalar> ds_row_lse;  // W*K
  std::vector<Scalar> difficulty;  // J

  LogConditionals(const ParamLayout& l, std::span<const Scalar> coords) : layout(l), x(coords) {
    const int K = layout.n_classes();
    switch (layout.model().family) {
      case Family::DS: {
        ds_row_lse.reserve(static_cast<std::size_t>(layout.n_workers()) * K);
        std::vector<Scalar> row(K);
        for (int w = 0; w < layout.n_workers(); ++w) {
          const auto off = layout.worker_offset(w);
          for (int z = 0; z < K; ++z) {
            for (int y = 0; y < K; ++y) row[y] = x[off + z * K + y];
            ds_row_lse.push_back(lse_of(row));
          }
        }
        break;
      }
      case Family::GLAD: {
        using std::exp;
        difficulty.reserve(layout.n_objects());
        for (int j = 0; j < layout.n_objects(); ++j) difficulty.push_back(exp(x[layout.object_offset(j)]));
        break;
      }
      case Family::MME:
        break;
    }
  }

  // log P(y | z) for every z, for worker w's label y on object j.
  void compute(int j, int w, int y, std::vector<Scalar>& out) const {
    const int K = layout.n_classes();
    out.clear();
    switch (layout.model().family) {
      case Family::DS: {
        const auto off = layout.worker_offset(w);
        for (int z = 0; z < K; ++z) out.push_back(x[off + z * K + y] - ds_row_lse[w * K + z]);
        break;
      }
      case Family::GLAD: {
        Scalar s = x[layout.worker_offset(w)] * difficulty[j];
        Scalar log_a = log_sigmoid(s);
        Scalar log_miss = log_sigmoid(-s) - std::log(static_cast<double>(K - 1));
        for (int z = 0; z < K; ++z) out.push_back(z == y ? log_a : log_miss);
        break;
      }
      case Family::MME: {
        const auto wo = layout.worker_offset(w);
        const auto jo = layout.object_offset(j);
        std::vector<Scalar> scores(K);
        for (int z = 0; z < K; ++z) {
          for (int c = 0; c < K; ++c) scores[c] = x[wo + z * K + c] + x[jo + z * K + c];
          out.push_back(scores[y] - lse_of(scores));
        }
        break;
      }
    }
  }
};

[[noreturn]] void throw_nonfinite(const LabelMatrix& data, int j);

}  // namespace detail

/// Latent-label log-likelihood:
///   sum_j log sum_z P(z) prod_{w in W_j} P(y_jw | z)
/// with P(z) = softmax(prior logits) for DS and 1/K for GLAD/MME.
template <class Scalar>
Scalar loglik_la(const ParamLayout& layout, const LabelMatrix& data, std::span<const Scalar> x) {
  const int K = layout.n_classes();
  detail::LogConditionals<Scalar> cond(layout, x);

  std::vector<Scalar> log_prior;
  double uniform_log_prior = -std::log(static_cast<double>(K));
  if (layout.model().family == Family::DS) {
    const auto off = layout.range(ParamGroup::Prior).offset;
    std::vector<Scalar> logits(x.begin() + off, x.begin() + off + K);
    Scalar norm = detail::lse_of(logits);
    for (int z = 0; z < K; ++z) log_prior.push_back(logits[z] - norm);
  }

  std::vector<Scalar> per_object;
  per_object.reserve(data.n_objects());
  std::vector<std::vector<Scalar>> by_class(K);
  std::vector<Scalar> lc, joint(K);
  for (int j = 0; j < data.n_objects(); ++j) {
    const auto& labels = data.by_object(j);
    for (auto& v : by_class) v.clear();
    for (const auto& r : labels) {
      cond.compute(j, r.index, r.label, lc);
      for (int z = 0; z < K; ++z) by_class[z].push_back(lc[z]);
    }
    for (int z = 0; z < K; ++z) {
      Scalar s = detail::sum_of(by_class[z]);
      joint[z] = log_prior.empty() ? s + uniform_log_prior : s + log_prior[z];
    }
    per_object.push_back(detail::lse_of(joint));
    if (!std::isfinite(detail::value_of(per_object.back()))) detail::throw_nonfinite(data, j);
  }
  return detail::sum_of(per_object);
}

/// Latent-distribution log-likelihood:
///   sum_j sum_{w in W_j} log sum_z q_j(z) P(y_jw | z)
template <class Scalar>
Scalar loglik_da(const ParamLayout& layout, const LabelMatrix& data, std::span<const Scalar> x) {
  const int K = layout.n_classes();
  detail::LogConditionals<Scalar> cond(layout, x);

  std::vector<Scalar> terms;
  terms.reserve(data.n_labels());
  std::vector<Scalar> logits(K), log_q(K), lc, mix(K);
  for (int j = 0; j < data.n_objects(); ++j) {
    const auto off = layout.distribution_offset(j);
    for (int z = 0; z < K; ++z) logits[z] = x[off + z];
    Scalar norm = detail::lse_of(logits);
    for (int z = 0; z < K; ++z) log_q[z] = logits[z] - norm;
    for (const auto& r : data.by_object(j)) {
      cond.compute(j, r.index, r.label, lc);
      for (int z = 0; z < K; ++z) mix[z] = log_q[z] + lc[z];
      terms.push_back(detail::lse_of(mix));
      if (!std::isfinite(detail::value_of(terms.back()))) detail::throw_nonfinite(data, j);
    }
  }
  return detail::sum_of(terms);
}

template <class Scalar>
Scalar log_likelihood(const ParamLayout& layout, const LabelMatrix& data, std::span<const Scalar> x) {
  if (static_cast<Eigen::Index>(x.size()) != layout.size())
    throw std::invalid_argument("parameter vector does not match layout");
  return layout.model().latent_label() ? loglik_la<Scalar>(layout, data, x)
                                       : loglik_da<Scalar>(layout, data, x);
}

double log_likelihood(const ParamLayout& layout, const LabelMatrix& data, const Eigen::VectorXd& x);

struct LikelihoodEval {
  double value;
  Eigen::VectorXd gradient;
};

/// Value and exact gradient via a freshly recorded tape.
LikelihoodEval log_likelihood_with_gradient(const ParamLayout& layout, const LabelMatrix& data,
                                            const Eigen::VectorXd& x);

// Initialization.

DSParams init_ds(const LabelMatrix& data, Assumption assumption);
GLADParams init_glad(const LabelMatrix& data, Assumption assumption);
MMEParams init_mme(const LabelMatrix& data, Assumption assumption);
ModelParams init_params(ModelId model, const LabelMatrix& data);

// Consensus outputs.

enum class Semantics { LatentPosterior, LatentDistribution };

struct ConsensusResult {
  Eigen::MatrixXd probs;  // J x K, each row a ProbLabel
  Semantics semantics;
};

/// Posterior over the latent label (latent-label models) or the fitted q_j
/// (latent-distribution models) at unconstrained point x.
ConsensusResult consensus(const ParamLayout& layout, const LabelMatrix& data, const Eigen::VectorXd& x);

/// Relative label frequencies per object; `smoothed` adds one to every class count.
ConsensusResult rfe(const LabelMatrix& data, bool smoothed = false);

struct FitOptions {
  CGConfig cg;
  std::optional<ModelParams> init;
  bool freeze_prior = false;
  bool freeze_workers = false;
  bool freeze_objects = false;
  bool freeze_distributions = false;
};

struct FitResult {
  ModelId model;
  ModelParams params;
  Eigen::VectorXd coords;
  ConsensusResult consensus;
  OptTrace trace;
  double log_likelihood;
};

/// Initializes, maximizes the matching log-likelihood by conjugate gradient
/// over the non-frozen coordinates, and returns the consensus at the optimum.
FitResult fit(ModelId model, const LabelMatrix& data, const FitOptions& options = {});

}  // namespace consensus
