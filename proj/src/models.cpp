#include "consensus/models.hpp"

#include <algorithm>
#include <stdexcept>

namespace consensus {

std::string ModelId::name() const {
  std::string s = latent_label() ? "la-" : "da-";
  switch (family) {
    case Family::DS: return s + "ds";
    case Family::GLAD: return s + "glad";
    case Family::MME: return s + "mme";
  }
  return s;
}

ModelId ModelId::parse(std::string_view name) {
  for (const auto& m : all())
    if (m.name() == name) return m;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

const std::vector<ModelId>& ModelId::all() {
  static const std::vector<ModelId> models = {
      {Family::DS, Assumption::LatentLabel},   {Family::DS, Assumption::LatentDistribution},
      {Family::GLAD, Assumption::LatentLabel}, {Family::GLAD, Assumption::LatentDistribution},
      {Family::MME, Assumption::LatentLabel},  {Family::MME, Assumption::LatentDistribution}};
  return models;
}

double cond_mme(const Eigen::MatrixXd& worker, const Eigen::MatrixXd& object, int z, int y) {
  Eigen::VectorXd scores = (worker.row(z) + object.row(z)).transpose();
  return simplex_param(scores)(y);
}

ParamLayout::ParamLayout(ModelId model, int n_objects, int n_workers, int n_classes)
    : model_(model), J_(n_objects), W_(n_workers), K_(n_classes) {
  if (K_ < 2) throw std::invalid_argument("need at least 2 classes");
  const Eigen::Index KK = static_cast<Eigen::Index>(K_) * K_;
  Eigen::Index lengths[4] = {0, 0, 0, 0};
  if (model.family == Family::DS && model.latent_label()) lengths[0] = K_;
  switch (model.family) {
    case Family::DS:
      lengths[1] = W_ * KK;
      break;
    case Family::GLAD:
      lengths[1] = W_;
      lengths[2] = J_;
      break;
    case Family::MME:
      lengths[1] = W_ * KK;
      lengths[2] = J_ * KK;
      break;
  }
  if (!model.latent_label()) lengths[3] = static_cast<Eigen::Index>(J_) * K_;
  for (int g = 0; g < 4; ++g) {
    ranges_[g] = {size_, lengths[g]};
    size_ += lengths[g];
  }
}

Eigen::Index ParamLayout::worker_offset(int w) const {
  const auto stride = model_.family == Family::GLAD ? 1 : static_cast<Eigen::Index>(K_) * K_;
  return range(ParamGroup::Workers).offset + w * stride;
}

Eigen::Index ParamLayout::object_offset(int j) const {
  const auto stride = model_.family == Family::GLAD ? 1 : static_cast<Eigen::Index>(K_) * K_;
  return range(ParamGroup::Objects).offset + j * stride;
}

Eigen::Index ParamLayout::distribution_offset(int j) const {
  return range(ParamGroup::Distributions).offset + static_cast<Eigen::Index>(j) * K_;
}

namespace {

void put_matrix(Eigen::VectorXd& x, Eigen::Index off, const Eigen::MatrixXd& m) {
  for (Eigen::Index z = 0; z < m.rows(); ++z)
    for (Eigen::Index y = 0; y < m.cols(); ++y) x[off + z * m.cols() + y] = m(z, y);
}

Eigen::MatrixXd get_matrix(const Eigen::VectorXd& x, Eigen::Index off, int K) {
  Eigen::MatrixXd m(K, K);
  for (int z = 0; z < K; ++z)
    for (int y = 0; y < K; ++y) m(z, y) = x[off + z * K + y];
  return m;
}

void check_shape(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) throw std::invalid_argument(std::string("parameter shape mismatch: ") + what);
}

}  // namespace

Eigen::VectorXd ParamLayout::encode(const ModelParams& params) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(size_);
  const Eigen::MatrixXd* q = nullptr;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DSParams>) {
          if (model_.family != Family::DS) throw std::invalid_argument("expected DS parameters");
          if (model_.latent_label()) {
            check_shape(p.prior.size(), K_, "prior");
            x.segment(range(ParamGroup::Prior).offset, K_) = simplex_unparam(p.prior);
          }
          check_shape(static_cast<Eigen::Index>(p.confusion.size()), W_, "confusion");
          for (int w = 0; w < W_; ++w) {
            Eigen::MatrixXd logits(K_, K_);
            for (int z = 0; z < K_; ++z)
              logits.row(z) = simplex_unparam(p.confusion[w].row(z).transpose()).transpose();
            put_matrix(x, worker_offset(w), logits);
          }
        } else if constexpr (std::is_same_v<T, GLADParams>) {
          if (model_.family != Family::GLAD) throw std::invalid_argument("expected GLAD parameters");
          check_shape(p.expertise.size(), W_, "expertise");
          check_shape(p.difficulty.size(), J_, "difficulty");
          for (int w = 0; w < W_; ++w) x[worker_offset(w)] = p.expertise[w];
          for (int j = 0; j < J_; ++j) x[object_offset(j)] = positive_unparam(p.difficulty[j]);
        } else {
          if (model_.family != Family::MME) throw std::invalid_argument("expected MME parameters");
          check_shape(static_cast<Eigen::Index>(p.worker.size()), W_, "worker matrices");
          check_shape(static_cast<Eigen::Index>(p.object.size()), J_, "object matrices");
          for (int w = 0; w < W_; ++w) put_matrix(x, worker_offset(w), p.worker[w]);
          for (int j = 0; j < J_; ++j) put_matrix(x, object_offset(j), p.object[j]);
        }
        q = &p.q;
      },
      params);
  if (!model_.latent_label()) {
    check_shape(q->rows(), J_, "q");
    check_shape(q->cols(), K_, "q");
    for (int j = 0; j < J_; ++j)
      x.segment(distribution_offset(j), K_) = simplex_unparam(q->row(j).transpose());
  }
  return x;
}

ModelParams ParamLayout::decode(const Eigen::VectorXd& x) const {
  check_shape(x.size(), size_, "coordinate vector");
  Eigen::MatrixXd q;
  if (!model_.latent_label()) {
    q.resize(J_, K_);
    for (int j = 0; j < J_; ++j) q.row(j) = simplex_param(x.segment(distribution_offset(j), K_)).transpose();
  }
  switch (model_.family) {
    case Family::DS: {
      DSParams p;
      if (model_.latent_label()) p.prior = simplex_param(x.segment(range(ParamGroup::Prior).offset, K_));
      for (int w = 0; w < W_; ++w) {
        Eigen::MatrixXd m = get_matrix(x, worker_offset(w), K_);
        for (int z = 0; z < K_; ++z) m.row(z) = simplex_param(m.row(z).transpose()).transpose();
        p.confusion.push_back(std::move(m));
      }
      p.q = std::move(q);
      return p;
    }
    case Family::GLAD: {
      GLADParams p;
      p.expertise.resize(W_);
      p.difficulty.resize(J_);
      for (int w = 0; w < W_; ++w) p.expertise[w] = x[worker_offset(w)];
      for (int j = 0; j < J_; ++j) p.difficulty[j] = positive_param(x[object_offset(j)]);
      p.q = std::move(q);
      return p;
    }
    case Family::MME: {
      MMEParams p;
      for (int w = 0; w < W_; ++w) p.worker.push_back(get_matrix(x, worker_offset(w), K_));
      for (int j = 0; j < J_; ++j) p.object.push_back(get_matrix(x, object_offset(j), K_));
      p.q = std::move(q);
      return p;
    }
  }
  throw std::logic_error("unreachable");
}

namespace detail {
void throw_nonfinite(const LabelMatrix& data, int j) {
  throw ModelError("log-likelihood not finite at object '" + data.object_ids()[j] + "'");
}
}  // namespace detail

double log_likelihood(const ParamLayout& layout, const LabelMatrix& data, const Eigen::VectorXd& x) {
  return log_likelihood<double>(layout, data, std::span<const double>(x.data(), x.size()));
}

LikelihoodEval log_likelihood_with_gradient(const ParamLayout& layout, const LabelMatrix& data,
                                            const Eigen::VectorXd& x) {
  ad::Tape tape;
  const std::size_t KK = static_cast<std::size_t>(layout.n_classes()) * layout.n_classes();
  tape.reserve(x.size() + data.n_labels() * (KK + 3 * layout.n_classes() + 4),
               data.n_labels() * (2 * KK + 4 * layout.n_classes() + 4));
  std::vector<ad::Var> vars;
  vars.reserve(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) vars.push_back(tape.input(x[i]));
  ad::Var out = log_likelihood<ad::Var>(layout, data, std::span<const ad::Var>(vars));
  return {out.value(), tape.gradient(out)};
}

DSParams init_ds(const LabelMatrix& data, Assumption assumption) {
  const int K = data.n_classes();
  const Eigen::MatrixXd q_rfe = data.object_frequencies();
  DSParams p;
  p.confusion.assign(data.n_workers(), Eigen::MatrixXd::Zero(K, K));
  for (const auto& t : data.triples()) p.confusion[t.worker].col(t.label) += q_rfe.row(t.object).transpose();
  for (auto& m : p.confusion) {
    for (int z = 0; z < K; ++z) {
      const double s = m.row(z).sum();
      if (s > 0)
        m.row(z) /= s;
      else
        m.row(z).setConstant(1.0 / K);
    }
  }
  if (assumption == Assumption::LatentLabel)
    p.prior = data.label_frequencies();
  else
    p.q = q_rfe;
  return p;
}

GLADParams init_glad(const LabelMatrix& data, Assumption assumption) {
  GLADParams p;
  p.expertise = Eigen::VectorXd::Ones(data.n_workers());
  p.difficulty = Eigen::VectorXd::Constant(data.n_objects(), std::exp(1.0));
  if (assumption == Assumption::LatentDistribution) p.q = data.object_frequencies();
  return p;
}

MMEParams init_mme(const LabelMatrix& data, Assumption assumption) {
  const int K = data.n_classes();
  const Eigen::MatrixXd q_rfe = data.object_frequencies();
  const Eigen::MatrixXd r_rfe = data.worker_frequencies();
  MMEParams p;
  p.worker.assign(data.n_workers(), Eigen::MatrixXd::Zero(K, K));
  p.object.assign(data.n_objects(), Eigen::MatrixXd::Zero(K, K));
  for (const auto& t : data.triples()) {
    p.worker[t.worker].col(t.label) += q_rfe.row(t.object).transpose();
    p.object[t.object].row(t.label) += r_rfe.row(t.worker);
  }
  for (auto& m : p.worker) m = (m.array() + 1.0).log().matrix();
  for (auto& m : p.object) m = (m.array() + 1.0).log().matrix();
  if (assumption == Assumption::LatentDistribution) p.q = q_rfe;
  return p;
}

ModelParams init_params(ModelId model, const LabelMatrix& data) {
  switch (model.family) {
    case Family::DS: return init_ds(data, model.assumption);
    case Family::GLAD: return init_glad(data, model.assumption);
    case Family::MME: return init_mme(data, model.assumption);
  }
  throw std::logic_error("unreachable");
}

ConsensusResult consensus(const ParamLayout& layout, const LabelMatrix& data, const Eigen::VectorXd& x) {
  const int J = data.n_objects(), K = data.n_classes();
  ConsensusResult out{Eigen::MatrixXd(J, K), layout.model().latent_label()
                                                 ? Semantics::LatentPosterior
                                                 : Semantics::LatentDistribution};
  if (!layout.model().latent_label()) {
    for (int j = 0; j < J; ++j)
      out.probs.row(j) = simplex_param(x.segment(layout.distribution_offset(j), K)).transpose();
    return out;
  }
  // Posterior in the log domain, normalized per object.
  const std::span<const double> coords(x.data(), x.size());
  detail::LogConditionals<double> cond(layout, coords);
  Eigen::VectorXd log_prior = Eigen::VectorXd::Constant(K, -std::log(static_cast<double>(K)));
  if (layout.model().family == Family::DS) {
    const Eigen::VectorXd prior = simplex_param(x.segment(layout.range(ParamGroup::Prior).offset, K));
    log_prior = prior.array().log().matrix();
  }
  std::vector<double> lc;
  for (int j = 0; j < J; ++j) {
    Eigen::VectorXd joint = log_prior;
    for (const auto& r : data.by_object(j)) {
      cond.compute(j, r.index, r.label, lc);
      for (int z = 0; z < K; ++z) joint[z] += lc[z];
    }
    out.probs.row(j) = simplex_param(joint).transpose();
  }
  return out;
}

ConsensusResult rfe(const LabelMatrix& data, bool smoothed) {
  const int J = data.n_objects(), K = data.n_classes();
  ConsensusResult out{Eigen::MatrixXd::Zero(J, K), Semantics::LatentDistribution};
  for (int j = 0; j < J; ++j) {
    for (const auto& r : data.by_object(j)) out.probs(j, r.label) += 1.0;
    if (smoothed) out.probs.row(j).array() += 1.0;
    out.probs.row(j) /= out.probs.row(j).sum();
  }
  return out;
}

FitResult fit(ModelId model, const LabelMatrix& data, const FitOptions& options) {
  const ParamLayout layout(model, data);
  const ModelParams init = options.init ? *options.init : init_params(model, data);
  Eigen::VectorXd x = layout.encode(init);

  const bool frozen[4] = {options.freeze_prior, options.freeze_workers, options.freeze_objects,
                          options.freeze_distributions};
  std::vector<Eigen::Index> free;
  for (int g = 0; g < 4; ++g) {
    if (frozen[g]) continue;
    const auto r = layout.range(static_cast<ParamGroup>(g));
    for (Eigen::Index i = 0; i < r.length; ++i) free.push_back(r.offset + i);
  }
  const auto n_free = static_cast<Eigen::Index>(free.size());

  Eigen::VectorXd full = x;
  ObjectiveHandle objective{
      [&](const Eigen::VectorXd& sub, Eigen::VectorXd& grad) {
        for (Eigen::Index i = 0; i < n_free; ++i) full[free[i]] = sub[i];
        try {
          const auto eval = log_likelihood_with_gradient(layout, data, full);
          for (Eigen::Index i = 0; i < n_free; ++i) grad[i] = eval.gradient[free[i]];
          return eval.value;
        } catch (const ModelError&) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      n_free};

  Eigen::VectorXd x0(n_free);
  for (Eigen::Index i = 0; i < n_free; ++i) x0[i] = x[free[i]];

  OptResult opt;
  try {
    opt = maximize(objective, std::move(x0), options.cg);
  } catch (const NonFiniteObjective& e) {
    throw ModelError(model.name() + ": " + e.what());
  }
  for (Eigen::Index i = 0; i < n_free; ++i) x[free[i]] = opt.x[i];

  FitResult result{model,
                   layout.decode(x),
                   x,
                   consensus(layout, data, x),
                   std::move(opt.trace),
                   opt.value};
  return result;
}

}  // namespace consensus
