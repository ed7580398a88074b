#include "consensus/models.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace consensus {
namespace {

const ModelId kLaDs{Family::DS, Assumption::LatentLabel};
const ModelId kDaDs{Family::DS, Assumption::LatentDistribution};
const ModelId kLaGlad{Family::GLAD, Assumption::LatentLabel};
const ModelId kDaGlad{Family::GLAD, Assumption::LatentDistribution};

LabelMatrix make(std::vector<Triple> triples, int W, int J, int K) {
  std::vector<std::string> wid, oid, tok;
  for (int w = 0; w < W; ++w) wid.push_back("w" + std::to_string(w));
  for (int j = 0; j < J; ++j) oid.push_back("o" + std::to_string(j));
  for (int k = 0; k < K; ++k) tok.push_back(std::to_string(k));
  return LabelMatrix(std::move(triples), wid, oid, LabelEncoding(tok));
}

// One object labelled by 210 distinct workers: 110 ones and 100 zeros.
LabelMatrix two_hundred_ten_workers() {
  std::vector<Triple> t;
  for (int w = 0; w < 210; ++w) t.push_back({w, 0, w < 110 ? 1 : 0});
  return make(std::move(t), 210, 1, 2);
}

DSParams symmetric_workers(int W, double a, Assumption assumption, int J = 1) {
  DSParams p;
  Eigen::Matrix2d c;
  c << a, 1 - a, 1 - a, a;
  p.confusion.assign(W, c);
  if (assumption == Assumption::LatentLabel)
    p.prior = Eigen::Vector2d(0.5, 0.5);
  else
    p.q = Eigen::MatrixXd::Constant(J, 2, 0.5);
  return p;
}

TEST(ModelId, ParsesAllSixNames) {
  for (const auto& m : ModelId::all()) EXPECT_EQ(ModelId::parse(m.name()), m);
  EXPECT_EQ(ModelId::parse("da-mme").family, Family::MME);
  EXPECT_THROW(ModelId::parse("rfe"), std::invalid_argument);
}

TEST(Conditionals, DawidSkene) {
  Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  EXPECT_EQ(cond_ds(id, 1, 1), 1.0);
  EXPECT_EQ(cond_ds(id, 0, 1), 0.0);
  Eigen::Matrix3d u = Eigen::Matrix3d::Constant(1.0 / 3);
  EXPECT_DOUBLE_EQ(cond_ds(u, 2, 0), 1.0 / 3);
  Eigen::Matrix2d m;
  m << 0.8, 0.2, 0.3, 0.7;
  EXPECT_EQ(cond_ds(m, 0, 1), 0.2);
}

TEST(Conditionals, Glad) {
  EXPECT_NEAR(cond_glad(50.0, 1.0, 0, 0, 2), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cond_glad(0.0, 3.0, 0, 0, 2), 0.5);
  EXPECT_DOUBLE_EQ(cond_glad(0.0, 3.0, 0, 1, 2), 0.5);
  // (1 - sigmoid(1)) / 2 with sigmoid(1) = 0.7310585786300049
  EXPECT_NEAR(cond_glad(1.0, 1.0, 0, 2, 3), 0.13447071068499756, 1e-15);
  double total = 0.0;
  for (int y = 0; y < 3; ++y) total += cond_glad(0.7, 1.9, 1, y, 3);
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Conditionals, MinimaxEntropy) {
  Eigen::Matrix3d zero = Eigen::Matrix3d::Zero();
  EXPECT_NEAR(cond_mme(zero, zero, 1, 2), 1.0 / 3, 1e-15);
  Eigen::Matrix2d e = Eigen::Matrix2d::Zero();
  e(0, 0) = std::log(2.0);
  EXPECT_NEAR(cond_mme(e, Eigen::Matrix2d::Zero(), 0, 0), 2.0 / 3, 1e-15);
  EXPECT_NEAR(cond_mme(e, Eigen::Matrix2d::Zero(), 0, 1), 1.0 / 3, 1e-15);
}

TEST(ConditionalsProperty, MmeRowShiftInvariance) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd e = oracle::random_coords(rng, 9).reshaped(3, 3);
    Eigen::MatrixXd d = oracle::random_coords(rng, 9).reshaped(3, 3);
    Eigen::MatrixXd shifted = e;
    const int z = trial % 3;
    shifted.row(z).array() += 5.0 * (trial - 10);
    for (int y = 0; y < 3; ++y) EXPECT_NEAR(cond_mme(e, d, z, y), cond_mme(shifted, d, z, y), 1e-12);
  }
}

TEST(LoglikLa, SingleLabelIdentityConfusion) {
  auto data = make({{0, 0, 1}}, 1, 1, 2);
  DSParams p;
  p.prior = Eigen::Vector2d(0.5, 0.5);
  p.confusion = {Eigen::Matrix2d::Identity()};
  // Identity rows are floored at 1e-8 in coordinates, so compare loosely.
  ParamLayout layout(kLaDs, data);
  EXPECT_NEAR(log_likelihood(layout, data, layout.encode(p)), std::log(0.5), 1e-7);
}

TEST(LoglikLa, TwoAgreeingPerfectWorkers) {
  auto data = make({{0, 0, 0}, {1, 0, 0}}, 2, 1, 2);
  DSParams p;
  p.prior = Eigen::Vector2d(0.5, 0.5);
  p.confusion.assign(2, Eigen::Matrix2d::Identity());
  ParamLayout layout(kLaDs, data);
  EXPECT_NEAR(log_likelihood(layout, data, layout.encode(p)), std::log(0.5), 1e-7);
}

TEST(LoglikDa, SingleLabelCollapsesToLogQ) {
  auto data = make({{0, 0, 1}}, 1, 1, 2);
  DSParams p;
  p.confusion = {Eigen::Matrix2d::Identity()};
  p.q = Eigen::RowVector2d(0.3, 0.7);
  ParamLayout layout(kDaDs, data);
  EXPECT_NEAR(log_likelihood(layout, data, layout.encode(p)), std::log(0.7), 1e-7);
}

// Both likelihoods against direct enumeration on random small instances.
TEST(LoglikProperty, MatchesBruteForce) {
  std::mt19937 rng(101);
  for (const auto& model : ModelId::all()) {
    for (int trial = 0; trial < 20; ++trial) {
      const int K = 2 + trial % 2;
      auto data = oracle::random_instance(rng, K);
      ParamLayout layout(model, data);
      Eigen::VectorXd x = oracle::random_coords(rng, layout.size());
      const double expected = oracle::loglik(model, layout.decode(x), data);
      EXPECT_NEAR(log_likelihood(layout, data, x), expected, 1e-12) << model.name();
      EXPECT_NEAR(log_likelihood_with_gradient(layout, data, x).value, expected, 1e-12) << model.name();
    }
  }
}

TEST(LoglikProperty, GradientMatchesFiniteDifferences) {
  std::mt19937 rng(202);
  for (const auto& model : ModelId::all()) {
    for (int trial = 0; trial < 20; ++trial) {
      auto data = oracle::random_instance(rng, 2 + trial % 2);
      ParamLayout layout(model, data);
      Eigen::VectorXd x = oracle::random_coords(rng, layout.size());
      EXPECT_LT(oracle::max_gradient_error(layout, data, x), 1e-4) << model.name() << " trial " << trial;
    }
  }
}

TEST(Loglik, NonFiniteTermNamesTheObject) {
  auto data = make({{0, 0, 1}, {0, 1, 0}}, 1, 2, 2);
  ParamLayout layout(kDaGlad, data);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.size());
  x.segment(layout.distribution_offset(1), 2).setConstant(-std::numeric_limits<double>::infinity());
  try {
    log_likelihood(layout, data, x);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("o1"), std::string::npos) << e.what();
  }
}

TEST(ParamLayout, EncodeDecodeRoundTrip) {
  std::mt19937 rng(7);
  for (const auto& model : ModelId::all()) {
    auto data = oracle::random_instance(rng, 3);
    ParamLayout layout(model, data);
    Eigen::VectorXd x = oracle::random_coords(rng, layout.size());
    auto params = layout.decode(x);
    Eigen::VectorXd again = layout.encode(params);
    // Equal up to the per-softmax-block gauge: compare decoded values.
    EXPECT_NEAR(oracle::loglik(model, layout.decode(again), data), oracle::loglik(model, params, data), 1e-12);
  }
}

TEST(InitDs, HandTracedRecipe) {
  // One worker, two objects, each with the single label 0; K = 2.
  auto data = make({{0, 0, 0}, {0, 1, 0}}, 1, 2, 2);
  auto p = init_ds(data, Assumption::LatentDistribution);
  EXPECT_DOUBLE_EQ(p.confusion[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(p.confusion[0](0, 1), 0.0);
  EXPECT_DOUBLE_EQ(p.confusion[0](1, 0), 0.5);  // empty row -> uniform
  EXPECT_DOUBLE_EQ(p.confusion[0](1, 1), 0.5);
  EXPECT_DOUBLE_EQ(p.q(0, 0), 1.0);
}

TEST(InitDs, PriorAndDistributions) {
  auto uniform = make({{0, 0, 0}, {0, 1, 1}, {0, 2, 2}}, 1, 3, 3);
  auto p = init_ds(uniform, Assumption::LatentLabel);
  for (int k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(p.prior[k], 1.0 / 3);

  auto single = make({{0, 0, 0}, {1, 0, 0}, {2, 0, 1}}, 3, 1, 2);
  auto q = init_ds(single, Assumption::LatentDistribution).q;
  EXPECT_DOUBLE_EQ(q(0, 0), 2.0 / 3);
  EXPECT_DOUBLE_EQ(q(0, 1), 1.0 / 3);
  for (const auto& m : init_ds(single, Assumption::LatentLabel).confusion)
    EXPECT_TRUE(m.rowwise().sum().isApprox(Eigen::Vector2d::Ones(), 1e-12));
}

TEST(InitGlad, ConstantsAndFrequencies) {
  auto data = make({{0, 0, 1}, {1, 0, 1}, {2, 0, 1}, {3, 0, 0}}, 4, 1, 2);
  auto p = init_glad(data, Assumption::LatentDistribution);
  EXPECT_TRUE((p.expertise.array() == 1.0).all());
  EXPECT_NEAR(p.difficulty[0], 2.718282, 1e-6);
  EXPECT_DOUBLE_EQ(p.q(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(p.q(0, 1), 0.75);
  ParamLayout layout(kDaGlad, data);
  EXPECT_NEAR(layout.encode(p)[layout.object_offset(0)], 1.0, 1e-15);
}

TEST(InitMme, SmoothedLogCounts) {
  // o0: w0 -> 0, w1 -> 0 gives q_rfe = (1, 0); o1: w0 -> 0, w1 -> 1 gives (0.5, 0.5).
  auto data = make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 1}}, 2, 2, 2);
  auto p = init_mme(data, Assumption::LatentDistribution);
  // w0 column 0 accumulates (1, 0) + (0.5, 0.5).
  EXPECT_NEAR(p.worker[0](0, 0), std::log(2.5), 1e-15);
  EXPECT_NEAR(p.worker[0](1, 0), std::log(1.5), 1e-15);
  EXPECT_EQ(p.worker[0](0, 1), 0.0);  // untouched cell -> log(0 + 1)
  // w0 always answers 0: r_rfe = (1, 0), added to row 0 of o0 and o1.
  EXPECT_EQ(data.worker_frequencies()(0, 0), 1.0);
  // o1 row 0 gets r_w0 = (1, 0); row 1 gets r_w1 = (0.5, 0.5).
  EXPECT_NEAR(p.object[1](0, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(p.object[1](1, 0), std::log(1.5), 1e-15);
  EXPECT_NEAR(p.object[1](1, 1), std::log(1.5), 1e-15);
  EXPECT_DOUBLE_EQ(p.q(1, 0), 0.5);
}

TEST(Fit, LatentDistributionRecoversSubjectiveShare) {
  auto data = two_hundred_ten_workers();
  FitOptions opt;
  opt.init = symmetric_workers(210, 0.8, Assumption::LatentDistribution);
  opt.freeze_workers = true;
  auto r = fit(kDaDs, data, opt);
  // argmax of 110 log(0.2 + 0.6 q) + 100 log(0.8 - 0.6 q) is q = (110/210 - 0.2) / 0.6
  EXPECT_NEAR(r.consensus.probs(0, 1), 0.5397, 1e-3);
  EXPECT_NEAR(r.consensus.probs(0, 1), (110.0 / 210 - 0.2) / 0.6, 1e-5);
  EXPECT_EQ(r.consensus.semantics, Semantics::LatentDistribution);
}

TEST(Fit, LatentLabelPosteriorIsNearlyCertain) {
  auto data = two_hundred_ten_workers();
  FitOptions opt;
  opt.init = symmetric_workers(210, 0.8, Assumption::LatentLabel);
  opt.freeze_workers = true;
  auto r = fit(kLaDs, data, opt);
  EXPECT_GT(r.consensus.probs(0, 1), 1.0 - 2.0 * std::pow(2.0, -20));
  EXPECT_EQ(r.consensus.semantics, Semantics::LatentPosterior);

  opt.freeze_prior = true;
  auto fixed_prior = fit(kLaDs, data, opt);
  EXPECT_GT(fixed_prior.consensus.probs(0, 1), 1.0 - 2.0 * std::pow(2.0, -20));
}

TEST(Fit, SingleObjectDaGladMatchesGridSearch) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int W = 12;
    GLADParams p;
    p.expertise.resize(W);
    for (int w = 0; w < W; ++w) p.expertise[w] = 0.2 + 2.0 * u(rng);
    p.difficulty = Eigen::VectorXd::Constant(1, 0.5 + u(rng));
    std::vector<Triple> t;
    for (int w = 0; w < W; ++w) t.push_back({w, 0, w % 3 == trial % 3 ? 0 : 1});
    auto data = make(t, W, 1, 2);
    p.q = data.object_frequencies();

    FitOptions opt;
    opt.init = p;
    opt.freeze_workers = opt.freeze_objects = true;
    auto r = fit(kDaGlad, data, opt);

    auto objective = [&](double q) {
      Eigen::MatrixXd qm(1, 2);
      qm << 1 - q, q;
      return oracle::loglik_da(p, data, qm);
    };
    EXPECT_NEAR(r.consensus.probs(0, 1), oracle::grid_argmax(objective), 2e-3) << "trial " << trial;
  }
}

TEST(Fit, DegenerateAgreementRecoversObservedClass) {
  std::vector<Triple> t;
  for (int j = 0; j < 4; ++j)
    for (int w = 0; w < 3; ++w) t.push_back({w, j, j % 2});
  auto data = make(t, 3, 4, 2);
  FitOptions opt;
  opt.init = symmetric_workers(3, 0.999, Assumption::LatentDistribution, 4);
  opt.freeze_workers = true;
  auto r = fit(kDaDs, data, opt);
  for (int j = 0; j < 4; ++j) EXPECT_GE(r.consensus.probs(j, j % 2), 0.99);
}

TEST(FitProperty, MonotoneTraceAndNormalizedConsensus) {
  std::mt19937 rng(44);
  for (const auto& model : ModelId::all()) {
    std::vector<Triple> t;
    for (int j = 0; j < 15; ++j)
      for (int w = 0; w < 6; ++w)
        if ((j + w) % 3 != 0) t.push_back({w, j, static_cast<int>(rng() % 3)});
    auto data = make(t, 6, 15, 3);
    auto r = fit(model, data);
    for (std::size_t i = 1; i < r.trace.records.size(); ++i)
      EXPECT_GE(r.trace.records[i].objective, r.trace.records[i - 1].objective) << model.name();
    EXPECT_GT(r.log_likelihood, r.trace.records.front().objective) << model.name();
    for (int j = 0; j < data.n_objects(); ++j) {
      EXPECT_NEAR(r.consensus.probs.row(j).sum(), 1.0, 1e-9);
      EXPECT_GE(r.consensus.probs.row(j).minCoeff(), 0.0);
    }
    ParamLayout layout(model, data);
    EXPECT_NEAR(oracle::loglik(model, r.params, data), r.log_likelihood, 1e-9) << model.name();
  }
}

TEST(Consensus, LatentLabelPosteriorMatchesEnumeration) {
  std::mt19937 rng(55);
  for (const auto& model : {kLaDs, kLaGlad, ModelId{Family::MME, Assumption::LatentLabel}}) {
    auto data = oracle::random_instance(rng, 3);
    ParamLayout layout(model, data);
    Eigen::VectorXd x = oracle::random_coords(rng, layout.size());
    auto params = layout.decode(x);
    auto c = consensus(layout, data, x);
    for (int j = 0; j < data.n_objects(); ++j) {
      Eigen::Vector3d joint;
      for (int z = 0; z < 3; ++z) {
        joint[z] = oracle::prior(params, z, 3);
        for (const auto& r : data.by_object(j)) joint[z] *= oracle::conditional(params, r.index, j, z, r.label, 3);
      }
      EXPECT_TRUE(c.probs.row(j).transpose().isApprox(joint / joint.sum(), 1e-12));
    }
  }
}

TEST(Rfe, CountsAndSmoothing) {
  auto data = make({{0, 0, 0}, {1, 0, 0}, {2, 0, 1}, {0, 1, 1}}, 3, 2, 3);
  auto plain = rfe(data);
  EXPECT_DOUBLE_EQ(plain.probs(0, 0), 2.0 / 3);
  EXPECT_DOUBLE_EQ(plain.probs(0, 1), 1.0 / 3);
  EXPECT_EQ(plain.probs(1, 1), 1.0);
  EXPECT_EQ(plain.probs(1, 0), 0.0);
  auto smooth = rfe(data, true);
  EXPECT_DOUBLE_EQ(smooth.probs(0, 0), 3.0 / 6);
  EXPECT_DOUBLE_EQ(smooth.probs(1, 0), 1.0 / 4);
  EXPECT_DOUBLE_EQ(smooth.probs(1, 1), 2.0 / 4);

  auto binary = make({{0, 0, 0}, {1, 0, 0}, {2, 0, 1}}, 3, 1, 2);
  EXPECT_DOUBLE_EQ(rfe(binary, true).probs(0, 0), 3.0 / 5);
  EXPECT_DOUBLE_EQ(rfe(binary, true).probs(0, 1), 2.0 / 5);
}

}  // namespace
}  // namespace consensus
