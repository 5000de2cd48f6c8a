#include "csilab/mlp.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "csilab/rng.hpp"
#include "csilab/train.hpp"

using namespace csilab;

namespace {

void expect_bits_equal(const VecR& a, const VecR& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_TRUE((a.array() == b.array()).all());
}

MlpModel zeroed(std::vector<int> dims, OutputHead head = OutputHead::kSoftmax) {
  MlpModel m = make_mlp(std::move(dims), head, 0);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  return m;
}

// Central finite differences against the analytic gradient, checking every
// coordinate unless a subsample is requested.
template <typename LossFn>
double max_fd_rel_error(VecR params, const VecR& grad, LossFn loss_at, int sample = 0,
                        std::uint64_t seed = 0) {
  const double step = 1e-5;
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(params.size()));
  std::iota(coords.begin(), coords.end(), 0);
  if (sample > 0 && sample < params.size()) {
    Rng rng(seed);
    for (std::size_t i = coords.size(); i > 1; --i)
      std::swap(coords[i - 1], coords[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
    coords.resize(static_cast<std::size_t>(sample));
  }
  double worst = 0.0;
  for (Eigen::Index c : coords) {
    const double keep = params[c];
    params[c] = keep + step;
    const double up = loss_at(params);
    params[c] = keep - step;
    const double dn = loss_at(params);
    params[c] = keep;
    const double fd = (up - dn) / (2.0 * step);
    const double rel = std::abs(fd - grad[c]) / std::max({std::abs(fd), std::abs(grad[c]), 1e-3});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace

TEST(MlpForward, ZeroParametersGiveUniformOutput) {
  MlpModel m = zeroed({3, 4, 5});
  const VecR p = mlp_forward(m, VecR::Zero(3));
  for (int k = 0; k < 5; ++k) EXPECT_DOUBLE_EQ(p[k], 0.2);
}

TEST(MlpForward, OutputIsSimplex) {
  MlpModel m = make_mlp({6, 10, 10, 4}, OutputHead::kSoftmax, 3);
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    VecR x(6);
    for (int i = 0; i < 6; ++i) x[i] = 3.0 * rng.normal();
    const VecR p = mlp_forward(m, x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(MlpForward, MatchesHandComputedSingleUnitChain) {
  MlpModel m = zeroed({2, 1, 2});
  m.weights[0] << 0.5, -1.0;
  m.biases[0] << 0.25;
  m.weights[1] << 2.0, -1.0;
  m.biases[1] << 0.1, -0.2;

  VecR x(2);
  x << 1.0, 0.5;
  // hidden: relu(0.5*1 - 1*0.5 + 0.25) = 0.25
  // logits: [2*0.25 + 0.1, -1*0.25 - 0.2] = [0.6, -0.45]
  const double e0 = std::exp(0.6), e1 = std::exp(-0.45);
  VecR p = mlp_forward(m, x);
  EXPECT_NEAR(p[0], e0 / (e0 + e1), 1e-12);
  EXPECT_NEAR(p[1], e1 / (e0 + e1), 1e-12);

  x << -1.0, 0.5;
  // hidden clips at zero, so only the output bias survives
  const double f0 = std::exp(0.1), f1 = std::exp(-0.2);
  p = mlp_forward(m, x);
  EXPECT_NEAR(p[0], f0 / (f0 + f1), 1e-12);
}

TEST(MlpForward, RejectsBadInput) {
  MlpModel m = make_mlp({3, 4, 2}, OutputHead::kSoftmax, 1);
  EXPECT_THROW(mlp_forward(m, VecR::Zero(2)), std::invalid_argument);
  VecR x(3);
  x << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
  EXPECT_THROW(mlp_forward(m, x), DegenerateInputError);
}

TEST(MlpForward, SpectrumHeadIsRawAffineOutput) {
  MlpModel m = zeroed({2, 2, 3}, OutputHead::kLogSpectrum);
  m.biases[1] << -1.0, 0.5, 2.0;
  const VecR y = mlp_forward(m, VecR::Zero(2));
  EXPECT_DOUBLE_EQ(y[0], -1.0);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
  EXPECT_DOUBLE_EQ(y[2], 2.0);
}

TEST(PredictTopk, FullKIsPermutation) {
  MlpModel m = make_mlp({4, 8, 6}, OutputHead::kSoftmax, 5);
  VecR x(4);
  x << 0.3, -1.0, 0.7, 0.2;
  std::vector<int> top = predict_topk(m, x, 6);
  std::vector<int> sorted = top;
  std::sort(sorted.begin(), sorted.end());
  for (int k = 0; k < 6; ++k) EXPECT_EQ(sorted[static_cast<std::size_t>(k)], k);
}

TEST(PredictTopk, UniformTieBreaksToSmallestIndex) {
  MlpModel m = zeroed({3, 2, 4});
  const std::vector<int> top = predict_topk(m, VecR::Zero(3), 2);
  EXPECT_EQ(top[0], 0);
  EXPECT_EQ(top[1], 1);
}

TEST(PredictTopk, AgreesWithFullSort) {
  MlpModel m = make_mlp({5, 12, 9}, OutputHead::kSoftmax, 6);
  Rng rng(7);
  for (int rep = 0; rep < 25; ++rep) {
    VecR x(5);
    for (int i = 0; i < 5; ++i) x[i] = rng.normal();
    const VecR p = mlp_forward(m, x);
    std::vector<int> order(9);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
    const std::vector<int> top = predict_topk(m, x, 4);
    for (int k = 0; k < 4; ++k) EXPECT_EQ(top[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
  }
}

TEST(MlpGradients, MatchesFiniteDifferencesClassifier) {
  MlpModel m = make_mlp({4, 5, 5, 3}, OutputHead::kSoftmax, 8);
  Rng rng(9);
  MatR x(6, 4);
  std::vector<int> y;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
    y.push_back(static_cast<int>(rng.uniform_int(0, 2)));
  }
  const MlpGradients g = mlp_gradients(m, x, y);
  const VecR grad = mlp_pack_gradients(m, g);
  const double worst = max_fd_rel_error(mlp_pack(m), grad, [&](const VecR& p) {
    MlpModel probe = m;
    mlp_unpack(probe, p);
    return mlp_loss(probe, x, y);
  });
  EXPECT_LE(worst, 1e-4);
}

TEST(MlpGradients, MatchesFiniteDifferencesSpectrum) {
  MlpModel m = make_mlp({3, 6, 4}, OutputHead::kLogSpectrum, 10);
  Rng rng(11);
  MatR x(5, 3), t(5, 4);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    for (int j = 0; j < 4; ++j) t(i, j) = rng.normal();
  }
  const MlpGradients g = mlp_gradients(m, x, t);
  const VecR grad = mlp_pack_gradients(m, g);
  const double worst = max_fd_rel_error(mlp_pack(m), grad, [&](const VecR& p) {
    MlpModel probe = m;
    mlp_unpack(probe, p);
    return mlp_loss(probe, x, t);
  });
  EXPECT_LE(worst, 1e-4);
}

TEST(MlpGradients, DuplicatedBatchLeavesMeanGradientUnchanged) {
  MlpModel m = make_mlp({3, 4, 2}, OutputHead::kSoftmax, 12);
  Rng rng(13);
  MatR x(4, 3);
  std::vector<int> y;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y.push_back(static_cast<int>(rng.uniform_int(0, 1)));
  }
  MatR x2(8, 3);
  x2 << x, x;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  const VecR g1 = mlp_pack_gradients(m, mlp_gradients(m, x, y));
  const VecR g2 = mlp_pack_gradients(m, mlp_gradients(m, x2, y2));
  EXPECT_LT((g1 - g2).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(MlpGradients, SaturatedCorrectPredictionHasVanishingGradient) {
  MlpModel m = zeroed({2, 2, 2});
  m.biases[1] << 1000.0, 0.0;  // softmax collapses to exactly one-hot in doubles
  MatR x(1, 2);
  x << 0.3, -0.4;
  const std::vector<int> y = {0};
  const VecR g = mlp_pack_gradients(m, mlp_gradients(m, x, y));
  EXPECT_LT(g.norm(), 1e-8);
}

TEST(MlpGradients, RejectsBadLabels) {
  MlpModel m = make_mlp({2, 3, 2}, OutputHead::kSoftmax, 14);
  MatR x(1, 2);
  x << 0.1, 0.2;
  EXPECT_THROW(mlp_gradients(m, x, std::vector<int>{2}), std::out_of_range);
  EXPECT_THROW(mlp_gradients(m, x, std::vector<int>{-1}), std::out_of_range);
  EXPECT_THROW(mlp_gradients(m, MatR(0, 2), std::vector<int>{}), std::invalid_argument);
}

TEST(MlpPack, RoundTripsParameters) {
  MlpModel m = make_mlp({3, 7, 4}, OutputHead::kSoftmax, 15);
  const VecR v = mlp_pack(m);
  MlpModel n = make_mlp({3, 7, 4}, OutputHead::kSoftmax, 99);
  mlp_unpack(n, v);
  expect_bits_equal(mlp_pack(n), v);
  VecR x(3);
  x << 0.2, -0.5, 1.0;
  expect_bits_equal(mlp_forward(m, x), mlp_forward(n, x));
}

namespace {

void make_blobs(int n_per_class, MatR& x, std::vector<int>& y, std::uint64_t seed) {
  Rng rng(seed);
  x.resize(2 * n_per_class, 2);
  y.clear();
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int cls = i % 2;
    const double cx = cls == 0 ? -2.0 : 2.0;
    x(i, 0) = cx + 0.6 * rng.normal();
    x(i, 1) = (cls == 0 ? -1.0 : 1.0) + 0.6 * rng.normal();
    y.push_back(cls);
  }
}

double accuracy(const MlpModel& m, const MatR& x, const std::vector<int>& y) {
  int hits = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (predict_topk(m, x.row(i).transpose(), 1)[0] == y[static_cast<std::size_t>(i)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(x.rows());
}

}  // namespace

TEST(TrainMlp, SeparatesGaussianBlobs) {
  MatR x;
  std::vector<int> y;
  make_blobs(100, x, y, 16);
  MlpModel m = make_mlp({2, 16, 2}, OutputHead::kSoftmax, 17);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.seed = 18;
  const TrainResult res = train_mlp(m, x, y, cfg);
  EXPECT_GE(accuracy(m, x, y), 0.99);
  EXPECT_EQ(res.loss_trace.size(), 200u);
  EXPECT_LT(res.loss_trace.back(), res.loss_trace.front());
}

TEST(TrainMlp, ZeroLearningRateLeavesParametersUnchanged) {
  MatR x;
  std::vector<int> y;
  make_blobs(20, x, y, 19);
  MlpModel m = make_mlp({2, 8, 2}, OutputHead::kSoftmax, 20);
  const VecR before = mlp_pack(m);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.seed = 21;
  train_mlp(m, x, y, cfg);
  expect_bits_equal(mlp_pack(m), before);
}

TEST(TrainMlp, SameSeedGivesIdenticalWeights) {
  MatR x;
  std::vector<int> y;
  make_blobs(50, x, y, 22);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.seed = 23;
  MlpModel a = make_mlp({2, 12, 2}, OutputHead::kSoftmax, 24);
  MlpModel b = make_mlp({2, 12, 2}, OutputHead::kSoftmax, 24);
  train_mlp(a, x, y, cfg);
  train_mlp(b, x, y, cfg);
  expect_bits_equal(mlp_pack(a), mlp_pack(b));
}

TEST(TrainMlp, DivergenceRaisesWithTraceAttached) {
  MatR x;
  std::vector<int> y;
  make_blobs(30, x, y, 25);
  MlpModel m = make_mlp({2, 8, 2}, OutputHead::kSoftmax, 26);
  TrainConfig cfg;
  cfg.optimizer = Optimizer::kSgd;
  cfg.learning_rate = 1e12;
  cfg.epochs = 10;
  cfg.seed = 27;
  try {
    train_mlp(m, x, y, cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDivergedError& e) {
    EXPECT_FALSE(e.loss_trace.empty());
  }
}

TEST(TrainMlp, EarlyStopWithZeroRateStopsAfterPatience) {
  MatR x;
  std::vector<int> y;
  make_blobs(20, x, y, 28);
  MlpModel m = make_mlp({2, 6, 2}, OutputHead::kSoftmax, 29);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 50;
  cfg.patience = 1;
  cfg.seed = 30;
  const TrainResult res = train_mlp(m, x, y, cfg, &x, &y);
  EXPECT_EQ(res.loss_trace.size(), 2u);
  EXPECT_EQ(res.best_epoch, 0);
}

TEST(TrainMlp, PermutedOutputLayerPermutesPredictions) {
  MatR x;
  std::vector<int> y;
  make_blobs(60, x, y, 31);
  MlpModel m = make_mlp({2, 10, 2}, OutputHead::kSoftmax, 32);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 33;
  train_mlp(m, x, y, cfg);

  MlpModel swapped = m;
  swapped.weights.back().row(0).swap(swapped.weights.back().row(1));
  std::swap(swapped.biases.back()[0], swapped.biases.back()[1]);
  std::vector<int> y_swapped;
  for (int v : y) y_swapped.push_back(1 - v);
  EXPECT_DOUBLE_EQ(accuracy(m, x, y), accuracy(swapped, x, y_swapped));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int a = predict_topk(m, x.row(i).transpose(), 1)[0];
    const int b = predict_topk(swapped, x.row(i).transpose(), 1)[0];
    EXPECT_EQ(a, 1 - b);
  }
}

TEST(TrainMlp, SpectrumRegressionFitsLinearMap) {
  Rng rng(34);
  MatR x(400, 3), t(400, 2);
  MatR w(2, 3);
  w << 0.5, -1.0, 0.25, 2.0, 0.3, -0.7;
  for (int i = 0; i < 400; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    t.row(i) = (w * x.row(i).transpose()).transpose();
  }
  MlpModel m = make_mlp({3, 32, 2}, OutputHead::kLogSpectrum, 35);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.seed = 36;
  train_mlp(m, x, t, cfg);
  EXPECT_LT(mlp_loss(m, x, t), 0.01);
}
