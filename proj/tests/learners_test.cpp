#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "phishguard/error.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/math.hpp"
#include "phishguard/random.hpp"
#include "support.hpp"

namespace pg = phishguard;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

namespace {

pg::Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const pg::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return pg::Errc::Format;
}

double accuracy(const pg::TrainedModel& m, const pg::Dataset& ds) {
  int hits = 0;
  for (Index i = 0; i < ds.size(); ++i) {
    hits += pg::predict_label(pg::predict_proba(m, ds.features.row(i).transpose())) == ds.labels(i);
  }
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

pg::Dataset dataset(MatrixXd x, VectorXi y) {
  auto names = pgtest::names(static_cast<int>(x.cols()));
  return pg::make_dataset(std::move(names), std::move(x), std::move(y));
}

pg::Dataset separable(int n, std::uint64_t seed) {
  pg::Rng rng(seed);
  MatrixXd x(n, 2);
  VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = pg::uniform_real(rng, -1, 1);
    x(i, 1) = pg::uniform_real(rng, -1, 1);
    const double margin = x(i, 0) + 0.5 * x(i, 1);
    if (std::abs(margin) < 0.1) x(i, 0) += margin > 0 ? 0.2 : -0.2;
    y(i) = x(i, 0) + 0.5 * x(i, 1) > 0 ? 1 : 0;
  }
  return dataset(std::move(x), std::move(y));
}

pg::Dataset xor_set() {
  MatrixXd x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  VectorXi y(4);
  y << 0, 1, 1, 0;
  return dataset(std::move(x), std::move(y));
}

}  // namespace

TEST(PredictProba, ZeroLinearModelIsHalf) {
  pg::LinearModel m{VectorXd::Zero(3), 0.0, {}};
  EXPECT_EQ(pg::predict_proba(m, VectorXd::Constant(3, 7.0)), 0.5);
  EXPECT_EQ(pg::predict_label(0.5), 1);
}

TEST(PredictProba, LinearMatchesClosedForm) {
  pg::LinearModel m{VectorXd::Constant(1, 1.0), 0.0, {}};
  EXPECT_NEAR(pg::predict_proba(m, VectorXd::Constant(1, 0.5)), 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
  EXPECT_NEAR(pg::predict_proba(m, VectorXd::Constant(1, 0.5)), 0.62246, 1e-5);
}

TEST(PredictProba, SingleLeafTree) {
  pg::DecisionTree t;
  t.nodes.push_back({-1, 0.0, -1, -1, 0.8});
  t.dimension = 4;
  EXPECT_EQ(pg::predict_proba(t, VectorXd::Zero(4)), 0.8);
  EXPECT_EQ(pg::predict_proba(t, VectorXd::Constant(4, 9.0)), 0.8);
}

TEST(PredictProba, DimensionMismatch) {
  pg::LinearModel m{VectorXd::Zero(3), 0.0, {}};
  EXPECT_EQ(code_of([&] { pg::predict_proba(m, VectorXd::Zero(2)); }), pg::Errc::DimensionMismatch);
}

TEST(Standardizer, ZeroMeanUnitDeviationConstantColumnsToZero) {
  auto ds = pgtest::canonical_dataset(300, 3);
  ds.features.col(4).setConstant(2.0);
  const auto s = pg::Standardizer::fit(ds.features);
  const MatrixXd z = s.transform(ds.features);
  for (Index j = 0; j < z.cols(); ++j) {
    const double mean = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
    EXPECT_LT(std::abs(mean), 1e-9) << j;
    if (j == 4) {
      EXPECT_EQ(z.col(j).cwiseAbs().maxCoeff(), 0.0);
    } else {
      EXPECT_NEAR(sd, 1.0, 1e-9) << j;
    }
  }
}

TEST(TrainLinear, SeparableSetIsFitExactly) {
  const auto ds = separable(80, 1);
  pg::TrainConfig cfg;
  cfg.max_epochs = 5000;
  for (auto loss : {pg::Loss::Logistic, pg::Loss::Hinge, pg::Loss::Squared}) {
    const auto m = pg::train_linear(ds, {loss, pg::Regularization::None}, cfg);
    EXPECT_EQ(accuracy(m, ds), 1.0) << pg::loss_name(loss);
  }
}

TEST(TrainLinear, HeavyL2ShrinksToBaseRate) {
  const auto ds = pgtest::ternary_dataset(200, 4, 2);
  pg::TrainConfig cfg;
  const auto m = pg::train_linear(ds, {pg::Loss::Logistic, pg::Regularization::L2, 0.0, 1e8}, cfg);
  EXPECT_LT(m.weights.cwiseAbs().maxCoeff(), 1e-6);
  const double base = ds.labels.cast<double>().mean();
  EXPECT_NEAR(pg::predict_proba(m, ds.features.row(0).transpose()), base, 1e-4);
}

TEST(TrainLinear, L1ProducesExactZeros) {
  auto ds = pgtest::ternary_dataset(300, 6, 3);
  const auto m = pg::train_linear(ds, {pg::Loss::Logistic, pg::Regularization::L1, 0.2, 0.0}, pg::TrainConfig{});
  EXPECT_GT((m.weights.array() == 0.0).count(), 0);
}

TEST(TrainLinear, SingleClassRejected) {
  auto ds = pgtest::ternary_dataset(20, 2, 4);
  ds.labels.setOnes();
  EXPECT_EQ(code_of([&] { pg::train_linear(ds, {}, pg::TrainConfig{}); }), pg::Errc::SingleClassDataset);
}

TEST(TrainLinear, ArgmaxInvariantUnderInputScaling) {
  const auto ds = pgtest::ternary_dataset(200, 5, 5);
  const auto m = pg::train_linear(ds, {}, pg::TrainConfig{});
  pg::LinearModel scaled = m;
  scaled.weights /= 4.0;
  for (Index i = 0; i < ds.size(); ++i) {
    const VectorXd x = ds.features.row(i).transpose();
    EXPECT_EQ(pg::predict_label(pg::predict_proba(m, x)), pg::predict_label(pg::predict_proba(scaled, VectorXd(4.0 * x))));
  }
}

TEST(TrainLinear, SgdIsDeterministic) {
  const auto ds = pgtest::ternary_dataset(200, 4, 6);
  pg::TrainConfig cfg;
  cfg.seed = 3;
  cfg.max_epochs = 20;
  cfg.learning_rate = 0.05;
  const pg::LinearSpec spec{pg::Loss::Logistic, pg::Regularization::L2, 0.0, 1e-4, true};
  const auto a = pg::train_linear(ds, spec, cfg);
  const auto b = pg::train_linear(ds, spec, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_GT(accuracy(a, ds), 0.8);
}

TEST(StratifiedFolds, TwoFoldsOnBalancedTen) {
  VectorXi y(10);
  y << 0, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  const auto folds = pg::stratified_folds(y, 2, 7);
  ASSERT_EQ(folds.size(), 2u);
  for (const auto& f : folds) {
    ASSERT_EQ(f.size(), 5u);
    int pos = 0;
    for (auto i : f) pos += y(i);
    EXPECT_TRUE(pos == 2 || pos == 3);
    EXPECT_TRUE(std::is_sorted(f.begin(), f.end()));
  }
}

TEST(StratifiedFolds, ClassRatioWithinOneSample) {
  const auto ds = pgtest::ternary_dataset(103, 3, 8);
  const int pos = ds.labels.sum();
  for (int k : {2, 3, 5, 10}) {
    const auto folds = pg::stratified_folds(ds.labels, k, 1);
    std::vector<Index> all;
    for (const auto& f : folds) {
      int p = 0;
      for (auto i : f) p += ds.labels(i);
      const double expected = static_cast<double>(pos) * static_cast<double>(f.size()) / 103.0;
      EXPECT_LE(std::abs(p - expected), 1.0 + 1e-9) << "k=" << k;
      all.insert(all.end(), f.begin(), f.end());
    }
    std::sort(all.begin(), all.end());
    std::vector<Index> expected(103);
    std::iota(expected.begin(), expected.end(), Index{0});
    EXPECT_EQ(all, expected);
  }
  EXPECT_EQ(code_of([&] { pg::stratified_folds(ds.labels, 1, 0); }), pg::Errc::InvalidArgument);
}

TEST(AverageFoldCoefficients, NoiseFeatureNearZero) {
  pg::Rng rng(12);
  const int n = 2000;
  MatrixXd x(n, 2);
  VectorXi y(n);
  for (int i = 0; i < n; ++i) {
    y(i) = static_cast<int>(pg::uniform_index(rng, 2));
    const bool flip = pg::uniform01(rng) < 0.1;
    x(i, 0) = (y(i) ^ flip) ? 1.0 : -1.0;
    x(i, 1) = static_cast<double>(pg::uniform_index(rng, 3)) - 1.0;
  }
  pg::TrainConfig cfg;
  cfg.folds = 5;
  const auto w = pg::average_fold_coefficients(dataset(x, y), cfg);
  EXPECT_GT(std::abs(w(0)), 10.0 * std::abs(w(1)));
}

TEST(AverageFoldCoefficients, MeanOfPerFoldFits) {
  const auto ds = pgtest::ternary_dataset(120, 3, 13);
  pg::TrainConfig cfg;
  cfg.folds = 4;
  cfg.seed = 9;
  const auto folds = pg::stratified_folds(ds.labels, 4, 9);
  VectorXd mean = VectorXd::Zero(3);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto rows = pg::training_indices(folds, f);
    mean += pg::fit_linear(ds.subset(rows), {}, cfg).standardized_weights;
  }
  mean /= 4.0;
  const auto w = pg::average_fold_coefficients(ds, cfg);
  EXPECT_LT((w - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(w, pg::average_fold_coefficients(ds, cfg));
}

TEST(AverageFoldCoefficients, IdenticalFoldsGiveTheSingleFit) {
  // Rows are identical within each class, so every stratified complement is
  // the same matrix and every per-fold fit is the same fit.
  MatrixXd x(20, 2);
  VectorXi y(20);
  for (int i = 0; i < 20; ++i) {
    y(i) = i % 2;
    x.row(i) << (y(i) ? 1.0 : -1.0), (y(i) ? 0.5 : 0.2);
  }
  const auto ds = dataset(x, y);
  pg::TrainConfig cfg;
  cfg.folds = 5;
  cfg.seed = 9;
  cfg.max_epochs = 200;
  const auto folds = pg::stratified_folds(ds.labels, 5, 9);
  const auto single = pg::fit_linear(ds.subset(pg::training_indices(folds, 0)), {}, cfg).standardized_weights;
  EXPECT_LT((pg::average_fold_coefficients(ds, cfg) - single).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SelectFeatures, MagnitudeOrderAndTies) {
  VectorXd w(3);
  w << 0.1, -0.9, 0.5;
  EXPECT_EQ(pg::select_features_by_coefficient(w, 2), (std::vector<Index>{1, 2}));
  EXPECT_EQ(pg::select_features_by_coefficient(w, 3), (std::vector<Index>{1, 2, 0}));
  VectorXd tie(2);
  tie << 0.4, -0.4;
  EXPECT_EQ(pg::select_features_by_coefficient(tie, 1), (std::vector<Index>{0}));
  EXPECT_EQ(code_of([&] { pg::select_features_by_coefficient(w, 0); }), pg::Errc::InvalidM);
  EXPECT_EQ(code_of([&] { pg::select_features_by_coefficient(w, 4); }), pg::Errc::InvalidM);
}

TEST(TrainTree, SingleFeatureSplitAtZero) {
  MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  VectorXi y(6);
  y << 0, 0, 0, 1, 1, 1;
  const auto t = pg::train_tree(dataset(x, y), {4, 1});
  EXPECT_EQ(t.depth(), 1);
  EXPECT_EQ(t.nodes[0].threshold, 0.0);
  EXPECT_EQ(accuracy(t, dataset(x, y)), 1.0);
}

TEST(TrainTree, DepthZeroPredictsMajority) {
  const auto ds = pgtest::ternary_dataset(50, 3, 14);
  const auto t = pg::train_tree(ds, {0, 1});
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_DOUBLE_EQ(t.nodes[0].value, ds.labels.cast<double>().mean());
}

TEST(TrainTree, XorAtDepthTwo) {
  const auto ds = xor_set();
  EXPECT_EQ(accuracy(pg::train_tree(ds, {2, 1}), ds), 1.0);
}

TEST(TrainTree, RowOrderDoesNotChangeStructure) {
  const auto ds = pgtest::ternary_dataset(120, 5, 15);
  std::vector<Index> perm(120);
  std::iota(perm.begin(), perm.end(), Index{0});
  pg::Rng rng(1);
  pg::shuffle(std::span<Index>(perm), rng);
  const auto a = pg::train_tree(ds, {5, 1});
  const auto b = pg::train_tree(ds.subset(perm), {5, 1});
  ASSERT_EQ(a.nodes.size(), b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    EXPECT_EQ(a.nodes[i].feature, b.nodes[i].feature);
    EXPECT_EQ(a.nodes[i].threshold, b.nodes[i].threshold);
    EXPECT_NEAR(a.nodes[i].value, b.nodes[i].value, 1e-12);
  }
}

TEST(TrainTree, LeafValuesAreProbabilitiesAndFeaturesInRange) {
  const auto ds = pgtest::ternary_dataset(150, 6, 16);
  for (auto mode : {pg::SplitMode::Best, pg::SplitMode::Random}) {
    const auto t = pg::train_tree(ds, {6, 2, mode}, 3);
    for (const auto& n : t.nodes) {
      if (n.feature < 0) {
        EXPECT_GE(n.value, 0.0);
        EXPECT_LE(n.value, 1.0);
      } else {
        EXPECT_LT(n.feature, 6);
      }
    }
    EXPECT_LE(t.depth(), 6);
  }
}

TEST(TrainForest, SingleTreeWithoutResamplingEqualsTree) {
  const auto ds = pgtest::ternary_dataset(100, 4, 17);
  pg::ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.sqrt_features = false;
  p.tree = {5, 1};
  const auto forest = pg::train_forest(ds, p, pg::TrainConfig{});
  const auto tree = pg::train_tree(ds, p.tree);
  for (Index i = 0; i < ds.size(); ++i) {
    const VectorXd x = ds.features.row(i).transpose();
    EXPECT_DOUBLE_EQ(pg::predict_proba(forest, x), pg::predict_proba(tree, x));
  }
  EXPECT_EQ(forest.weights, std::vector<double>{1.0});
}

TEST(TrainForest, SeparableToySetAndDeterminism) {
  const auto ds = separable(100, 18);
  for (auto mode : {pg::EnsembleMode::Bagging, pg::EnsembleMode::Extra}) {
    pg::ForestParams p;
    p.n_trees = 25;
    p.mode = mode;
    pg::TrainConfig cfg;
    cfg.seed = 4;
    const auto a = pg::train_forest(ds, p, cfg);
    EXPECT_EQ(accuracy(a, ds), 1.0);
    const auto b = pg::train_forest(ds, p, cfg);
    EXPECT_EQ(pg::model_to_json({"f", {}, a}), pg::model_to_json({"f", {}, b}));
    for (double w : a.weights) EXPECT_DOUBLE_EQ(w, 1.0 / 25.0);
  }
}

TEST(TrainGbt, OneRoundDepthZeroIsBaseRateLogit) {
  const auto ds = pgtest::ternary_dataset(90, 3, 19);
  const auto m = pg::train_gbt(ds, {1, 0.1, 0, 1});
  const double rate = ds.labels.cast<double>().mean();
  EXPECT_NEAR(m.base_score, std::log(rate / (1 - rate)), 1e-12);
  EXPECT_NEAR(pg::predict_proba(m, ds.features.row(0).transpose()), rate, 1e-12);
}

TEST(TrainGbt, TrainingLossNonIncreasing) {
  const auto ds = pgtest::ternary_dataset(200, 5, 20);
  const auto m = pg::train_gbt(ds, {60, 0.05, 3, 1});
  double prev = pg::gbt_training_loss(m, ds, 0);
  for (std::size_t r = 1; r <= m.trees.size(); ++r) {
    const double cur = pg::gbt_training_loss(m, ds, r);
    EXPECT_LE(cur, prev + 1e-12) << "round " << r;
    prev = cur;
  }
}

TEST(TrainGbt, FitsXor) {
  const auto ds = xor_set();
  EXPECT_EQ(accuracy(pg::train_gbt(ds, {50, 0.3, 2, 1}), ds), 1.0);
}

TEST(Mlp, BceIdentity) {
  EXPECT_EQ(pg::binary_cross_entropy(1.0, 1.0), 0.0);
  EXPECT_EQ(pg::binary_cross_entropy(0.0, 0.0), 0.0);
  EXPECT_NEAR(pg::binary_cross_entropy(1.0, 0.5), std::log(2.0), 1e-15);
}

TEST(Mlp, ZeroHiddenLayersMatchLogisticRegression) {
  const auto ds = pgtest::ternary_dataset(50, 3, 21, 0.8);
  pg::TrainConfig lcfg;
  lcfg.max_epochs = 20000;
  lcfg.tolerance = 0.0;
  const auto logistic = pg::train_linear(ds, {}, lcfg);

  pg::TrainConfig cfg;
  cfg.seed = 1;
  cfg.max_epochs = 20000;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 50;
  cfg.validation_fraction = 0.0;
  cfg.lr_decay = 0.01;
  pg::MlpParams params;
  params.layer_sizes = {1};
  const auto mlp = pg::train_mlp(ds, params, cfg);
  double worst = 0.0;
  for (Index i = 0; i < ds.size(); ++i) {
    const VectorXd x = ds.features.row(i).transpose();
    worst = std::max(worst, std::abs(pg::predict_proba(mlp, x) - pg::predict_proba(logistic, x)));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Mlp, GradientMatchesCentralDifferences) {
  pg::MlpParams params;
  params.layer_sizes = {5, 4, 1};
  for (auto act : {pg::Activation::Sigmoid, pg::Activation::Relu}) {
    params.hidden_activation = act;
    const auto model = pg::init_mlp(3, params, 7);
    MatrixXd x(3, 3);
    x << 0.3, -1.2, 0.7, 1.1, 0.4, -0.5, -0.8, 0.9, 0.2;
    VectorXd y(3);
    y << 1, 0, 1;
    const auto g = pg::mlp_loss_and_gradient(model, x, y);
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      for (Index r = 0; r < model.layers[l].weights.rows(); ++r) {
        for (Index c = 0; c < model.layers[l].weights.cols(); ++c) {
          auto plus = model, minus = model;
          plus.layers[l].weights(r, c) += h;
          minus.layers[l].weights(r, c) -= h;
          const double fd = (pg::mlp_loss_and_gradient(plus, x, y).loss - pg::mlp_loss_and_gradient(minus, x, y).loss) / (2 * h);
          const double an = g.weights[l](r, c);
          worst = std::max(worst, std::abs(fd - an) / std::max(1e-8, std::max(std::abs(fd), std::abs(an))));
        }
        auto plus = model, minus = model;
        plus.layers[l].bias(r) += h;
        minus.layers[l].bias(r) -= h;
        const double fd = (pg::mlp_loss_and_gradient(plus, x, y).loss - pg::mlp_loss_and_gradient(minus, x, y).loss) / (2 * h);
        const double an = g.bias[l](r);
        worst = std::max(worst, std::abs(fd - an) / std::max(1e-8, std::max(std::abs(fd), std::abs(an))));
      }
    }
    EXPECT_LT(worst, 1e-4);
  }
}

TEST(Mlp, LearnsAndIsDeterministic) {
  const auto ds = pgtest::ternary_dataset(300, 6, 22);
  pg::TrainConfig cfg;
  cfg.seed = 5;
  cfg.max_epochs = 100;
  cfg.learning_rate = 1e-2;
  pg::MlpParams params;
  params.layer_sizes = {8, 1};
  const auto a = pg::train_mlp(ds, params, cfg);
  const auto b = pg::train_mlp(ds, params, cfg);
  EXPECT_GT(accuracy(a, ds), 0.8);
  EXPECT_EQ(pg::model_to_json({"mlp", {}, a}), pg::model_to_json({"mlp", {}, b}));
  params.layer_sizes = {8, 2};
  EXPECT_EQ(code_of([&] { pg::train_mlp(ds, params, cfg); }), pg::Errc::InvalidArgument);
}

TEST(Models, EveryPresetTrainsScoresAndRoundTrips) {
  const auto ds = pgtest::canonical_dataset(200, 23);
  pg::TrainConfig cfg;
  cfg.seed = 2;
  for (const auto& kind : pg::model_kinds()) {
    const auto m = pg::train_model(ds, kind, cfg);
    EXPECT_EQ(m.kind, kind);
    EXPECT_EQ(m.dimension(), 23);
    const auto json = pg::model_to_json(m);
    const auto back = pg::model_from_json(json);
    EXPECT_EQ(pg::model_to_json(back), json) << kind;
    const auto p = pg::predict_proba_batch(m, ds.features);
    const auto q = pg::predict_proba_batch(back, ds.features);
    EXPECT_EQ(p, q) << kind;
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_LE(p.maxCoeff(), 1.0);
    EXPECT_EQ(pg::model_to_json(pg::train_model(ds, kind, cfg)), json) << kind << " not deterministic";
  }
  EXPECT_EQ(pg::model_kinds().size(), 10u);
}

TEST(Models, MalformedDocumentsAreFormatErrors) {
  EXPECT_EQ(code_of([] { pg::model_from_json("{"); }), pg::Errc::Format);
  EXPECT_EQ(code_of([] { pg::model_from_json(R"({"kind":"x"})"); }), pg::Errc::Format);
  EXPECT_EQ(code_of([] { pg::train_model(pgtest::ternary_dataset(20, 2, 1), "nope", pg::TrainConfig{}); }),
            pg::Errc::InvalidArgument);
}
