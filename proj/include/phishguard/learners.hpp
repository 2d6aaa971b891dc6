#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "phishguard/dataset.hpp"

namespace phishguard {

struct TrainConfig {
  int folds = 5;
  std::uint64_t seed = 0;
  int max_epochs = 1000;
  double learning_rate = 1e-3;
  int early_stop_patience = 10;
  bool standardize = true;
  // Solver knobs not covered above.
  double tolerance = 1e-10;        // relative objective change that stops full-batch descent
  int batch_size = 32;             // SGD / MLP mini-batch
  double validation_fraction = 0.1;  // MLP early-stopping hold-out; 0 disables it
  double lr_decay = 0.0;           // step size at epoch t is lr / (1 + lr_decay * t)
};

// Per-column affine map to zero mean and unit (population) deviation.
// Constant columns keep scale 1 so they map to 0.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  static Standardizer identity(Eigen::Index dimension);
  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

enum class Loss { Logistic, Hinge, Squared };
enum class Regularization { None, L1, L2, Elastic };

std::string_view loss_name(Loss loss) noexcept;
std::string_view regularization_name(Regularization reg) noexcept;

struct LinearSpec {
  Loss loss = Loss::Logistic;
  Regularization regularization = Regularization::None;
  double l1 = 0.0;
  double l2 = 0.0;
  bool stochastic = false;  // mini-batch SGD instead of full-batch proximal descent
};

// Scores sigma(w.x + b) on raw (unstandardized) inputs.
struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  LinearSpec spec;

  double decision(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// Flat binary tree; node 0 is the root. Internal nodes send x[feature] < threshold
// left. `value` is P(class 1) for classification trees and the raw leaf output
// for the regression trees inside a boosted ensemble.
struct DecisionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;
  int max_depth = 0;
  Eigen::Index dimension = 0;

  double leaf_value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int depth() const;
};

enum class SplitMode { Best, Random };

struct TreeParams {
  int max_depth = 8;
  int min_samples_leaf = 1;
  SplitMode split_mode = SplitMode::Best;
  int max_features = 0;  // features tried per split; 0 means all
};

enum class EnsembleMode { Bagging, Extra, Boosting };
std::string_view ensemble_mode_name(EnsembleMode mode) noexcept;

struct Ensemble {
  std::vector<DecisionTree> trees;
  std::vector<double> weights;  // 1/M for bagging and extra, learning rate for boosting
  EnsembleMode mode = EnsembleMode::Bagging;
  double learning_rate = 0.0;
  double base_score = 0.0;  // boosting: initial logit
};

enum class Activation { Relu, Sigmoid };

struct MlpLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Relu;
};

// The last layer always has one output unit and a sigmoid.
struct MlpModel {
  std::vector<MlpLayer> layers;
};

using TrainedModel = std::variant<LinearModel, DecisionTree, Ensemble, MlpModel>;

struct Model {
  std::string kind;  // preset name, e.g. "gbt"
  std::vector<std::string> feature_names;
  TrainedModel params;

  Eigen::Index dimension() const;
};

// Probability of phishing. Throws DimensionMismatch on a wrong-length x.
double predict_proba(const TrainedModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_proba(const Model& model, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd predict_proba_batch(const Model& model, const Eigen::MatrixXd& x);
Eigen::Index model_dimension(const TrainedModel& model);

inline int predict_label(double probability) { return probability >= 0.5 ? 1 : 0; }

// Linear models. The fit happens in standardized space when cfg.standardize;
// the returned weights are mapped back to raw inputs.
LinearModel train_linear(const Dataset& ds, const LinearSpec& spec, const TrainConfig& cfg);

struct LinearFit {
  LinearModel model;                  // raw-input weights
  Eigen::VectorXd standardized_weights;
  double standardized_bias = 0.0;
};
LinearFit fit_linear(const Dataset& ds, const LinearSpec& spec, const TrainConfig& cfg);

// Test indices of each fold, ascending. Each class is shuffled with the seed and
// dealt round-robin, the deal continuing from one class into the next.
std::vector<std::vector<Eigen::Index>> stratified_folds(const Eigen::VectorXi& labels, int k,
                                                        std::uint64_t seed);
// Complement of fold `fold`, ascending.
std::vector<Eigen::Index> training_indices(const std::vector<std::vector<Eigen::Index>>& folds,
                                           std::size_t fold);

// Mean standardized logistic weights over the k fold-complement fits.
Eigen::VectorXd average_fold_coefficients(const Dataset& ds, const TrainConfig& cfg);

// Indices of the m largest |w|, descending; ties keep the lower index.
std::vector<Eigen::Index> select_features_by_coefficient(const Eigen::VectorXd& w, int m);

DecisionTree train_tree(const Dataset& ds, const TreeParams& params, std::uint64_t seed = 0);

struct ForestParams {
  int n_trees = 100;
  EnsembleMode mode = EnsembleMode::Bagging;
  TreeParams tree{.max_depth = 16, .min_samples_leaf = 1};
  bool bootstrap = true;       // bagging only
  bool sqrt_features = true;   // overrides tree.max_features with floor(sqrt(d))
};
Ensemble train_forest(const Dataset& ds, const ForestParams& params, const TrainConfig& cfg);

struct GbtParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  int min_samples_leaf = 1;
};
Ensemble train_gbt(const Dataset& ds, const GbtParams& params);

// Mean logistic loss of a boosted ensemble truncated to its first `rounds` trees.
double gbt_training_loss(const Ensemble& model, const Dataset& ds, std::size_t rounds);

struct MlpParams {
  std::vector<int> layer_sizes{32, 16, 1};  // hidden sizes then the output size 1
  Activation hidden_activation = Activation::Relu;
};
MlpModel train_mlp(const Dataset& ds, const MlpParams& params, const TrainConfig& cfg);

double mlp_forward(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

MlpModel init_mlp(Eigen::Index input_dimension, const MlpParams& params, std::uint64_t seed);

struct MlpGradient {
  double loss = 0.0;  // mean binary cross-entropy
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;
};
// Rows of x are samples; y holds 0/1 targets.
MlpGradient mlp_loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y);

// Named presets: logistic, ridge, sgd, elastic, svm, tree, forest, extra, gbt, mlp.
const std::vector<std::string>& model_kinds();
Model train_model(const Dataset& ds, std::string_view kind, const TrainConfig& cfg);

// JSON document with format_version, kind, feature_names and params.
std::string model_to_json(const Model& model);
Model model_from_json(std::string_view text);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace phishguard
