#include <json.hpp>

#include "phishguard/data_files.hpp"
#include "phishguard/error.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/math.hpp"

namespace phishguard {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double ensemble_proba(const Ensemble& e, const Eigen::Ref<const VectorXd>& x) {
  if (e.mode == EnsembleMode::Boosting) {
    double z = e.base_score;
    for (std::size_t m = 0; m < e.trees.size(); ++m) z += e.weights[m] * e.trees[m].leaf_value(x);
    return sigmoid(z);
  }
  double p = 0.0;
  for (std::size_t m = 0; m < e.trees.size(); ++m) p += e.weights[m] * e.trees[m].leaf_value(x);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

Index model_dimension(const TrainedModel& model) {
  return std::visit(overloaded{
                        [](const LinearModel& m) { return m.weights.size(); },
                        [](const DecisionTree& m) { return m.dimension; },
                        [](const Ensemble& m) { return m.trees.empty() ? Index{0} : m.trees.front().dimension; },
                        [](const MlpModel& m) { return m.layers.empty() ? Index{0} : m.layers.front().weights.cols(); },
                    },
                    model);
}

Index Model::dimension() const { return model_dimension(params); }

double predict_proba(const TrainedModel& model, const Eigen::Ref<const VectorXd>& x) {
  const auto d = model_dimension(model);
  if (x.size() != d) {
    throw Error(Errc::DimensionMismatch,
                "expected " + std::to_string(d) + " features, got " + std::to_string(x.size()));
  }
  return std::visit(overloaded{
                        [&](const LinearModel& m) { return sigmoid(m.decision(x)); },
                        [&](const DecisionTree& m) { return m.leaf_value(x); },
                        [&](const Ensemble& m) { return ensemble_proba(m, x); },
                        [&](const MlpModel& m) { return mlp_forward(m, x); },
                    },
                    model);
}

double predict_proba(const Model& model, const Eigen::Ref<const VectorXd>& x) {
  return predict_proba(model.params, x);
}

VectorXd predict_proba_batch(const Model& model, const MatrixXd& x) {
  VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict_proba(model.params, x.row(i).transpose());
  return out;
}

const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds = {"logistic", "ridge", "sgd",   "elastic", "svm",
                                                 "tree",     "forest", "extra", "gbt",     "mlp"};
  return kinds;
}

Model train_model(const Dataset& ds, std::string_view kind, const TrainConfig& cfg) {
  Model model;
  model.kind = std::string(kind);
  model.feature_names = ds.feature_names;

  TrainConfig full = cfg;
  full.max_epochs = 5000;
  full.tolerance = 1e-12;
  const auto linear = [&](LinearSpec spec, const TrainConfig& c) {
    model.params = train_linear(ds, spec, c);
  };

  if (kind == "logistic") {
    linear({}, full);
  } else if (kind == "ridge") {
    linear({.loss = Loss::Squared, .regularization = Regularization::L2, .l2 = 1e-2}, full);
  } else if (kind == "sgd") {
    TrainConfig c = cfg;
    c.max_epochs = 30;
    c.learning_rate = 0.05;
    c.lr_decay = 0.1;
    c.batch_size = 32;
    linear({.regularization = Regularization::L2, .l2 = 1e-4, .stochastic = true}, c);
  } else if (kind == "elastic") {
    linear({.regularization = Regularization::Elastic, .l1 = 1e-3, .l2 = 1e-3}, full);
  } else if (kind == "svm") {
    linear({.loss = Loss::Hinge, .regularization = Regularization::L2, .l2 = 1e-2}, full);
  } else if (kind == "tree") {
    model.params = train_tree(ds, {.max_depth = 10, .min_samples_leaf = 2}, cfg.seed);
  } else if (kind == "forest") {
    model.params = train_forest(ds, {.n_trees = 100, .mode = EnsembleMode::Bagging}, cfg);
  } else if (kind == "extra") {
    model.params = train_forest(ds, {.n_trees = 100, .mode = EnsembleMode::Extra}, cfg);
  } else if (kind == "gbt") {
    model.params = train_gbt(ds, {.n_rounds = 500, .learning_rate = 0.1, .max_depth = 4});
  } else if (kind == "mlp") {
    TrainConfig c = cfg;
    c.max_epochs = 200;
    c.learning_rate = 1e-3;
    c.early_stop_patience = 10;
    c.batch_size = 32;
    c.validation_fraction = 0.1;
    model.params = train_mlp(ds, MlpParams{}, c);
  } else {
    throw Error(Errc::InvalidArgument, "unknown model kind '" + std::string(kind) + "'");
  }
  return model;
}

namespace {

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json tree_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return {{"max_depth", t.max_depth}, {"dimension", t.dimension}, {"nodes", nodes}};
}

DecisionTree tree_from(const json& j) {
  DecisionTree t;
  t.max_depth = j.at("max_depth").get<int>();
  t.dimension = j.at("dimension").get<Index>();
  for (const auto& n : j.at("nodes")) {
    t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                       n.at(3).get<int>(), n.at(4).get<double>()});
  }
  if (t.nodes.empty()) throw Error(Errc::Format, "tree without nodes");
  for (const auto& n : t.nodes) {
    const auto size = static_cast<int>(t.nodes.size());
    if (n.feature >= t.dimension || (n.feature >= 0 && (n.left <= 0 || n.left >= size ||
                                                        n.right <= 0 || n.right >= size))) {
      throw Error(Errc::Format, "tree node out of range");
    }
  }
  return t;
}

std::string_view activation_name(Activation a) { return a == Activation::Relu ? "relu" : "sigmoid"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw Error(Errc::Format, "unknown activation '" + s + "'");
}

template <class E>
E parse_enum(const std::string& s, std::initializer_list<E> options, std::string_view (*name)(E) noexcept) {
  for (auto e : options) {
    if (name(e) == s) return e;
  }
  throw Error(Errc::Format, "unknown value '" + s + "'");
}

}  // namespace

std::string model_to_json(const Model& model) {
  json params;
  std::string type;
  std::visit(overloaded{
                 [&](const LinearModel& m) {
                   type = "linear";
                   params = {{"weights", vector_json(m.weights)},
                             {"bias", m.bias},
                             {"loss", loss_name(m.spec.loss)},
                             {"regularization", regularization_name(m.spec.regularization)},
                             {"l1", m.spec.l1},
                             {"l2", m.spec.l2},
                             {"stochastic", m.spec.stochastic}};
                 },
                 [&](const DecisionTree& m) {
                   type = "tree";
                   params = tree_json(m);
                 },
                 [&](const Ensemble& m) {
                   type = "ensemble";
                   json trees = json::array();
                   for (const auto& t : m.trees) trees.push_back(tree_json(t));
                   params = {{"mode", ensemble_mode_name(m.mode)},
                             {"learning_rate", m.learning_rate},
                             {"base_score", m.base_score},
                             {"weights", m.weights},
                             {"trees", trees}};
                 },
                 [&](const MlpModel& m) {
                   type = "mlp";
                   json layers = json::array();
                   for (const auto& l : m.layers) {
                     const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.weights;
                     layers.push_back({{"rows", w.rows()},
                                       {"cols", w.cols()},
                                       {"weights", std::vector<double>(w.data(), w.data() + w.size())},
                                       {"bias", vector_json(l.bias)},
                                       {"activation", activation_name(l.activation)}});
                   }
                   params = {{"layers", layers}};
                 },
             },
             model.params);
  const json doc = {{"format_version", kFormatVersion},
                    {"kind", model.kind},
                    {"model_type", type},
                    {"feature_names", model.feature_names},
                    {"params", params}};
  return doc.dump(1) + "\n";
}

Model model_from_json(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    if (!doc.contains("format_version")) throw Error(Errc::Format, "model file lacks format_version");
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      throw Error(Errc::Format, "unsupported model format_version " + doc.at("format_version").dump());
    }
    Model model;
    model.kind = doc.at("kind").get<std::string>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    const auto type = doc.at("model_type").get<std::string>();
    const auto& p = doc.at("params");
    if (type == "linear") {
      LinearModel m;
      m.weights = vector_from(p.at("weights"));
      m.bias = p.at("bias").get<double>();
      m.spec.loss = parse_enum(p.at("loss").get<std::string>(),
                               {Loss::Logistic, Loss::Hinge, Loss::Squared}, &loss_name);
      m.spec.regularization = parse_enum(
          p.at("regularization").get<std::string>(),
          {Regularization::None, Regularization::L1, Regularization::L2, Regularization::Elastic},
          &regularization_name);
      m.spec.l1 = p.at("l1").get<double>();
      m.spec.l2 = p.at("l2").get<double>();
      m.spec.stochastic = p.at("stochastic").get<bool>();
      model.params = std::move(m);
    } else if (type == "tree") {
      model.params = tree_from(p);
    } else if (type == "ensemble") {
      Ensemble e;
      e.mode = parse_enum(p.at("mode").get<std::string>(),
                          {EnsembleMode::Bagging, EnsembleMode::Extra, EnsembleMode::Boosting},
                          &ensemble_mode_name);
      e.learning_rate = p.at("learning_rate").get<double>();
      e.base_score = p.at("base_score").get<double>();
      e.weights = p.at("weights").get<std::vector<double>>();
      for (const auto& t : p.at("trees")) e.trees.push_back(tree_from(t));
      if (e.trees.empty() || e.trees.size() != e.weights.size()) {
        throw Error(Errc::Format, "ensemble trees and weights disagree");
      }
      model.params = std::move(e);
    } else if (type == "mlp") {
      MlpModel m;
      for (const auto& l : p.at("layers")) {
        const auto rows = l.at("rows").get<Index>();
        const auto cols = l.at("cols").get<Index>();
        const auto w = l.at("weights").get<std::vector<double>>();
        if (static_cast<Index>(w.size()) != rows * cols) throw Error(Errc::Format, "layer size mismatch");
        MlpLayer layer;
        layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            w.data(), rows, cols);
        layer.bias = vector_from(l.at("bias"));
        layer.activation = parse_activation(l.at("activation").get<std::string>());
        m.layers.push_back(std::move(layer));
      }
      if (m.layers.empty()) throw Error(Errc::Format, "MLP without layers");
      model.params = std::move(m);
    } else {
      throw Error(Errc::Format, "unknown model_type '" + type + "'");
    }
    if (!model.feature_names.empty() &&
        static_cast<Index>(model.feature_names.size()) != model.dimension()) {
      throw Error(Errc::Format, "feature_names length does not match the parameters");
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(Errc::Format, std::string("model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_text_file(path, model_to_json(model));
}

Model load_model(const std::filesystem::path& path) { return model_from_json(read_text_file(path)); }

}  // namespace phishguard
