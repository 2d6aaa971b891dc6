#include <algorithm>
#include <cmath>
#include <numeric>

#include "phishguard/error.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/math.hpp"
#include "phishguard/random.hpp"

namespace phishguard {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view ensemble_mode_name(EnsembleMode mode) noexcept {
  switch (mode) {
    case EnsembleMode::Bagging: return "bagging";
    case EnsembleMode::Extra: return "extra";
    case EnsembleMode::Boosting: return "boosting";
  }
  return "unknown";
}

double DecisionTree::leaf_value(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != dimension) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(dimension) +
                                             " features, got " + std::to_string(x.size()));
  }
  int at = 0;
  while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(at)];
    at = x(n.feature) < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(at)].value;
}

int DecisionTree::depth() const {
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

// Each feature's distinct training values, and every row's position among them.
struct Bins {
  std::vector<std::vector<double>> values;
  Eigen::MatrixXi index;  // rows x features
};

Bins make_bins(const MatrixXd& x) {
  Bins b;
  b.values.resize(static_cast<std::size_t>(x.cols()));
  b.index.resize(x.rows(), x.cols());
  for (Index f = 0; f < x.cols(); ++f) {
    auto& vals = b.values[static_cast<std::size_t>(f)];
    vals.assign(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (Index r = 0; r < x.rows(); ++r) {
      b.index(r, f) = static_cast<int>(std::lower_bound(vals.begin(), vals.end(), x(r, f)) - vals.begin());
    }
  }
  return b;
}

// Per-row training signal. Classification: target is the 0/1 label and weight
// the bootstrap multiplicity. Regression: target is the gradient, hessian the
// Newton denominator, weight 1.
struct Signal {
  bool regression = false;
  VectorXd target;
  VectorXd weight;
  VectorXd hessian;
};

struct Stats {
  double weight = 0.0;
  double sum = 0.0;
  double hess = 0.0;
  Index rows = 0;

  void add(const Signal& s, Index r) {
    weight += s.weight(r);
    sum += s.weight(r) * s.target(r);
    if (s.regression) hess += s.hessian(r);
    ++rows;
  }
  Stats minus(const Stats& o) const {
    return {weight - o.weight, sum - o.sum, hess - o.hess, rows - o.rows};
  }
};

// Larger is purer: negative Gini impurity times weight, or the variance
// reduction term for regression.
double purity(const Stats& s, bool regression) {
  if (s.weight <= 0.0) return 0.0;
  if (regression) return s.sum * s.sum / s.weight;
  const double neg = s.weight - s.sum;
  return (s.sum * s.sum + neg * neg) / s.weight;
}

struct Builder {
  const MatrixXd& x;
  const Bins& bins;
  const Signal& signal;
  const TreeParams& params;
  Rng& rng;
  DecisionTree tree;

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  double leaf_value(const Stats& s) const {
    if (signal.regression) return s.hess > 1e-12 ? s.sum / s.hess : 0.0;
    return s.weight > 0.0 ? s.sum / s.weight : 0.0;
  }

  std::vector<int> candidate_features() {
    std::vector<int> all(static_cast<std::size_t>(x.cols()));
    std::iota(all.begin(), all.end(), 0);
    const auto k = static_cast<std::size_t>(params.max_features);
    if (k == 0 || k >= all.size()) return all;
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, all.size() - i));
      std::swap(all[i], all[j]);
    }
    all.resize(k);
    std::sort(all.begin(), all.end());
    return all;
  }

  void consider(Split& best, int f, double threshold, const Stats& left, const Stats& node,
                double parent) const {
    const Stats right = node.minus(left);
    if (left.rows < params.min_samples_leaf || right.rows < params.min_samples_leaf) return;
    if (left.rows == 0 || right.rows == 0) return;
    const double gain = purity(left, signal.regression) + purity(right, signal.regression) - parent;
    if (gain > best.gain + 1e-12) best = {f, threshold, gain};
  }

  Split best_split(const std::vector<Index>& rows, const Stats& node) {
    Split best;
    const double parent = purity(node, signal.regression);
    for (int f : candidate_features()) {
      const auto& values = bins.values[static_cast<std::size_t>(f)];
      if (params.split_mode == SplitMode::Random) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (auto r : rows) {
          lo = std::min(lo, x(r, f));
          hi = std::max(hi, x(r, f));
        }
        if (!(lo < hi)) continue;
        double threshold = uniform_real(rng, lo, hi);
        if (threshold <= lo) threshold = std::nextafter(lo, hi);
        Stats left;
        for (auto r : rows) {
          if (x(r, f) < threshold) left.add(signal, r);
        }
        consider(best, f, threshold, left, node, parent);
        continue;
      }
      std::vector<Stats> hist(values.size());
      for (auto r : rows) hist[static_cast<std::size_t>(bins.index(r, f))].add(signal, r);
      Stats left;
      std::optional<std::size_t> previous;
      for (std::size_t v = 0; v < hist.size(); ++v) {
        if (hist[v].rows == 0) continue;
        if (previous) {
          const double threshold = 0.5 * (values[*previous] + values[v]);
          consider(best, f, threshold, left, node, parent);
        }
        left.weight += hist[v].weight;
        left.sum += hist[v].sum;
        left.hess += hist[v].hess;
        left.rows += hist[v].rows;
        previous = v;
      }
    }
    return best;
  }

  int build(std::vector<Index> rows, int depth) {
    Stats node;
    for (auto r : rows) node.add(signal, r);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({.value = leaf_value(node)});

    const bool pure = !signal.regression && (node.sum <= 0.0 || node.sum >= node.weight);
    if (depth >= params.max_depth || pure || node.rows < 2 * std::max(1, params.min_samples_leaf)) {
      return id;
    }
    const auto split = best_split(rows, node);
    if (split.feature < 0) return id;

    std::vector<Index> left;
    std::vector<Index> right;
    for (auto r : rows) (x(r, split.feature) < split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& n = tree.nodes[static_cast<std::size_t>(id)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = l;
    n.right = r;
    return id;
  }
};

DecisionTree grow(const MatrixXd& x, const Bins& bins, const Signal& signal,
                  const std::vector<Index>& rows, const TreeParams& params, Rng& rng) {
  if (params.max_depth < 0) throw Error(Errc::InvalidArgument, "max_depth must be >= 0");
  Builder b{x, bins, signal, params, rng, {}};
  b.tree.max_depth = params.max_depth;
  b.tree.dimension = x.cols();
  b.build(rows, 0);
  return std::move(b.tree);
}

Signal classification_signal(const Dataset& ds) {
  Signal s;
  s.target = ds.labels_as_double();
  s.weight = VectorXd::Ones(ds.size());
  return s;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

}  // namespace

DecisionTree train_tree(const Dataset& ds, const TreeParams& params, std::uint64_t seed) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  const auto bins = make_bins(ds.features);
  const auto signal = classification_signal(ds);
  Rng rng(seed);
  return grow(ds.features, bins, signal, all_rows(ds.size()), params, rng);
}

Ensemble train_forest(const Dataset& ds, const ForestParams& params, const TrainConfig& cfg) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  if (params.n_trees < 1) throw Error(Errc::InvalidArgument, "n_trees must be >= 1");
  if (params.mode == EnsembleMode::Boosting) {
    throw Error(Errc::InvalidArgument, "train_forest builds bagging or extra ensembles");
  }
  const auto bins = make_bins(ds.features);
  TreeParams tp = params.tree;
  tp.split_mode = params.mode == EnsembleMode::Extra ? SplitMode::Random : tp.split_mode;
  if (params.sqrt_features) {
    tp.max_features = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(ds.dimension()))));
  }

  Ensemble e;
  e.mode = params.mode;
  for (int m = 0; m < params.n_trees; ++m) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(m)));
    Signal signal = classification_signal(ds);
    std::vector<Index> rows;
    if (params.mode == EnsembleMode::Bagging && params.bootstrap) {
      signal.weight.setZero();
      for (Index i = 0; i < ds.size(); ++i) {
        signal.weight(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(ds.size())))) += 1.0;
      }
      for (Index i = 0; i < ds.size(); ++i) {
        if (signal.weight(i) > 0.0) rows.push_back(i);
      }
    } else {
      rows = all_rows(ds.size());
    }
    e.trees.push_back(grow(ds.features, bins, signal, rows, tp, rng));
  }
  e.weights.assign(e.trees.size(), 1.0 / static_cast<double>(e.trees.size()));
  return e;
}

Ensemble train_gbt(const Dataset& ds, const GbtParams& params) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  if (params.n_rounds < 1) throw Error(Errc::InvalidArgument, "n_rounds must be >= 1");
  if (!(params.learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must be > 0");
  const auto [legit, phish] = class_distribution(ds);
  if (legit == 0 || phish == 0) {
    throw Error(Errc::SingleClassDataset, "training data holds a single class");
  }

  const auto bins = make_bins(ds.features);
  const VectorXd y = ds.labels_as_double();
  const double base_rate = static_cast<double>(phish) / static_cast<double>(ds.size());

  Ensemble e;
  e.mode = EnsembleMode::Boosting;
  e.learning_rate = params.learning_rate;
  e.base_score = logit(base_rate);

  TreeParams tp{.max_depth = params.max_depth, .min_samples_leaf = params.min_samples_leaf};
  VectorXd score = VectorXd::Constant(ds.size(), e.base_score);
  Signal signal;
  signal.regression = true;
  signal.weight = VectorXd::Ones(ds.size());
  const auto rows = all_rows(ds.size());
  Rng unused(0);
  for (int round = 0; round < params.n_rounds; ++round) {
    const Eigen::ArrayXd p = sigmoid(score.array());
    signal.target = (y.array() - p).matrix();
    signal.hessian = (p * (1.0 - p)).matrix();
    auto tree = grow(ds.features, bins, signal, rows, tp, unused);
    for (Index i = 0; i < ds.size(); ++i) {
      score(i) += params.learning_rate * tree.leaf_value(ds.features.row(i).transpose());
    }
    if (!score.allFinite()) throw Error(Errc::NonFiniteLoss, "boosting scores diverged");
    e.trees.push_back(std::move(tree));
    e.weights.push_back(params.learning_rate);
  }
  return e;
}

double gbt_training_loss(const Ensemble& model, const Dataset& ds, std::size_t rounds) {
  rounds = std::min(rounds, model.trees.size());
  double total = 0.0;
  for (Index i = 0; i < ds.size(); ++i) {
    double z = model.base_score;
    for (std::size_t m = 0; m < rounds; ++m) {
      z += model.weights[m] * model.trees[m].leaf_value(ds.features.row(i).transpose());
    }
    total += softplus(ds.labels(i) == 1 ? -z : z);
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace phishguard
