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

Standardizer Standardizer::fit(const MatrixXd& x) {
  Standardizer s;
  const auto n = static_cast<double>(std::max<Index>(x.rows(), 1));
  s.mean = x.colwise().sum().transpose() / n;
  s.scale = VectorXd::Ones(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean(c)).square().sum() / n;
    if (var > 1e-24) s.scale(c) = std::sqrt(var);
  }
  return s;
}

Standardizer Standardizer::identity(Index dimension) {
  return {VectorXd::Zero(dimension), VectorXd::Ones(dimension)};
}

MatrixXd Standardizer::transform(const MatrixXd& x) const {
  MatrixXd out = x.rowwise() - mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  // Constant columns: the centered values are 0 up to rounding; make it exact.
  for (Index c = 0; c < out.cols(); ++c) {
    if (scale(c) == 1.0 && (x.col(c).array() == mean(c)).all()) out.col(c).setZero();
  }
  return out;
}

std::string_view loss_name(Loss loss) noexcept {
  switch (loss) {
    case Loss::Logistic: return "logistic";
    case Loss::Hinge: return "hinge";
    case Loss::Squared: return "squared";
  }
  return "unknown";
}

std::string_view regularization_name(Regularization reg) noexcept {
  switch (reg) {
    case Regularization::None: return "none";
    case Regularization::L1: return "l1";
    case Regularization::L2: return "l2";
    case Regularization::Elastic: return "elastic";
  }
  return "unknown";
}

double LinearModel::decision(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != weights.size()) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(weights.size()) +
                                             " features, got " + std::to_string(x.size()));
  }
  return weights.dot(x) + bias;
}

namespace {

double l1_strength(const LinearSpec& spec) {
  return spec.regularization == Regularization::L1 || spec.regularization == Regularization::Elastic
             ? spec.l1
             : 0.0;
}

double l2_strength(const LinearSpec& spec) {
  return spec.regularization == Regularization::L2 || spec.regularization == Regularization::Elastic
             ? spec.l2
             : 0.0;
}

// Smooth part of the objective: mean loss plus the L2 term. Writes the
// gradient into grad_w / grad_b when they are non-null.
double smooth_objective(const MatrixXd& x, const VectorXd& y, Loss loss, double l2,
                        const VectorXd& w, double b, VectorXd* grad_w, double* grad_b) {
  const VectorXd z = (x * w).array() + b;
  const Eigen::ArrayXd s = 2.0 * y.array() - 1.0;
  Eigen::ArrayXd dz;
  double total = 0.0;
  switch (loss) {
    case Loss::Logistic: {
      const Eigen::ArrayXd m = -s * z.array();
      total = softplus(m).sum();
      dz = sigmoid(z.array()) - y.array();
      break;
    }
    case Loss::Squared: {
      const Eigen::ArrayXd r = z.array() - s;
      total = 0.5 * r.square().sum();
      dz = r;
      break;
    }
    case Loss::Hinge: {
      const Eigen::ArrayXd m = (1.0 - s * z.array()).max(0.0);
      total = m.square().sum();
      dz = -2.0 * s * m;
      break;
    }
  }
  const double n = static_cast<double>(x.rows());
  if (grad_w) *grad_w = x.transpose() * dz.matrix() / n + l2 * w;
  if (grad_b) *grad_b = dz.sum() / n;
  return total / n + 0.5 * l2 * w.squaredNorm();
}

VectorXd soft_threshold(const VectorXd& v, double t) {
  if (t <= 0.0) return v;
  return v.array().sign() * (v.array().abs() - t).max(0.0);
}

void check_finite(double value) {
  if (!std::isfinite(value)) {
    throw Error(Errc::NonFiniteLoss, "training loss diverged; lower the learning rate");
  }
}

// The bias is unpenalized but shares the step size 1/L with w; a large l2
// makes L large and stalls it. Given w, the objective is convex in b, so
// bisect on its derivative.
void polish_bias(const MatrixXd& x, const VectorXd& y, Loss loss, const VectorXd& w, double& b) {
  const auto grad = [&](double bb) {
    double g = 0.0;
    smooth_objective(x, y, loss, 0.0, w, bb, nullptr, &g);
    return g;
  };
  const double g0 = grad(b);
  if (g0 == 0.0) return;
  double lo = b, hi = b;
  double step = 1.0;
  const double dir = g0 > 0 ? -1.0 : 1.0;
  double far = b;
  for (int i = 0; i < 60; ++i) {
    far = b + dir * step;
    if ((grad(far) > 0) != (g0 > 0)) break;
    step *= 2.0;
  }
  if ((grad(far) > 0) == (g0 > 0)) return;  // no sign change: the infimum is at infinity
  lo = std::min(b, far);
  hi = std::max(b, far);
  for (int i = 0; i < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (grad(mid) > 0) hi = mid; else lo = mid;
  }
  b = 0.5 * (lo + hi);
}

// Accelerated proximal gradient with backtracking and objective-based restart.
void solve_full_batch(const MatrixXd& x, const VectorXd& y, const LinearSpec& spec,
                      const TrainConfig& cfg, VectorXd& w, double& b) {
  const double l1 = l1_strength(spec);
  const double l2 = l2_strength(spec);
  const auto objective = [&](const VectorXd& w_, double b_) {
    return smooth_objective(x, y, spec.loss, l2, w_, b_, nullptr, nullptr) + l1 * w_.lpNorm<1>();
  };

  VectorXd yw = w;
  double yb = b;
  double t = 1.0;
  double lipschitz = 1.0;
  double current = objective(w, b);
  check_finite(current);

  for (int iter = 0; iter < cfg.max_epochs; ++iter) {
    VectorXd gw;
    double gb = 0.0;
    const double fy = smooth_objective(x, y, spec.loss, l2, yw, yb, &gw, &gb);
    check_finite(fy);

    VectorXd nw;
    double nb = 0.0;
    while (true) {
      nw = soft_threshold(yw - gw / lipschitz, l1 / lipschitz);
      nb = yb - gb / lipschitz;
      const VectorXd dw = nw - yw;
      const double db = nb - yb;
      const double bound = fy + gw.dot(dw) + gb * db + 0.5 * lipschitz * (dw.squaredNorm() + db * db);
      const double fn = smooth_objective(x, y, spec.loss, l2, nw, nb, nullptr, nullptr);
      check_finite(fn);
      if (fn <= bound + 1e-12 * std::abs(bound) || lipschitz > 1e12) break;
      lipschitz *= 2.0;
    }

    const double next = objective(nw, nb);
    if (next > current) {
      // Momentum overshot; restart from the last iterate.
      t = 1.0;
      yw = w;
      yb = b;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    yw = nw + ((t - 1.0) / t_next) * (nw - w);
    yb = nb + ((t - 1.0) / t_next) * (nb - b);
    t = t_next;
    w = std::move(nw);
    b = nb;
    const double change = current - next;
    current = next;
    if (change <= cfg.tolerance * std::max(1.0, std::abs(current))) break;
  }
  polish_bias(x, y, spec.loss, w, b);
}

void solve_sgd(const MatrixXd& x, const VectorXd& y, const LinearSpec& spec, const TrainConfig& cfg,
               VectorXd& w, double& b) {
  const double l1 = l1_strength(spec);
  const double l2 = l2_strength(spec);
  Rng rng(derive_seed(cfg.seed, 0x5d6));
  std::vector<Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);
    shuffle(std::span(order), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      const std::span<const Index> rows(order.data() + start, stop - start);
      MatrixXd xb(static_cast<Index>(rows.size()), x.cols());
      VectorXd yb(static_cast<Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        xb.row(static_cast<Index>(i)) = x.row(rows[i]);
        yb(static_cast<Index>(i)) = y(rows[i]);
      }
      VectorXd gw;
      double gb = 0.0;
      smooth_objective(xb, yb, spec.loss, l2, w, b, &gw, &gb);
      w = soft_threshold(w - lr * gw, lr * l1);
      b -= lr * gb;
    }
    check_finite(smooth_objective(x, y, spec.loss, l2, w, b, nullptr, nullptr));
  }
}

void require_two_classes(const Dataset& ds) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  const auto [legit, phish] = class_distribution(ds);
  if (legit == 0 || phish == 0) {
    throw Error(Errc::SingleClassDataset, "training data holds a single class");
  }
}

}  // namespace

LinearFit fit_linear(const Dataset& ds, const LinearSpec& spec, const TrainConfig& cfg) {
  require_two_classes(ds);
  const auto scaler = cfg.standardize ? Standardizer::fit(ds.features)
                                      : Standardizer::identity(ds.dimension());
  const MatrixXd x = scaler.transform(ds.features);
  const VectorXd y = ds.labels_as_double();

  VectorXd w = VectorXd::Zero(x.cols());
  double b = 0.0;
  if (spec.stochastic) {
    solve_sgd(x, y, spec, cfg, w, b);
  } else {
    solve_full_batch(x, y, spec, cfg, w, b);
  }

  LinearFit fit;
  fit.standardized_weights = w;
  fit.standardized_bias = b;
  fit.model.spec = spec;
  fit.model.weights = w.array() / scaler.scale.array();
  fit.model.bias = b - fit.model.weights.dot(scaler.mean);
  return fit;
}

LinearModel train_linear(const Dataset& ds, const LinearSpec& spec, const TrainConfig& cfg) {
  return fit_linear(ds, spec, cfg).model;
}

std::vector<std::vector<Index>> stratified_folds(const Eigen::VectorXi& labels, int k,
                                                 std::uint64_t seed) {
  if (k < 2) throw Error(Errc::InvalidArgument, "folds must be >= 2");
  if (k > labels.size()) {
    throw Error(Errc::InvalidArgument, "folds (" + std::to_string(k) + ") exceed sample count (" +
                                           std::to_string(labels.size()) + ")");
  }
  Rng rng(seed);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  std::size_t deal = 0;
  for (int cls : {0, 1}) {
    std::vector<Index> members;
    for (Index i = 0; i < labels.size(); ++i) {
      if (labels(i) == cls) members.push_back(i);
    }
    shuffle(std::span(members), rng);
    for (auto i : members) folds[deal++ % folds.size()].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<Index> training_indices(const std::vector<std::vector<Index>>& folds, std::size_t fold) {
  std::vector<Index> rows;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != fold) rows.insert(rows.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

VectorXd average_fold_coefficients(const Dataset& ds, const TrainConfig& cfg) {
  const auto folds = stratified_folds(ds.labels, cfg.folds, cfg.seed);
  VectorXd sum = VectorXd::Zero(ds.dimension());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = ds.subset(training_indices(folds, f));
    sum += fit_linear(train, LinearSpec{}, cfg).standardized_weights;
  }
  return sum / static_cast<double>(folds.size());
}

std::vector<Index> select_features_by_coefficient(const VectorXd& w, int m) {
  if (m < 1 || m > w.size()) {
    throw Error(Errc::InvalidM, "m = " + std::to_string(m) + " outside [1, " +
                                    std::to_string(w.size()) + "]");
  }
  std::vector<Index> order(static_cast<std::size_t>(w.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(w(a)) > std::abs(w(b)); });
  order.resize(static_cast<std::size_t>(m));
  return order;
}

}  // namespace phishguard
