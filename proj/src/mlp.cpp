#include <algorithm>
#include <cmath>
#include <numeric>

#include "phishguard/error.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/math.hpp"
#include "phishguard/random.hpp"

namespace phishguard {

using Eigen::ArrayXXd;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd activate(const MatrixXd& z, Activation act) {
  if (act == Activation::Relu) return z.cwiseMax(0.0);
  return sigmoid(z.array()).matrix();
}

// Derivative expressed through the pre-activation z and activation a.
ArrayXXd activation_slope(const MatrixXd& z, const MatrixXd& a, Activation act) {
  if (act == Activation::Relu) return (z.array() > 0.0).cast<double>();
  return a.array() * (1.0 - a.array());
}

struct Forward {
  std::vector<MatrixXd> pre;   // z per layer, out x n
  std::vector<MatrixXd> post;  // post[0] is the input, post[l+1] the activation of layer l
};

Forward forward(const MlpModel& model, const MatrixXd& x) {
  Forward f;
  f.post.push_back(x.transpose());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    MatrixXd z = layer.weights * f.post.back();
    z.colwise() += layer.bias;
    const bool last = l + 1 == model.layers.size();
    f.post.push_back(activate(z, last ? Activation::Sigmoid : layer.activation));
    f.pre.push_back(std::move(z));
  }
  return f;
}

double mean_bce_from_logits(const MatrixXd& logits, const VectorXd& y) {
  // softplus(z) - y z is the cross-entropy of sigmoid(z) without clamping.
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) total += softplus(logits(0, i)) - y(i) * logits(0, i);
  return total / static_cast<double>(y.size());
}

void check_shapes(const MlpModel& model) {
  if (model.layers.empty()) throw Error(Errc::InvalidArgument, "MLP has no layers");
  for (std::size_t l = 1; l < model.layers.size(); ++l) {
    if (model.layers[l].weights.cols() != model.layers[l - 1].weights.rows()) {
      throw Error(Errc::DimensionMismatch, "layer " + std::to_string(l) + " input size mismatch");
    }
  }
  if (model.layers.back().weights.rows() != 1) {
    throw Error(Errc::DimensionMismatch, "MLP output layer must have one unit");
  }
}

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<MatrixXd> mw, vw;
  std::vector<VectorXd> mb, vb;

  explicit Adam(const MlpModel& model) {
    for (const auto& layer : model.layers) {
      mw.push_back(MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      vw.push_back(mw.back());
      mb.push_back(VectorXd::Zero(layer.bias.size()));
      vb.push_back(mb.back());
    }
  }

  void update(MlpModel& model, const MlpGradient& g, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      mw[l] = beta1 * mw[l] + (1.0 - beta1) * g.weights[l];
      vw[l] = beta2 * vw[l] + (1.0 - beta2) * g.weights[l].cwiseAbs2();
      mb[l] = beta1 * mb[l] + (1.0 - beta1) * g.bias[l];
      vb[l] = beta2 * vb[l] + (1.0 - beta2) * g.bias[l].cwiseAbs2();
      model.layers[l].weights.array() -=
          lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + eps);
      model.layers[l].bias.array() -=
          lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + eps);
    }
  }
};

MatrixXd gather_rows(const MatrixXd& x, std::span<const Index> rows) {
  MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

VectorXd gather(const VectorXd& y, std::span<const Index> rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = y(rows[i]);
  return out;
}

}  // namespace

MlpModel init_mlp(Index input_dimension, const MlpParams& params, std::uint64_t seed) {
  if (params.layer_sizes.empty() || params.layer_sizes.back() != 1) {
    throw Error(Errc::InvalidArgument, "layer sizes must end in 1");
  }
  Rng rng(seed);
  MlpModel model;
  Index in = input_dimension;
  for (std::size_t l = 0; l < params.layer_sizes.size(); ++l) {
    const Index out = params.layer_sizes[l];
    if (out < 1) throw Error(Errc::InvalidArgument, "layer sizes must be positive");
    const bool last = l + 1 == params.layer_sizes.size();
    const Activation act = last ? Activation::Sigmoid : params.hidden_activation;
    // He init for ReLU layers, Glorot otherwise.
    const double limit = act == Activation::Relu ? std::sqrt(6.0 / static_cast<double>(in))
                                                 : std::sqrt(6.0 / static_cast<double>(in + out));
    MlpLayer layer;
    layer.weights.resize(out, in);
    for (Index r = 0; r < out; ++r) {
      for (Index c = 0; c < in; ++c) layer.weights(r, c) = uniform_real(rng, -limit, limit);
    }
    layer.bias = VectorXd::Zero(out);
    layer.activation = act;
    model.layers.push_back(std::move(layer));
    in = out;
  }
  return model;
}

MlpGradient mlp_loss_and_gradient(const MlpModel& model, const MatrixXd& x, const VectorXd& y) {
  check_shapes(model);
  if (x.cols() != model.layers.front().weights.cols()) {
    throw Error(Errc::DimensionMismatch, "input width does not match the first layer");
  }
  const auto f = forward(model, x);
  const double n = static_cast<double>(x.rows());
  MlpGradient g;
  g.loss = mean_bce_from_logits(f.pre.back(), y);
  g.weights.resize(model.layers.size());
  g.bias.resize(model.layers.size());

  MatrixXd delta = (f.post.back() - y.transpose()) / n;
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    g.weights[l] = delta * f.post[l].transpose();
    g.bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    const MatrixXd back = model.layers[l].weights.transpose() * delta;
    delta = (back.array() * activation_slope(f.pre[l - 1], f.post[l], model.layers[l - 1].activation))
                .matrix();
  }
  return g;
}

MlpModel train_mlp(const Dataset& ds, const MlpParams& params, const TrainConfig& cfg) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  const auto [legit, phish] = class_distribution(ds);
  if (legit == 0 || phish == 0) {
    throw Error(Errc::SingleClassDataset, "training data holds a single class");
  }
  if (!(cfg.learning_rate > 0.0)) throw Error(Errc::InvalidArgument, "learning rate must be > 0");

  const auto scaler = cfg.standardize ? Standardizer::fit(ds.features)
                                      : Standardizer::identity(ds.dimension());
  const MatrixXd x = scaler.transform(ds.features);
  const VectorXd y = ds.labels_as_double();

  Rng rng(derive_seed(cfg.seed, 0x31f));
  std::vector<Index> order(static_cast<std::size_t>(ds.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<Index> holdout;
  if (cfg.validation_fraction > 0.0 && ds.size() >= 10) {
    shuffle(std::span(order), rng);
    const auto n_val = static_cast<std::size_t>(
        std::ceil(cfg.validation_fraction * static_cast<double>(order.size())));
    holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    order.erase(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(holdout.begin(), holdout.end());
    std::sort(order.begin(), order.end());
  }
  const MatrixXd x_val = gather_rows(x, holdout);
  const VectorXd y_val = gather(y, holdout);

  MlpModel model = init_mlp(ds.dimension(), params, derive_seed(cfg.seed, 0x1a7));
  Adam adam(model);
  MlpModel best = model;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch);
    shuffle(std::span(order), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      const std::span<const Index> rows(order.data() + start, stop - start);
      const auto g = mlp_loss_and_gradient(model, gather_rows(x, rows), gather(y, rows));
      if (!std::isfinite(g.loss)) {
        throw Error(Errc::NonFiniteLoss, "MLP loss diverged at epoch " + std::to_string(epoch));
      }
      adam.update(model, g, lr);
    }
    if (holdout.empty()) continue;
    const double val = mean_bce_from_logits(forward(model, x_val).pre.back(), y_val);
    if (!std::isfinite(val)) throw Error(Errc::NonFiniteLoss, "MLP validation loss diverged");
    if (val < best_loss - 1e-12) {
      best_loss = val;
      best = model;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  if (!holdout.empty()) model = std::move(best);

  // Fold the input standardization into the first layer.
  auto& first = model.layers.front();
  first.weights = first.weights.array().rowwise() / scaler.scale.transpose().array();
  first.bias -= first.weights * scaler.mean;
  return model;
}

double mlp_forward(const MlpModel& model, const Eigen::Ref<const VectorXd>& x) {
  VectorXd a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    VectorXd z = layer.weights * a + layer.bias;
    const bool last = l + 1 == model.layers.size();
    if (last) return sigmoid(z(0));
    a = layer.activation == Activation::Relu ? VectorXd(z.cwiseMax(0.0))
                                             : VectorXd(sigmoid(z.array()).matrix());
  }
  return 0.5;
}

}  // namespace phishguard
