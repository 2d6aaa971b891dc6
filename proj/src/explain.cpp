#include "phishguard/explain.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"
#include "phishguard/random.hpp"

namespace phishguard {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double entropy_bits(std::span<const std::size_t> counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0 || static_cast<double>(c) == total) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<int> discretize(const Eigen::Ref<const VectorXd>& column) {
  std::vector<double> sorted(column.data(), column.data() + column.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<int> out(static_cast<std::size_t>(column.size()));
  if (distinct.size() <= 3) {
    for (Index i = 0; i < column.size(); ++i) {
      out[static_cast<std::size_t>(i)] = static_cast<int>(
          std::lower_bound(distinct.begin(), distinct.end(), column(i)) - distinct.begin());
    }
    return out;
  }
  const auto n = sorted.size();
  const double q1 = sorted[(n - 1) / 3];
  const double q2 = sorted[2 * (n - 1) / 3];
  for (Index i = 0; i < column.size(); ++i) {
    const double v = column(i);
    out[static_cast<std::size_t>(i)] = v <= q1 ? 0 : (v <= q2 ? 1 : 2);
  }
  return out;
}

namespace {

double ig_of_column(const Eigen::Ref<const VectorXd>& column, const Eigen::VectorXi& labels,
                    double label_entropy) {
  const auto bins = discretize(column);
  std::map<int, std::array<std::size_t, 2>> table;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    table[bins[i]][labels(static_cast<Index>(i)) == 1 ? 1 : 0] += 1;
  }
  const double n = static_cast<double>(bins.size());
  double conditional = 0.0;
  for (const auto& [bin, counts] : table) {
    const double weight = static_cast<double>(counts[0] + counts[1]) / n;
    conditional += weight * entropy_bits(counts);
  }
  return std::clamp(label_entropy - conditional, 0.0, label_entropy);
}

double label_entropy_of(const Dataset& ds) {
  const auto [legit, phish] = class_distribution(ds);
  const std::array<std::size_t, 2> counts{legit, phish};
  return entropy_bits(counts);
}

}  // namespace

double information_gain(const Dataset& ds, std::string_view feature) {
  const auto col = ds.column(feature);
  if (!col) throw Error(Errc::UnknownFeature, std::string(feature));
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no samples");
  return ig_of_column(ds.features.col(*col), ds.labels, label_entropy_of(ds));
}

IgScores information_gain_all(const Dataset& ds) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no samples");
  IgScores s;
  s.label_entropy = label_entropy_of(ds);
  for (Index c = 0; c < ds.dimension(); ++c) {
    s.ig[ds.feature_names[static_cast<std::size_t>(c)]] =
        ig_of_column(ds.features.col(c), ds.labels, s.label_entropy);
  }
  return s;
}

VectorXd background_mean(const Dataset& background) {
  if (background.empty()) throw Error(Errc::EmptyDataset, "empty background");
  return background.features.colwise().mean().transpose();
}

ShapExplanation shap_exact(const Scorer& scorer, const VectorXd& x, const VectorXd& mu, int max_features) {
  if (x.size() != mu.size()) throw Error(Errc::DimensionMismatch, "x and background differ in length");
  const auto n = static_cast<int>(x.size());
  if (n > max_features || n > 24) {
    throw Error(Errc::TooManyFeatures, std::to_string(n) + " features exceed the limit of " +
                                           std::to_string(std::min(max_features, 24)));
  }
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<double> value(std::size_t{full} + 1);
  VectorXd z(n);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    for (int j = 0; j < n; ++j) z(j) = (mask >> j) & 1u ? x(j) : mu(j);
    value[mask] = scorer(z);
  }
  // |S|!(n-|S|-1)!/n! = 1 / (n * C(n-1, |S|))
  std::vector<double> weight(static_cast<std::size_t>(std::max(n, 1)));
  double binom = 1.0;
  for (int s = 0; s < n; ++s) {
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(n) * binom);
    binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
  }

  ShapExplanation e;
  e.method = "exact";
  e.scale = "model output";
  e.phi = VectorXd::Zero(n);
  e.standard_error = VectorXd::Zero(n);
  e.base_value = value[0];
  e.output = value[full];
  for (int j = 0; j < n; ++j) {
    const std::uint32_t bit = std::uint32_t{1} << j;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(mask))] * (value[mask | bit] - value[mask]);
    }
    e.phi(j) = phi;
  }
  return e;
}

ShapExplanation shap_linear(const LinearModel& model, const VectorXd& x, const VectorXd& mu) {
  if (x.size() != model.weights.size() || mu.size() != model.weights.size()) {
    throw Error(Errc::DimensionMismatch, "linear SHAP inputs differ in length from the weights");
  }
  ShapExplanation e;
  e.method = "linear";
  e.scale = "logit";
  e.phi = model.weights.cwiseProduct(x - mu);
  e.standard_error = VectorXd::Zero(x.size());
  e.base_value = model.weights.dot(mu) + model.bias;
  e.output = model.decision(x);
  return e;
}

ShapExplanation shap_sampled(const Scorer& scorer, const VectorXd& x, const VectorXd& mu, int n_samples,
                             std::uint64_t seed) {
  if (x.size() != mu.size()) throw Error(Errc::DimensionMismatch, "x and background differ in length");
  if (n_samples < 100) throw Error(Errc::InvalidArgument, "n_samples must be >= 100");
  const Index n = x.size();
  Rng rng(seed);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  const double base = scorer(mu);
  VectorXd mean = VectorXd::Zero(n);
  VectorXd m2 = VectorXd::Zero(n);
  VectorXd z(n);
  for (int s = 0; s < n_samples; ++s) {
    shuffle(std::span(order), rng);
    z = mu;
    double prev = base;
    for (auto j : order) {
      z(j) = x(j);
      const double cur = scorer(z);
      const double c = cur - prev;
      prev = cur;
      // Welford update
      const double delta = c - mean(j);
      mean(j) += delta / (s + 1);
      m2(j) += delta * (c - mean(j));
    }
  }

  ShapExplanation e;
  e.method = "sampled";
  e.scale = "model output";
  e.n_samples = n_samples;
  e.seed = seed;
  e.base_value = base;
  e.output = scorer(x);
  e.phi = mean;
  e.standard_error = (m2.array() / (n_samples - 1) / n_samples).sqrt().matrix();
  return e;
}

ShapExplanation shap_for_model(const Model& model, const VectorXd& x, const VectorXd& mu, int n_samples,
                               std::uint64_t seed) {
  if (const auto* linear = std::get_if<LinearModel>(&model.params)) return shap_linear(*linear, x, mu);
  const Scorer scorer = [&](const Eigen::Ref<const VectorXd>& v) { return predict_proba(model, v); };
  auto e = x.size() <= 10 ? shap_exact(scorer, x, mu) : shap_sampled(scorer, x, mu, n_samples, seed);
  e.scale = "probability";
  return e;
}

std::map<std::string, double> global_shap_importance(const Model& model, const Dataset& ds, int n_instances,
                                                     int n_samples, std::uint64_t seed) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "no samples to explain");
  const VectorXd mu = background_mean(ds);
  std::vector<Index> rows(static_cast<std::size_t>(ds.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  Rng rng(seed);
  shuffle(std::span(rows), rng);
  rows.resize(std::min(rows.size(), static_cast<std::size_t>(std::max(1, n_instances))));

  VectorXd total = VectorXd::Zero(ds.dimension());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto e = shap_for_model(model, ds.features.row(rows[i]).transpose(), mu, n_samples,
                                  derive_seed(seed, i));
    total += e.phi.cwiseAbs();
  }
  total /= static_cast<double>(rows.size());
  std::map<std::string, double> out;
  for (Index c = 0; c < ds.dimension(); ++c) out[ds.feature_names[static_cast<std::size_t>(c)]] = total(c);
  return out;
}

LimeExplanation lime_explain(const Scorer& scorer, const VectorXd& x, const Dataset& background,
                             const LimeConfig& cfg) {
  if (background.empty()) throw Error(Errc::EmptyDataset, "empty background");
  if (x.size() != background.dimension()) throw Error(Errc::DimensionMismatch, "x and background differ");
  if (cfg.n_perturbations < 50) throw Error(Errc::InvalidArgument, "n_perturbations must be >= 50");
  if (cfg.penalty < 0.0) throw Error(Errc::InvalidArgument, "penalty must be >= 0");
  const Index d = x.size();
  const Index n = cfg.n_perturbations;
  const double width = cfg.kernel_width > 0.0 ? cfg.kernel_width : 0.75 * std::sqrt(static_cast<double>(d));
  const auto scaler = Standardizer::fit(background.features);

  Rng rng(cfg.seed);
  MatrixXd z(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      const bool redraw = uniform01(rng) < 0.5;
      const auto row = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(background.size())));
      z(i, j) = redraw ? background.features(row, j) : x(j);
    }
  }
  bool moved = false;
  for (Index i = 1; i < n && !moved; ++i) moved = z.row(i) != z.row(0);
  if (!moved) throw Error(Errc::DegeneratePerturbations, "every perturbation is identical");

  const MatrixXd s = scaler.transform(z);
  const VectorXd sx = scaler.transform(x.transpose()).transpose();
  VectorXd y(n);
  VectorXd pi(n);
  for (Index i = 0; i < n; ++i) {
    y(i) = scorer(z.row(i).transpose());
    const double dist2 = (s.row(i).transpose() - sx).squaredNorm();
    pi(i) = std::exp(-dist2 / (width * width));
  }
  const double total = pi.sum();
  if (!(total > 0.0)) throw Error(Errc::InvalidArgument, "kernel width too small: all proximities vanish");

  const VectorXd s_mean = (s.transpose() * pi) / total;
  const double y_mean = pi.dot(y) / total;
  const MatrixXd centered = s.rowwise() - s_mean.transpose();
  const VectorXd root = pi.cwiseSqrt();
  const MatrixXd a = root.asDiagonal() * centered;
  const VectorXd b = root.cwiseProduct(y.array().matrix() - VectorXd::Constant(n, y_mean));

  VectorXd g;
  if (cfg.penalty > 0.0) {
    const MatrixXd normal = a.transpose() * a + cfg.penalty * MatrixXd::Identity(d, d);
    g = normal.ldlt().solve(a.transpose() * b);
  } else {
    g = a.completeOrthogonalDecomposition().solve(b);
  }

  LimeExplanation e;
  e.weights = g;
  e.intercept = y_mean - g.dot(s_mean);
  e.kernel_width = width;
  e.n_perturbations = cfg.n_perturbations;
  e.penalty = cfg.penalty;
  e.seed = cfg.seed;
  e.ranking.resize(static_cast<std::size_t>(d));
  std::iota(e.ranking.begin(), e.ranking.end(), Index{0});
  std::stable_sort(e.ranking.begin(), e.ranking.end(),
                   [&](Index l, Index r) { return std::abs(g(l)) > std::abs(g(r)); });
  return e;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::map<std::string, double> min_max(const std::set<std::string>& names,
                                      const std::map<std::string, double>& raw) {
  std::map<std::string, double> out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& n : names) {
    const auto it = raw.find(n);
    const double v = it == raw.end() ? 0.0 : it->second;
    out[n] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (auto& [n, v] : out) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return out;
}

std::vector<std::string> above_median(const std::map<std::string, double>& values) {
  std::vector<double> all;
  for (const auto& [n, v] : values) all.push_back(v);
  const double m = median(all);
  std::vector<std::string> out;
  for (const auto& [n, v] : values) {
    if (v > m) out.push_back(n);
  }
  return out;
}

}  // namespace

VectorXd FusionWeights::weight_vector(const std::vector<std::string>& feature_names) const {
  VectorXd w = VectorXd::Ones(static_cast<Index>(feature_names.size()));
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (const auto it = weights.find(feature_names[i]); it != weights.end()) {
      w(static_cast<Index>(i)) = it->second;
    }
  }
  return w;
}

FusionWeights fuse_weights(const IgScores& ig, const std::map<std::string, double>& shap_importance,
                           double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::InvalidArgument, "alpha must lie in [0,1]");
  std::set<std::string> names;
  for (const auto& [n, v] : ig.ig) names.insert(n);
  for (const auto& [n, v] : shap_importance) names.insert(n);
  if (names.empty()) throw Error(Errc::EmptyFeatureSets, "no features to fuse");

  std::map<std::string, double> abs_phi;
  for (const auto& [n, v] : shap_importance) abs_phi[n] = std::abs(v);
  const auto ig_norm = min_max(names, ig.ig);
  const auto phi_norm = min_max(names, abs_phi);

  FusionWeights f;
  f.alpha = alpha;
  f.beta = 1.0 - alpha;
  f.f_ig = above_median(ig_norm);
  f.f_xai = above_median(phi_norm);
  std::set<std::string> final_set(f.f_ig.begin(), f.f_ig.end());
  final_set.insert(f.f_xai.begin(), f.f_xai.end());
  if (final_set.empty()) {
    throw Error(Errc::EmptyFeatureSets, "no feature lies above either median");
  }
  f.f_final.assign(final_set.begin(), final_set.end());
  const std::set<std::string> in_ig(f.f_ig.begin(), f.f_ig.end());
  const std::set<std::string> in_xai(f.f_xai.begin(), f.f_xai.end());
  for (const auto& n : f.f_final) {
    const double a = in_ig.count(n) ? ig_norm.at(n) : 0.0;
    const double b = in_xai.count(n) ? phi_norm.at(n) : 0.0;
    f.weights[n] = f.alpha * a + f.beta * b;
  }
  return f;
}

FusionWeights identity_fusion() { return FusionWeights{}; }

std::string fusion_to_json(const FusionWeights& f) {
  const nlohmann::json doc = {{"alpha", f.alpha}, {"beta", f.beta},       {"f_ig", f.f_ig},
                              {"f_xai", f.f_xai}, {"f_final", f.f_final}, {"weights", f.weights}};
  return doc.dump(2) + "\n";
}

FusionWeights fusion_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    FusionWeights f;
    f.alpha = doc.at("alpha").get<double>();
    f.beta = doc.at("beta").get<double>();
    f.f_ig = doc.at("f_ig").get<std::vector<std::string>>();
    f.f_xai = doc.at("f_xai").get<std::vector<std::string>>();
    f.f_final = doc.at("f_final").get<std::vector<std::string>>();
    f.weights = doc.at("weights").get<std::map<std::string, double>>();
    if (f.alpha < 0.0 || f.beta < 0.0 || std::abs(f.alpha + f.beta - 1.0) > 1e-12) {
      throw Error(Errc::Format, "alpha and beta must be non-negative and sum to 1");
    }
    for (const auto& [n, w] : f.weights) {
      if (std::find(f.f_final.begin(), f.f_final.end(), n) == f.f_final.end()) {
        throw Error(Errc::Format, "weight for '" + n + "' outside f_final");
      }
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Format, std::string("fusion file: ") + e.what());
  }
}

std::vector<AttributionEntry> rank_attributions(const std::vector<std::string>& names, const VectorXd& x,
                                                const VectorXd& scores) {
  if (static_cast<Index>(names.size()) != scores.size() || x.size() != scores.size()) {
    throw Error(Errc::DimensionMismatch, "names, values and attributions differ in length");
  }
  std::vector<AttributionEntry> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double a = scores(static_cast<Index>(i));
    out.push_back({names[i], x(static_cast<Index>(i)), a,
                   a > 0.0 ? "phishing" : (a < 0.0 ? "legitimate" : "neutral")});
  }
  std::stable_sort(out.begin(), out.end(), [](const AttributionEntry& l, const AttributionEntry& r) {
    return std::abs(l.attribution) > std::abs(r.attribution);
  });
  return out;
}

std::string format_attribution_bars(const std::vector<AttributionEntry>& entries, int width) {
  std::size_t name_width = 7;
  double peak = 0.0;
  for (const auto& e : entries) {
    name_width = std::max(name_width, e.feature.size());
    peak = std::max(peak, std::abs(e.attribution));
  }
  std::string out;
  char line[512];
  for (const auto& e : entries) {
    const int len = peak > 0.0 ? static_cast<int>(std::lround(std::abs(e.attribution) / peak * width)) : 0;
    const std::string bar(static_cast<std::size_t>(len), e.attribution < 0.0 ? '-' : '+');
    std::snprintf(line, sizeof line, "%-*s %8s %+12.6f  %s\n", static_cast<int>(name_width), e.feature.c_str(),
                  detail::format_number(e.value).c_str(), e.attribution, bar.c_str());
    out += line;
  }
  return out;
}

std::string attributions_json(const std::vector<AttributionEntry>& entries, std::string_view method,
                              std::string_view scale, double base_value) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) {
    list.push_back({{"feature", e.feature}, {"value", e.value}, {"attribution", e.attribution},
                    {"direction", e.direction}});
  }
  const nlohmann::json doc = {{"method", method}, {"scale", scale}, {"base_value", base_value},
                              {"attributions", list}};
  return doc.dump(2) + "\n";
}

}  // namespace phishguard
