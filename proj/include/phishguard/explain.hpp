#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "phishguard/dataset.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/metrics.hpp"

namespace phishguard {

// Entropy in bits of a label histogram; empty bins contribute 0.
double entropy_bits(std::span<const std::size_t> counts);

// Columns with more than three distinct values are cut into terciles first.
std::vector<int> discretize(const Eigen::Ref<const Eigen::VectorXd>& column);

struct IgScores {
  std::map<std::string, double> ig;  // feature -> bits
  double label_entropy = 0.0;
};

double information_gain(const Dataset& ds, std::string_view feature);
IgScores information_gain_all(const Dataset& ds);

struct ShapExplanation {
  double base_value = 0.0;           // phi_0
  Eigen::VectorXd phi;
  Eigen::VectorXd standard_error;    // sampled method only; zeros otherwise
  std::string method;                // exact, linear, sampled
  std::string scale;                 // logit or probability
  int n_samples = 0;
  std::uint64_t seed = 0;
  double output = 0.0;               // scorer value at x
};

Eigen::VectorXd background_mean(const Dataset& background);

// Full 2^n subset enumeration; absent features take the background mean.
ShapExplanation shap_exact(const Scorer& scorer, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& background_mean, int max_features = 15);

// Closed form on the logit: phi_j = w_j (x_j - mu_j), phi_0 = w.mu + b.
ShapExplanation shap_linear(const LinearModel& model, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& background_mean);

// Monte-Carlo over n_samples random feature orderings. Every ordering
// telescopes to f(x) - f(mu), so local accuracy holds for the estimate too.
ShapExplanation shap_sampled(const Scorer& scorer, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& background_mean, int n_samples,
                             std::uint64_t seed);

// Logit-scale linear closed form for linear models; probability-scale
// sampling otherwise.
ShapExplanation shap_for_model(const Model& model, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& background_mean, int n_samples,
                               std::uint64_t seed);

// Mean |phi_j| over up to n_instances seeded rows of ds.
std::map<std::string, double> global_shap_importance(const Model& model, const Dataset& ds,
                                                     int n_instances, int n_samples,
                                                     std::uint64_t seed);

struct LimeExplanation {
  Eigen::VectorXd weights;             // surrogate coefficients on standardized features
  std::vector<Eigen::Index> ranking;   // feature indices by descending |weight|
  double intercept = 0.0;
  double kernel_width = 0.0;
  int n_perturbations = 0;
  double penalty = 0.0;
  std::uint64_t seed = 0;
};

struct LimeConfig {
  int n_perturbations = 1000;
  double kernel_width = 0.0;  // <= 0 selects 0.75 * sqrt(d)
  double penalty = 1.0;
  std::uint64_t seed = 0;
};

// Each feature of each perturbation is redrawn from a random background row
// with probability 1/2. Throws DegeneratePerturbations when no draw moves.
LimeExplanation lime_explain(const Scorer& scorer, const Eigen::VectorXd& x, const Dataset& background,
                             const LimeConfig& cfg);

struct FusionWeights {
  double alpha = 0.5;
  double beta = 0.5;
  std::vector<std::string> f_ig;
  std::vector<std::string> f_xai;
  std::vector<std::string> f_final;
  std::map<std::string, double> weights;  // members of f_final only

  // Per-feature multiplier in the given order; non-members pass through as 1.
  Eigen::VectorXd weight_vector(const std::vector<std::string>& feature_names) const;
};

// Both sides are min-max normalized to [0,1]. A side whose set does not
// contain j contributes 0 to w_j.
FusionWeights fuse_weights(const IgScores& ig, const std::map<std::string, double>& shap_importance,
                           double alpha);

FusionWeights identity_fusion();
std::string fusion_to_json(const FusionWeights& f);
FusionWeights fusion_from_json(std::string_view text);

struct AttributionEntry {
  std::string feature;
  double value = 0.0;
  double attribution = 0.0;
  std::string direction;  // "phishing", "legitimate" or "neutral"
};

// Sorted by descending |attribution|, ties by input order.
std::vector<AttributionEntry> rank_attributions(const std::vector<std::string>& names,
                                                const Eigen::VectorXd& x, const Eigen::VectorXd& scores);
std::string format_attribution_bars(const std::vector<AttributionEntry>& entries, int width = 30);
std::string attributions_json(const std::vector<AttributionEntry>& entries, std::string_view method,
                              std::string_view scale, double base_value);

}  // namespace phishguard
