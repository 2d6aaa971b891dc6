#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phishguard/dataset.hpp"
#include "phishguard/explain.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/mcp.hpp"

namespace phishguard {

enum class Phase { PreAttack, PostAttack, PostMitigation };
std::string_view phase_name(Phase p) noexcept;

// (source, target): target j received fields copied from context i.
using ContaminationLink = std::pair<std::size_t, std::size_t>;

struct ContextSet {
  Phase phase = Phase::PreAttack;
  std::vector<IsolatedContext> contexts;
  std::vector<ContaminationLink> links;  // filled by inject_attack

  std::size_t size() const { return contexts.size(); }
};

struct AttackSpec {
  double contamination_rate = 0.0;  // fraction of contexts attacked
  double delta = 0.0;               // noise magnitude on ternary features
  std::uint64_t seed = 0;
  double copy_probability = 0.5;    // per feature, for each cross-context copy

  static AttackSpec null() { return {}; }
};

struct AttackOutcome {
  ContextSet post;
  std::size_t targets = 0;
  std::size_t blocked_copies = 0;  // refused under isolation
};

// Builds one sealed context per dataset row, ids "<prefix>/<row>".
ContextSet build_contexts(const Dataset& ds, const Model& model, const FusionWeights& fusion,
                          std::string_view prefix = "ctx");

// Attacks ceil(rate * N) seeded targets. Each target copies a seeded
// selection of features from another context (unless `isolation` refuses
// it) and then takes delta noise on ternary features, rounded back to
// {-1,0,1}. Draws for target j depend only on (seed, j), so a larger rate
// attacks a superset with identical per-target changes.
AttackOutcome inject_attack(const ContextSet& pre, const AttackSpec& spec, const Model& model,
                            const FusionWeights& fusion, bool isolation = false);

// Per-context similarity in [0,1]: cosine over [x, p] mapped by (s+1)/2,
// exactly 1 for identical vectors.
double context_similarity(const IsolatedContext& a, const IsolatedContext& b);
double cis(const ContextSet& pre, const ContextSet& post);

// Contexts as sets of (feature, value) pairs plus the predicted label; the
// sum runs over the injector's links only.
double apf(const ContextSet& pre, const ContextSet& post, const std::vector<std::string>& feature_names);

struct CsiResult {
  double raw = 0.0;
  double stability = 1.0;
};

// Monte-Carlo mean of |p(x) - p(x + delta*u)|, u uniform on [-1,1] over the
// fused feature set (every feature when the fusion set is empty).
CsiResult csi(const Model& model, const ContextSet& contexts, const FusionWeights& fusion, double delta,
              int n_trials, std::uint64_t seed);

double mre(double cis_pre, double cis_post_attack, double cis_post_mitigation);

enum class Strategy { Isolation, Validation, Hybrid };
std::string_view strategy_name(Strategy s) noexcept;
Strategy parse_strategy(std::string_view name);

struct MitigationOutcome {
  ContextSet restored;
  std::vector<std::size_t> flagged;
};

// Flags a context when its digest differs from the snapshot or, with a PCS
// configuration, when its provenance score falls below the threshold. Flagged
// contexts are replaced by their snapshot.
MitigationOutcome validate_and_restore(const ContextSet& snapshot, const ContextSet& post, const PcsConfig* pcs);

struct RobustnessOptions {
  std::size_t subset_size = 200;
  int csi_trials = 10;  // CSI uses the attack's delta
  const PcsConfig* pcs = nullptr;
};

struct RobustnessRow {
  std::string dataset;
  Strategy strategy = Strategy::Validation;
  std::size_t contexts = 0;
  double cis = 1.0;              // final state against the snapshot
  double cis_post_attack = 1.0;
  double apf = 0.0;
  std::optional<double> mre;     // absent for isolation
  double csi_raw = 0.0;
  double csi_stability = 1.0;
  std::size_t links = 0;
  std::size_t blocked_copies = 0;
  std::size_t flagged = 0;
  double elapsed_ms = 0.0;      // wall clock; kept out of the formatted report
};

RobustnessRow run_strategy(const Dataset& ds, const Model& model, const FusionWeights& fusion,
                           Strategy strategy, const AttackSpec& spec, const RobustnessOptions& options = {});

using RobustnessReport = std::vector<RobustnessRow>;

std::string format_robustness_table(const RobustnessReport& report);
std::string format_robustness_json(const RobustnessReport& report);

}  // namespace phishguard
