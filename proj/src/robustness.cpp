#include "phishguard/robustness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>

#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"
#include "phishguard/features.hpp"
#include "phishguard/math.hpp"
#include "phishguard/random.hpp"

namespace phishguard {

using Eigen::Index;
using Eigen::VectorXd;

namespace {

std::vector<std::string> names_of(const Model& model) {
  return model.feature_names.empty() ? canonical_feature_names() : model.feature_names;
}

double fused_probability(const Model& model, const VectorXd& x, const VectorXd& weights) {
  return predict_proba(model, x.cwiseProduct(weights));
}

void check_matched(const ContextSet& pre, const ContextSet& post) {
  if (pre.size() != post.size()) {
    throw Error(Errc::IdMismatch, std::to_string(pre.size()) + " contexts vs " + std::to_string(post.size()));
  }
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (pre.contexts[i].id != post.contexts[i].id) {
      throw Error(Errc::IdMismatch, "context " + std::to_string(i) + ": '" + pre.contexts[i].id + "' vs '" +
                                        post.contexts[i].id + "'");
    }
  }
}

double round_ternary(double v) { return std::clamp(std::round(v), -1.0, 1.0); }

}  // namespace

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::PreAttack: return "pre_attack";
    case Phase::PostAttack: return "post_attack";
    case Phase::PostMitigation: return "post_mitigation";
  }
  return "unknown";
}

std::string_view strategy_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::Isolation: return "isolation";
    case Strategy::Validation: return "validation";
    case Strategy::Hybrid: return "hybrid";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  const auto lower = detail::to_lower(detail::trim(name));
  for (auto s : {Strategy::Isolation, Strategy::Validation, Strategy::Hybrid}) {
    if (strategy_name(s) == lower) return s;
  }
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(name) + "'");
}

ContextSet build_contexts(const Dataset& ds, const Model& model, const FusionWeights& fusion,
                          std::string_view prefix) {
  ContextSet set;
  set.phase = Phase::PreAttack;
  set.contexts.reserve(static_cast<std::size_t>(ds.size()));
  for (Index i = 0; i < ds.size(); ++i) {
    set.contexts.push_back(make_context(std::string(prefix) + "/" + std::to_string(i), ds.features.row(i).transpose(),
                                        model, fusion, ds.provenance[static_cast<std::size_t>(i)]));
  }
  return set;
}

AttackOutcome inject_attack(const ContextSet& pre, const AttackSpec& spec, const Model& model,
                            const FusionWeights& fusion, bool isolation) {
  if (!(spec.contamination_rate >= 0.0 && spec.contamination_rate <= 1.0)) {
    throw Error(Errc::InvalidArgument, "contamination rate must lie in [0,1]");
  }
  if (!(spec.delta >= 0.0) || !std::isfinite(spec.delta)) {
    throw Error(Errc::InvalidArgument, "perturbation magnitude must be finite and >= 0");
  }
  if (!(spec.copy_probability >= 0.0 && spec.copy_probability <= 1.0)) {
    throw Error(Errc::InvalidArgument, "copy probability must lie in [0,1]");
  }

  AttackOutcome out;
  out.post = pre;
  out.post.phase = Phase::PostAttack;
  out.post.links.clear();
  const std::size_t n = pre.size();
  if (n == 0) return out;

  const auto names = names_of(model);
  const VectorXd weights = fusion.weight_vector(names);
  std::vector<Index> ternary;
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (is_ternary_feature(names[f])) ternary.push_back(static_cast<Index>(f));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pick(derive_seed(spec.seed, 0));
  shuffle(std::span<std::size_t>(order), pick);
  // The small slack keeps products such as 0.3 * 200 from rounding up.
  const auto k = std::min(n, static_cast<std::size_t>(std::ceil(spec.contamination_rate * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> targets(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(targets.begin(), targets.end());
  out.targets = targets.size();

  for (const auto j : targets) {
    Rng rng(derive_seed(spec.seed, j + 1));
    auto& ctx = out.post.contexts[j];
    VectorXd x = pre.contexts[j].x;
    const auto d = x.size();

    if (n > 1) {
      auto source = static_cast<std::size_t>(uniform_index(rng, n - 1));
      if (source >= j) ++source;
      std::vector<Index> fields;
      for (Index f = 0; f < d; ++f) {
        if (uniform01(rng) < spec.copy_probability) fields.push_back(f);
      }
      if (fields.empty() && d > 0) fields.push_back(static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(d))));
      if (isolation) {
        ++out.blocked_copies;
      } else {
        for (auto f : fields) x(f) = pre.contexts[source].x(f);
        out.post.links.emplace_back(source, j);
      }
    }

    if (spec.delta > 0.0) {
      for (auto f : ternary) {
        if (f < d) x(f) = round_ternary(x(f) + spec.delta * uniform_real(rng, -1.0, 1.0));
      }
    }

    if (x != ctx.x) {
      ctx.x = std::move(x);
      ctx.probability = fused_probability(model, ctx.x, weights);
      ctx.label = predict_label(ctx.probability);
      ctx.seal();
    }
  }
  return out;
}

double context_similarity(const IsolatedContext& a, const IsolatedContext& b) {
  if (a.x.size() != b.x.size()) throw Error(Errc::DimensionMismatch, "context vectors differ in length");
  VectorXd va(a.x.size() + 1), vb(b.x.size() + 1);
  va << a.x, a.probability;
  vb << b.x, b.probability;
  if (va == vb) return 1.0;
  return (cosine_similarity(va, vb) + 1.0) / 2.0;
}

double cis(const ContextSet& pre, const ContextSet& post) {
  check_matched(pre, post);
  if (pre.size() == 0) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pre.size(); ++i) sum += context_similarity(pre.contexts[i], post.contexts[i]);
  return sum / static_cast<double>(pre.size());
}

double apf(const ContextSet& pre, const ContextSet& post, const std::vector<std::string>& feature_names) {
  check_matched(pre, post);
  if (pre.size() == 0 || post.links.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [i, j] : post.links) {
    if (i >= pre.size() || j >= pre.size()) throw Error(Errc::IdMismatch, "contamination link outside the set");
    const auto& ci = pre.contexts[i];
    const auto& cj = post.contexts[j];
    if (ci.x.size() != cj.x.size() || static_cast<std::size_t>(ci.x.size()) != feature_names.size()) {
      throw Error(Errc::DimensionMismatch, "context vectors do not match the feature names");
    }
    // Each context holds exactly one pair per feature name, so the set
    // intersection reduces to a per-position comparison.
    std::size_t shared = (ci.x.array() == cj.x.array()).count();
    if (ci.label == cj.label) ++shared;
    total += static_cast<double>(shared) / static_cast<double>(feature_names.size() + 1);
  }
  return total / static_cast<double>(pre.size());
}

CsiResult csi(const Model& model, const ContextSet& contexts, const FusionWeights& fusion, double delta,
              int n_trials, std::uint64_t seed) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(Errc::InvalidArgument, "delta must be finite and >= 0");
  if (n_trials < 1) throw Error(Errc::InvalidArgument, "n_trials must be >= 1");
  CsiResult r;
  if (contexts.size() == 0 || delta == 0.0) return r;

  const auto names = names_of(model);
  const VectorXd weights = fusion.weight_vector(names);
  std::vector<Index> perturbed;
  for (std::size_t f = 0; f < names.size(); ++f) {
    if (fusion.f_final.empty() ||
        std::find(fusion.f_final.begin(), fusion.f_final.end(), names[f]) != fusion.f_final.end()) {
      perturbed.push_back(static_cast<Index>(f));
    }
  }

  double sum = 0.0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const VectorXd fused = contexts.contexts[i].x.cwiseProduct(weights);
    const double p = predict_proba(model, fused);
    for (int t = 0; t < n_trials; ++t) {
      VectorXd probe = fused;
      for (auto f : perturbed) probe(f) += delta * uniform_real(rng, -1.0, 1.0);
      sum += std::abs(p - predict_proba(model, probe));
    }
  }
  r.raw = std::clamp(sum / (static_cast<double>(contexts.size()) * n_trials), 0.0, 1.0);
  r.stability = 1.0 - r.raw;
  return r;
}

double mre(double cis_pre, double cis_post_attack, double cis_post_mitigation) {
  if (!(cis_pre > 0.0)) throw Error(Errc::ZeroBaseline, "pre-attack CIS must be positive");
  return (cis_post_mitigation - cis_post_attack) / cis_pre;
}

MitigationOutcome validate_and_restore(const ContextSet& snapshot, const ContextSet& post, const PcsConfig* pcs) {
  check_matched(snapshot, post);
  MitigationOutcome out;
  out.restored = post;
  out.restored.phase = Phase::PostMitigation;
  out.restored.links.clear();
  for (std::size_t i = 0; i < post.size(); ++i) {
    const auto& ctx = post.contexts[i];
    bool flag = !ctx.intact() || ctx.digest != snapshot.contexts[i].digest;
    if (!flag && pcs) flag = provenance_score(ctx.x, *pcs, ctx.provenance).flagged;
    if (flag) {
      out.restored.contexts[i] = snapshot.contexts[i];
      out.flagged.push_back(i);
    }
  }
  return out;
}

RobustnessRow run_strategy(const Dataset& ds, const Model& model, const FusionWeights& fusion,
                           Strategy strategy, const AttackSpec& spec, const RobustnessOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (ds.empty()) throw Error(Errc::EmptyDataset, "robustness run needs at least one sample");
  if (ds.dimension() != model.dimension()) {
    throw Error(Errc::DimensionMismatch, "dataset has " + std::to_string(ds.dimension()) + " features, model expects " +
                                             std::to_string(model.dimension()));
  }

  std::vector<Index> rows(static_cast<std::size_t>(ds.size()));
  std::iota(rows.begin(), rows.end(), Index{0});
  Rng rng(derive_seed(spec.seed, 0x5b5));
  shuffle(std::span<Index>(rows), rng);
  rows.resize(std::min(rows.size(), options.subset_size));
  std::sort(rows.begin(), rows.end());
  const Dataset subset = ds.subset(rows);

  const auto pre = build_contexts(subset, model, fusion, ds.name.empty() ? "ctx" : ds.name);
  const bool isolation = strategy != Strategy::Validation;
  const auto attack = inject_attack(pre, spec, model, fusion, isolation);

  RobustnessRow row;
  row.dataset = ds.name;
  row.strategy = strategy;
  row.contexts = pre.size();
  row.cis_post_attack = cis(pre, attack.post);
  row.apf = apf(pre, attack.post, names_of(model));
  row.links = attack.post.links.size();
  row.blocked_copies = attack.blocked_copies;

  const ContextSet* final_set = &attack.post;
  MitigationOutcome mitigation;
  if (strategy != Strategy::Isolation) {
    mitigation = validate_and_restore(pre, attack.post, options.pcs);
    row.flagged = mitigation.flagged.size();
    final_set = &mitigation.restored;
  }
  row.cis = cis(pre, *final_set);
  if (strategy != Strategy::Isolation) row.mre = mre(cis(pre, pre), row.cis_post_attack, row.cis);

  const auto c = csi(model, *final_set, fusion, spec.delta, options.csi_trials, derive_seed(spec.seed, 0xc51));
  row.csi_raw = c.raw;
  row.csi_stability = c.stability;
  row.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string format_robustness_table(const RobustnessReport& report) {
  std::size_t width = 7;
  for (const auto& r : report) width = std::max(width, r.dataset.size());
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %-10s  %8s  %8s  %9s  %8s\n", static_cast<int>(width), "Dataset", "Strategy",
                "CIS", "APF", "MRE", "CSI");
  out += line;
  for (const auto& r : report) {
    char mre_text[32] = "--";
    if (r.mre) std::snprintf(mre_text, sizeof mre_text, "%.6f", *r.mre);
    std::snprintf(line, sizeof line, "%-*s  %-10s  %8.6f  %8.6f  %9s  %8.6f\n", static_cast<int>(width),
                  r.dataset.c_str(), std::string(strategy_name(r.strategy)).c_str(), r.cis, r.apf, mre_text,
                  r.csi_stability);
    out += line;
  }
  return out;
}

std::string format_robustness_json(const RobustnessReport& report) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& r : report) {
    doc.push_back({{"dataset", r.dataset},
                   {"strategy", strategy_name(r.strategy)},
                   {"contexts", r.contexts},
                   {"cis", r.cis},
                   {"cis_post_attack", r.cis_post_attack},
                   {"apf", r.apf},
                   {"mre", r.mre ? nlohmann::json(*r.mre) : nlohmann::json(nullptr)},
                   {"csi_raw", r.csi_raw},
                   {"csi_stability", r.csi_stability},
                   {"links", r.links},
                   {"blocked_copies", r.blocked_copies},
                   {"flagged", r.flagged}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace phishguard
