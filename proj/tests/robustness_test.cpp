#include <gtest/gtest.h>

#include <json.hpp>

#include "phishguard/error.hpp"
#include "phishguard/robustness.hpp"
#include "support.hpp"

namespace pg = phishguard;
using Eigen::Index;
using Eigen::VectorXd;

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

const pg::Dataset& data() {
  static const auto ds = pgtest::canonical_dataset(300, 70);
  return ds;
}

const pg::Model& model() {
  static const auto m = pg::train_model(data(), "logistic", pg::TrainConfig{});
  return m;
}

pg::ContextSet contexts(std::size_t n = 40) {
  std::vector<Index> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<Index>(i);
  return pg::build_contexts(data().subset(rows), model(), pg::identity_fusion());
}

pg::AttackSpec attack(double rate, double delta = 0.75, std::uint64_t seed = 5) {
  pg::AttackSpec s;
  s.contamination_rate = rate;
  s.delta = delta;
  s.seed = seed;
  return s;
}

pg::IsolatedContext raw_context(std::string id, VectorXd x, double p, int label) {
  pg::IsolatedContext c;
  c.id = std::move(id);
  c.x = std::move(x);
  c.probability = p;
  c.label = label;
  c.seal();
  return c;
}

}  // namespace

TEST(InjectAttack, NullAttackLeavesContextsUntouched) {
  const auto pre = contexts();
  const auto out = pg::inject_attack(pre, pg::AttackSpec::null(), model(), pg::identity_fusion());
  EXPECT_EQ(out.post.contexts, pre.contexts);
  EXPECT_TRUE(out.post.links.empty());
  EXPECT_EQ(out.targets, 0u);
  EXPECT_EQ(out.post.phase, pg::Phase::PostAttack);
  EXPECT_EQ(pg::cis(pre, out.post), 1.0);
}

TEST(InjectAttack, FullRateOnTwoContextsPlantsForeignFields) {
  const auto pre = contexts(2);
  ASSERT_NE(pre.contexts[0].x, pre.contexts[1].x);
  const auto out = pg::inject_attack(pre, attack(1.0, 0.0), model(), pg::identity_fusion());
  ASSERT_EQ(out.targets, 2u);
  ASSERT_EQ(out.post.links.size(), 2u);
  for (const auto& [src, dst] : out.post.links) {
    EXPECT_NE(src, dst);
    int foreign = 0;
    for (Index j = 0; j < 23; ++j) {
      const double v = out.post.contexts[dst].x(j);
      foreign += v == pre.contexts[src].x(j) && v != pre.contexts[dst].x(j);
    }
    EXPECT_GE(foreign, 1) << dst;
  }
  for (const auto& c : out.post.contexts) {
    EXPECT_TRUE(c.intact());
    EXPECT_DOUBLE_EQ(c.probability, pg::predict_proba(model(), c.x));
  }
}

TEST(InjectAttack, SameSeedSamePostSet) {
  const auto pre = contexts();
  const auto a = pg::inject_attack(pre, attack(0.3), model(), pg::identity_fusion());
  const auto b = pg::inject_attack(pre, attack(0.3), model(), pg::identity_fusion());
  EXPECT_EQ(a.post.contexts, b.post.contexts);
  EXPECT_EQ(a.post.links, b.post.links);
  const auto c = pg::inject_attack(pre, attack(0.3, 0.75, 6), model(), pg::identity_fusion());
  EXPECT_NE(a.post.contexts, c.post.contexts);
}

TEST(InjectAttack, TernaryValuesStayTernaryAndTargetCountIsCeil) {
  const auto pre = contexts(40);
  const auto out = pg::inject_attack(pre, attack(0.33, 1.0), model(), pg::identity_fusion());
  EXPECT_EQ(out.targets, 14u);  // ceil(0.33 * 40) = ceil(13.2)
  const auto len = static_cast<Index>(*pg::feature_index("URL_Length"));
  for (const auto& c : out.post.contexts) {
    for (Index j = 0; j < 23; ++j) {
      if (j == len) continue;
      EXPECT_TRUE(c.x(j) == -1 || c.x(j) == 0 || c.x(j) == 1);
    }
  }
}

TEST(InjectAttack, IsolationBlocksEveryCopy) {
  const auto pre = contexts();
  const auto out = pg::inject_attack(pre, attack(0.5), model(), pg::identity_fusion(), true);
  EXPECT_TRUE(out.post.links.empty());
  EXPECT_EQ(out.blocked_copies, out.targets);
  EXPECT_EQ(pg::apf(pre, out.post, model().feature_names), 0.0);
}

TEST(InjectAttack, InvalidSpec) {
  const auto pre = contexts(4);
  EXPECT_EQ(code_of([&] { pg::inject_attack(pre, attack(1.5), model(), pg::identity_fusion()); }),
            pg::Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { pg::inject_attack(pre, attack(0.5, -1.0), model(), pg::identity_fusion()); }),
            pg::Errc::InvalidArgument);
}

TEST(Cis, IdenticalSetsScoreOne) {
  for (std::size_t n : {1u, 7u, 40u}) {
    const auto s = contexts(n);
    EXPECT_EQ(pg::cis(s, s), 1.0);
  }
}

TEST(Cis, OrthogonalVectorsMapToHalf) {
  VectorXd a(2), b(2);
  a << 1, 0;
  b << 0, 1;
  const auto pre = raw_context("c", a, 0.0, 0);
  const auto post = raw_context("c", b, 0.0, 0);
  EXPECT_DOUBLE_EQ(pg::context_similarity(pre, post), 0.5);
  pg::ContextSet s1, s2;
  s1.contexts = {pre};
  s2.contexts = {post};
  EXPECT_DOUBLE_EQ(pg::cis(s1, s2), 0.5);
}

TEST(Cis, MismatchedIds) {
  auto a = contexts(3);
  auto b = a;
  b.contexts[1].id = "other";
  EXPECT_EQ(code_of([&] { pg::cis(a, b); }), pg::Errc::IdMismatch);
  b = a;
  b.contexts.pop_back();
  EXPECT_EQ(code_of([&] { pg::cis(a, b); }), pg::Errc::IdMismatch);
}

TEST(Apf, FullCopyBetweenTwoContextsIsHalf) {
  VectorXd a = VectorXd::Constant(23, 1.0), b = VectorXd::Constant(23, -1.0);
  pg::ContextSet pre, post;
  pre.contexts = {raw_context("0", a, 0.9, 1), raw_context("1", b, 0.1, 0)};
  post.contexts = {raw_context("0", a, 0.9, 1), raw_context("1", a, 0.9, 1)};
  post.links = {{0, 1}};
  EXPECT_DOUBLE_EQ(pg::apf(pre, post, pg::canonical_feature_names()), 0.5);
  post.links.clear();
  EXPECT_EQ(pg::apf(pre, post, pg::canonical_feature_names()), 0.0);
}

TEST(Apf, MonotoneInContaminationRate) {
  const auto pre = contexts(60);
  double prev = -1.0;
  for (double rate : {0.0, 0.25, 0.5, 1.0}) {
    const auto out = pg::inject_attack(pre, attack(rate), model(), pg::identity_fusion());
    const double v = pg::apf(pre, out.post, model().feature_names);
    EXPECT_GE(v, prev) << rate;
    prev = v;
  }
  EXPECT_GT(prev, 0.0);
}

TEST(Csi, ZeroDeltaAndConstantModel) {
  const auto s = contexts();
  const auto r = pg::csi(model(), s, pg::identity_fusion(), 0.0, 10, 1);
  EXPECT_EQ(r.raw, 0.0);
  EXPECT_EQ(r.stability, 1.0);
  const pg::Model constant{"logistic", model().feature_names, pg::LinearModel{VectorXd::Zero(23), 0.3, {}}};
  const auto c = pg::csi(constant, s, pg::identity_fusion(), 0.9, 10, 1);
  EXPECT_EQ(c.raw, 0.0);
}

TEST(Csi, BoundedAndComplementary) {
  const auto s = contexts();
  for (double delta : {0.1, 0.75, 3.0}) {
    const auto r = pg::csi(model(), s, pg::identity_fusion(), delta, 5, 2);
    EXPECT_GE(r.raw, 0.0);
    EXPECT_LE(r.raw, 1.0);
    EXPECT_EQ(r.raw + r.stability, 1.0);
    EXPECT_GT(r.raw, 0.0);
  }
  EXPECT_EQ(pg::csi(model(), s, pg::identity_fusion(), 0.5, 5, 3).raw,
            pg::csi(model(), s, pg::identity_fusion(), 0.5, 5, 3).raw);
}

TEST(Mre, SubstitutionExamples) {
  EXPECT_EQ(pg::mre(1.0, 1.0, 1.0), 0.0);
  EXPECT_NEAR(pg::mre(1.0, 0.8, 1.0), 0.2, 1e-15);
  EXPECT_EQ(code_of([] { pg::mre(0.0, 0.5, 1.0); }), pg::Errc::ZeroBaseline);
}

TEST(Validation, RestoresFlaggedContextsFromSnapshotExactly) {
  const auto pre = contexts();
  const auto out = pg::inject_attack(pre, attack(0.3), model(), pg::identity_fusion());
  const auto m = pg::validate_and_restore(pre, out.post, nullptr);
  EXPECT_EQ(m.flagged.size(), out.targets);
  EXPECT_EQ(m.restored.contexts, pre.contexts);
  EXPECT_EQ(m.restored.phase, pg::Phase::PostMitigation);
  EXPECT_EQ(pg::cis(pre, m.restored), 1.0);
  for (auto i : m.flagged) EXPECT_NE(out.post.contexts[i], pre.contexts[i]);
}

TEST(Validation, LowProvenanceIsFlaggedEvenWhenIntact) {
  const auto pre = contexts(10);
  auto ref = data();
  ref.provenance.assign(static_cast<std::size_t>(ref.size()), pg::Provenance::OpenPhish);
  const auto pcs = pg::PcsConfig::build(ref, 3, 0.5);
  // Contexts claim Unknown provenance, which never matches the reference.
  const auto m = pg::validate_and_restore(pre, pre, &pcs);
  EXPECT_EQ(m.flagged.size(), 10u);
  EXPECT_EQ(m.restored.contexts, pre.contexts);
}

TEST(RunStrategy, NullAttackUnderEveryStrategy) {
  for (auto s : {pg::Strategy::Isolation, pg::Strategy::Validation, pg::Strategy::Hybrid}) {
    const auto row = pg::run_strategy(data(), model(), pg::identity_fusion(), s, pg::AttackSpec::null());
    EXPECT_EQ(row.cis, 1.0) << pg::strategy_name(s);
    EXPECT_EQ(row.apf, 0.0);
    EXPECT_EQ(row.csi_stability, 1.0);
    EXPECT_EQ(row.contexts, 200u);
    if (s == pg::Strategy::Isolation) {
      EXPECT_FALSE(row.mre.has_value());
    } else {
      ASSERT_TRUE(row.mre.has_value());
      EXPECT_EQ(*row.mre, 0.0);
    }
  }
}

TEST(RunStrategy, AttackedRowsMatchTheStrategyContracts) {
  const auto spec = attack(0.3);
  const auto iso = pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Isolation, spec);
  EXPECT_EQ(iso.apf, 0.0);
  EXPECT_EQ(iso.links, 0u);
  EXPECT_GT(iso.blocked_copies, 0u);
  EXPECT_LE(iso.cis, 1.0);
  for (auto s : {pg::Strategy::Validation, pg::Strategy::Hybrid}) {
    const auto row = pg::run_strategy(data(), model(), pg::identity_fusion(), s, spec);
    EXPECT_EQ(row.cis, 1.0) << pg::strategy_name(s);
    EXPECT_LT(row.cis_post_attack, 1.0);
    ASSERT_TRUE(row.mre.has_value());
    EXPECT_GT(*row.mre, 0.0);
    EXPECT_NEAR(*row.mre, 1.0 - row.cis_post_attack, 1e-12);
  }
  const auto val = pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Validation, spec);
  EXPECT_GT(val.apf, 0.0);
  EXPECT_GT(val.links, 0u);
}

TEST(RunStrategy, ReportFormatsAreStable) {
  pg::RobustnessReport report;
  report.push_back(pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Isolation, attack(0.3)));
  report.push_back(pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Hybrid, attack(0.3)));
  const auto table = pg::format_robustness_table(report);
  EXPECT_NE(table.find("--"), std::string::npos);
  const auto header = table.substr(0, table.find('\n'));
  for (const auto* col : {"Dataset", "Strategy", "CIS", "APF", "MRE", "CSI"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  const auto json = nlohmann::json::parse(pg::format_robustness_json(report));
  ASSERT_EQ(json.size(), 2u);
  EXPECT_TRUE(json[0]["mre"].is_null());
  EXPECT_FALSE(json[0].contains("elapsed_ms"));
  pg::RobustnessReport again;
  again.push_back(pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Isolation, attack(0.3)));
  again.push_back(pg::run_strategy(data(), model(), pg::identity_fusion(), pg::Strategy::Hybrid, attack(0.3)));
  EXPECT_EQ(pg::format_robustness_json(again), pg::format_robustness_json(report));
  EXPECT_EQ(code_of([] { pg::parse_strategy("nope"); }), pg::Errc::InvalidArgument);
}
