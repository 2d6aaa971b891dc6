// Runs the acceptance checks and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when every criterion passes.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <future>
#include <set>
#include <string>
#include <vector>

#include "phishguard/data_files.hpp"
#include "phishguard/dataset.hpp"
#include "phishguard/error.hpp"
#include "phishguard/explain.hpp"
#include "phishguard/features.hpp"
#include "phishguard/generator.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/math.hpp"
#include "phishguard/mcp.hpp"
#include "phishguard/metrics.hpp"
#include "phishguard/random.hpp"
#include "phishguard/robustness.hpp"
#include "phishguard/url.hpp"

namespace fs = std::filesystem;
namespace pg = phishguard;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

constexpr std::uint64_t kShapSeed = 20261018;

const std::vector<std::string>& legit_seeds() {
  static const std::vector<std::string> urls{
      "https://www.example.com/",          "https://accounts.example.org/signin",
      "https://shop.example.net/cart",     "https://mail.example.co.uk/inbox",
      "https://docs.example.io/start",     "https://news.example.com/world",
      "https://www.bankexample.com/login", "https://portal.example.edu/",
      "https://cloud.example.dev/console", "https://pay.example.com/checkout",
      "https://support.example.org/help",  "https://www.example-store.com/deals",
      "https://media.example.net/video",   "https://travel.example.com/book",
      "https://jobs.example.org/search",   "https://www.examplebank.co.uk/online",
      "https://secure.example.com/account", "https://learn.example.edu/courses",
      "https://www.example.de/kontakt",    "https://api.example.io/v1/status",
  };
  return urls;
}

std::optional<fs::path> find_uci() {
  if (const char* env = std::getenv("PHISHGUARD_UCI"); env && *env) {
    if (fs::exists(env)) return fs::path(env);
  }
  for (const auto* name : {"Training Dataset.arff", "phishing.arff", "phishing.csv"}) {
    const auto p = pg::data_dir() / "uci" / name;
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

Verdict uci_missing() {
  return {false, "UCI dataset not found; set PHISHGUARD_UCI or place it under " + (pg::data_dir() / "uci").string()};
}

const pg::Dataset* uci() {
  static std::optional<pg::Dataset> ds;
  static bool tried = false;
  if (!tried) {
    tried = true;
    if (const auto p = find_uci()) ds = pg::load_table(*p, pg::Provenance::UCI);
  }
  return ds ? &*ds : nullptr;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Verdict criterion_1() {
  const auto path = find_uci();
  if (!path) return uci_missing();
  pg::LoadReport report;
  const auto ds = pg::load_table(*path, pg::Provenance::UCI, &report);
  const auto [legit, phish] = pg::class_distribution(ds);
  const bool ok = ds.size() == 5849 && report.rows_read == 11055 && legit == 3019 && phish == 2830;
  return {ok, std::to_string(report.rows_read) + " rows -> " + std::to_string(ds.size()) + " unique (" +
                  std::to_string(legit) + "/" + std::to_string(phish) + ")"};
}

pg::Trainer preset_trainer(std::string kind) {
  return [kind](const pg::Dataset& train) {
    auto model = std::make_shared<const pg::Model>(pg::train_model(train, kind, pg::TrainConfig{}));
    return pg::Scorer([model](const auto& x) { return pg::predict_proba(*model, x); });
  };
}

pg::Trainer gbt_trainer() {
  return [](const pg::Dataset& train) {
    auto model = std::make_shared<const pg::Ensemble>(pg::train_gbt(train, {500, 0.1, 4, 1}));
    return pg::Scorer([model](const auto& x) { return pg::predict_proba(pg::TrainedModel(*model), x); });
  };
}

std::optional<pg::CvReport> logistic_cv;

Verdict criterion_2() {
  const auto* ds = uci();
  if (!ds) return uci_missing();
  logistic_cv = pg::cross_validate_report(preset_trainer("logistic"), *ds, 5, 42);
  const auto m = logistic_cv->mean();
  const bool ok = std::abs(m.accuracy - 0.92) <= 0.02 && m.auc >= 0.95;
  return {ok, "accuracy " + fmt("%.4f", m.accuracy) + ", AUC " + fmt("%.4f", m.auc)};
}

Verdict criterion_3() {
  const auto* ds = uci();
  if (!ds) return uci_missing();
  if (!logistic_cv) logistic_cv = pg::cross_validate_report(preset_trainer("logistic"), *ds, 5, 42);
  const auto gbt = pg::cross_validate_report(gbt_trainer(), *ds, 5, 42).mean();
  const double lr = logistic_cv->mean().accuracy;
  const bool ok = gbt.accuracy >= 0.94 && gbt.auc >= 0.98 && gbt.accuracy > lr;
  return {ok, "accuracy " + fmt("%.4f", gbt.accuracy) + ", AUC " + fmt("%.4f", gbt.auc) + ", logistic " +
                  fmt("%.4f", lr)};
}

VectorXd random_vector(pg::Rng& rng, Index n, double lo, double hi) {
  VectorXd v(n);
  for (Index j = 0; j < n; ++j) v(j) = pg::uniform_real(rng, lo, hi);
  return v;
}

pg::Dataset random_ternary(pg::Rng& rng, int n, int d) {
  MatrixXd x(n, d);
  VectorXi y(n);
  const VectorXd w = random_vector(rng, d, -2, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = static_cast<double>(pg::uniform_index(rng, 3)) - 1.0;
    y(i) = x.row(i).dot(w) + pg::uniform_real(rng, -1, 1) > 0;
  }
  std::vector<std::string> names;
  for (int j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return pg::make_dataset(names, x, y);
}

Verdict criterion_4() {
  pg::Rng rng(kShapSeed);
  double worst_linear = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto d = static_cast<Index>(1 + pg::uniform_index(rng, 10));
    const pg::LinearModel m{random_vector(rng, d, -3, 3), pg::uniform_real(rng, -1, 1), {}};
    const VectorXd mu = random_vector(rng, d, -1, 1);
    const VectorXd x = random_vector(rng, d, -2, 2);
    const auto lin = pg::shap_linear(m, x, mu);
    const auto ex = pg::shap_exact([&](const auto& v) { return m.decision(v); }, x, mu);
    worst_linear = std::max(worst_linear, (lin.phi - ex.phi).cwiseAbs().maxCoeff());
  }
  int misses = 0;
  int compared = 0;
  for (int t = 0; t < 20; ++t) {
    const auto ds = random_ternary(rng, 200, 8);
    const auto tree = pg::train_tree(ds, {3, 1});
    const pg::Scorer f = [&](const auto& x) { return pg::predict_proba(tree, x); };
    const VectorXd mu = pg::background_mean(ds);
    const VectorXd x = ds.features.row(static_cast<Index>(pg::uniform_index(rng, 200))).transpose();
    const auto exact = pg::shap_exact(f, x, mu);
    const auto est = pg::shap_sampled(f, x, mu, 10000, pg::derive_seed(kShapSeed, static_cast<std::uint64_t>(t)));
    for (Index j = 0; j < 8; ++j) {
      ++compared;
      if (std::abs(est.phi(j) - exact.phi(j)) > 3.0 * est.standard_error(j) + 1e-12) ++misses;
    }
  }
  return {worst_linear < 1e-9 && misses == 0, "linear max dev " + fmt("%.2e", worst_linear) + ", sampled misses " +
                                                   std::to_string(misses) + "/" + std::to_string(compared)};
}

Verdict criterion_5() {
  pg::Rng rng(5);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto d = static_cast<Index>(2 + pg::uniform_index(rng, 9));
    const VectorXd mu = random_vector(rng, d, -1, 1);
    const VectorXd x = random_vector(rng, d, -2, 2);
    const VectorXd w = random_vector(rng, d, -2, 2);
    const pg::Scorer f = [&](const auto& v) {
      return pg::sigmoid(w.dot(v) + v(0) * v(1) - std::tanh(v(d - 1)));
    };
    const auto ex = pg::shap_exact(f, x, mu);
    worst = std::max(worst, std::abs(ex.base_value + ex.phi.sum() - f(x)));
    const pg::LinearModel m{w, pg::uniform_real(rng, -1, 1), {}};
    const auto lin = pg::shap_linear(m, x, mu);
    worst = std::max(worst, std::abs(lin.base_value + lin.phi.sum() - m.decision(x)));
  }
  return {worst <= 1e-9, "max |phi0 + sum phi - f(x)| " + fmt("%.2e", worst) + " over 1000 exact + 1000 linear"};
}

double pairwise_auc(const std::vector<int>& y, const std::vector<double>& s) {
  double hits = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      hits += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return hits / pairs;
}

Verdict criterion_6() {
  pg::Rng rng(6);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = 2 + pg::uniform_index(rng, 49);
    std::vector<int> y(n);
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(pg::uniform_index(rng, 2));
      s[i] = t % 2 ? static_cast<double>(pg::uniform_index(rng, 6)) / 5.0 : pg::uniform01(rng);
    }
    y[0] = 1;
    y[1] = 0;
    worst = std::max(worst, std::abs(pg::roc_auc(y, s).auc - pairwise_auc(y, s)));
  }
  return {worst <= 1e-9, "max deviation " + fmt("%.2e", worst)};
}

Verdict criterion_7() {
  pg::Rng rng(7);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 10 + static_cast<int>(pg::uniform_index(rng, 90));
    const int d = 1 + static_cast<int>(pg::uniform_index(rng, 6));
    auto base = random_ternary(rng, n, d);
    base.labels(0) = 0;
    base.labels(1) = 1;
    MatrixXd x(n, d + 2);
    x << base.features, base.labels.cast<double>(), VectorXd::Constant(n, 1.0);
    auto names = base.feature_names;
    names.push_back("copy");
    names.push_back("constant");
    const auto ds = pg::make_dataset(names, x, base.labels);
    const auto all = pg::information_gain_all(ds);
    if (all.ig.at("copy") != all.label_entropy) ++violations;
    if (all.ig.at("constant") != 0.0) ++violations;
    for (const auto& [name, v] : all.ig) {
      if (v < 0.0 || v > all.label_entropy) ++violations;
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over 1000 datasets"};
}

Verdict criterion_8() {
  pg::MlpParams params;
  params.layer_sizes = {6, 4, 1};
  const auto model = pg::init_mlp(5, params, 8);
  MatrixXd x(3, 5);
  x << 0.2, -1.1, 0.5, 0.9, -0.3, 1.4, 0.1, -0.7, 0.0, 0.6, -0.5, 0.8, 1.2, -1.3, 0.4;
  VectorXd y(3);
  y << 1, 0, 1;
  const auto g = pg::mlp_loss_and_gradient(model, x, y);
  const double h = 1e-6;
  double worst = 0.0;
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-8, std::max(std::abs(a), std::abs(b))); };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    for (Index r = 0; r < layer.weights.rows(); ++r) {
      for (Index c = 0; c < layer.weights.cols(); ++c) {
        auto plus = model, minus = model;
        plus.layers[l].weights(r, c) += h;
        minus.layers[l].weights(r, c) -= h;
        const double fd = (pg::mlp_loss_and_gradient(plus, x, y).loss - pg::mlp_loss_and_gradient(minus, x, y).loss) / (2 * h);
        worst = std::max(worst, rel(fd, g.weights[l](r, c)));
      }
      auto plus = model, minus = model;
      plus.layers[l].bias(r) += h;
      minus.layers[l].bias(r) -= h;
      const double fd = (pg::mlp_loss_and_gradient(plus, x, y).loss - pg::mlp_loss_and_gradient(minus, x, y).loss) / (2 * h);
      worst = std::max(worst, rel(fd, g.bias[l](r)));
    }
  }
  return {worst < 1e-4, "max relative error " + fmt("%.2e", worst)};
}

// Phishing URLs from the generator against the seed list, featurized offline.
struct UrlCorpus {
  std::vector<std::string> urls;
  pg::Dataset ds;
};

const UrlCorpus& url_corpus() {
  static const UrlCorpus corpus = [] {
    pg::GenerationConfig cfg;
    cfg.legit_urls = legit_seeds();
    cfg.target_count = 400;
    cfg.seed = 11;
    auto phish = pg::generate_synthetic_urls(cfg);
    UrlCorpus c;
    const pg::OfflineResolver offline;
    const auto& tables = pg::LexicalTables::bundled();
    std::vector<int> labels;
    for (std::size_t rep = 0; rep < 5; ++rep) {
      for (const auto& u : legit_seeds()) {
        c.urls.push_back(u + (rep ? "p" + std::to_string(rep) : ""));
        labels.push_back(0);
      }
    }
    for (const auto& u : phish) {
      c.urls.push_back(u);
      labels.push_back(1);
    }
    MatrixXd x(static_cast<Index>(c.urls.size()), static_cast<Index>(pg::kFeatureCount));
    for (std::size_t i = 0; i < c.urls.size(); ++i) {
      x.row(static_cast<Index>(i)) = pg::to_canonical_vector(pg::extract_features(c.urls[i], tables, offline)).transpose();
    }
    c.ds = pg::make_dataset(pg::canonical_feature_names(), x,
                            Eigen::Map<VectorXi>(labels.data(), static_cast<Index>(labels.size())));
    return c;
  }();
  return corpus;
}

Verdict criterion_9() {
  const auto& corpus = url_corpus();
  auto model = std::make_shared<const pg::Model>(pg::train_model(corpus.ds, "logistic", pg::TrainConfig{}));
  std::vector<std::string> lines;
  for (int i = 0; i < 64; ++i) {
    const auto& url = corpus.urls[static_cast<std::size_t>(i * 7) % corpus.urls.size()];
    lines.push_back(json{{"id", "r" + std::to_string(i)},
                         {"session", "s" + std::to_string(i % 4)},
                         {"tool", "classify_url"},
                         {"arguments", {{"url", url}}}}
                        .dump());
  }
  pg::ServerOptions opts;
  opts.model = model;
  pg::Server serial_server(opts);
  std::vector<std::string> serial;
  for (const auto& l : lines) serial.push_back(serial_server.handle(l));

  pg::Server server(opts);
  std::promise<void> go;
  const auto start = go.get_future().share();
  std::vector<std::future<std::string>> futures;
  for (const auto& l : lines) {
    futures.push_back(std::async(std::launch::async, [&server, &l, start] {
      start.wait();
      return server.handle(l);
    }));
  }
  go.set_value();
  int mismatches = 0;
  std::vector<std::string> responses;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    responses.push_back(futures[i].get());
    if (responses.back() != serial[i]) ++mismatches;
  }
  const auto log = server.audit().entries();
  std::set<std::string> ids;
  for (const auto& c : log) ids.insert(c.id);
  // A cross-reference is any context id surfacing in a response other than its own.
  int cross = 0;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto own = json::parse(responses[i])["result"]["context_id"].get<std::string>();
    for (const auto& id : ids) {
      if (id != own && responses[i].find("\"" + id + "\"") != std::string::npos) ++cross;
    }
  }
  bool intact = true;
  for (const auto& c : log) intact = intact && c.intact();
  const bool ok = mismatches == 0 && log.size() == 64 && ids.size() == 64 && cross == 0 && intact;
  return {ok, std::to_string(mismatches) + " mismatches, " + std::to_string(ids.size()) + " distinct ids, " +
                  std::to_string(cross) + " cross-references"};
}

Verdict criterion_10() {
  const auto& corpus = url_corpus();
  const auto model = pg::train_model(corpus.ds, "logistic", pg::TrainConfig{});
  const auto fusion = pg::identity_fusion();
  std::vector<std::string> problems;
  for (auto s : {pg::Strategy::Isolation, pg::Strategy::Validation, pg::Strategy::Hybrid}) {
    const auto row = pg::run_strategy(corpus.ds, model, fusion, s, pg::AttackSpec::null());
    const bool ok = row.contexts == 200 && row.cis == 1.0 && row.apf == 0.0 && row.csi_stability == 1.0 &&
                    (s == pg::Strategy::Isolation ? !row.mre.has_value() : row.mre == 0.0);
    if (!ok) problems.push_back("null/" + std::string(pg::strategy_name(s)));
  }
  pg::AttackSpec spec;
  spec.contamination_rate = 0.3;
  spec.delta = 0.75;
  spec.seed = 10;
  std::string summary;
  for (auto s : {pg::Strategy::Validation, pg::Strategy::Hybrid}) {
    const auto row = pg::run_strategy(corpus.ds, model, fusion, s, spec);
    if (!(row.cis == 1.0 && row.mre && *row.mre > 0.0)) problems.push_back(std::string(pg::strategy_name(s)));
    summary += std::string(pg::strategy_name(s)) + " CIS " + fmt("%.4f", row.cis) + " MRE " +
               fmt("%.4f", row.mre.value_or(-1)) + "; ";
  }
  const auto iso = pg::run_strategy(corpus.ds, model, fusion, pg::Strategy::Isolation, spec);
  if (iso.apf != 0.0 || iso.links != 0) problems.push_back("isolation");
  summary += "isolation APF " + fmt("%.4f", iso.apf);
  std::string detail = summary;
  if (!problems.empty()) {
    detail += " [failed:";
    for (const auto& p : problems) detail += " " + p;
    detail += "]";
  }
  return {problems.empty(), detail};
}

Verdict criterion_11() {
  pg::GenerationConfig cfg;
  cfg.legit_urls = legit_seeds();
  cfg.target_count = 1000;
  cfg.seed = 2024;
  const auto urls = pg::generate_synthetic_urls(cfg);
  const std::set<std::string> unique(urls.begin(), urls.end());
  int unparseable = 0;
  for (const auto& u : urls) {
    try {
      pg::parse_url(u);
    } catch (const pg::Error&) {
      ++unparseable;
    }
  }
  const auto features = pg::ternary_lexical_features();
  const auto report = pg::count_feature_triggers(urls, features);
  const auto& tables = pg::LexicalTables::bundled();
  int report_errors = 0;
  for (const auto& [feature, count] : report) {
    std::size_t oracle = 0;
    for (const auto& u : urls) oracle += pg::extract_lexical(pg::parse_url(u), tables).get(feature) == 1.0;
    report_errors += oracle != count;
  }
  const bool ok = urls.size() == 1000 && unique.size() == 1000 && unparseable == 0 && report_errors == 0 &&
                  report.size() == features.size();
  return {ok, std::to_string(unique.size()) + " unique, " + std::to_string(unparseable) + " unparseable, " +
                  std::to_string(report_errors) + " report mismatches"};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double budget_s;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "UCI ingestion and deduplication", 5, criterion_1},
      {2, "UCI logistic regression 5-fold CV", 60, criterion_2},
      {3, "UCI gradient-boosted trees", 300, criterion_3},
      {4, "Shapley oracle equivalence", 120, criterion_4},
      {5, "Shapley local accuracy", 0, criterion_5},
      {6, "AUC oracle equivalence", 0, criterion_6},
      {7, "Information-gain properties", 0, criterion_7},
      {8, "MLP gradient check", 0, criterion_8},
      {9, "Server serial equivalence", 10, criterion_9},
      {10, "Robustness harness patterns", 30, criterion_10},
      {11, "Synthetic URL generation", 5, criterion_11},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      v.pass = false;
      v.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    failed += !v.pass;
    std::printf("%s %2d %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", c.number, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
