#include <CLI11.hpp>
#include <json.hpp>

#include <signal.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "phishguard/data_files.hpp"
#include "phishguard/dataset.hpp"
#include "phishguard/error.hpp"
#include "phishguard/explain.hpp"
#include "phishguard/features.hpp"
#include "phishguard/generator.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/mcp.hpp"
#include "phishguard/metrics.hpp"
#include "phishguard/robustness.hpp"
#include "phishguard/url.hpp"
#include "phishguard/version.hpp"

namespace fs = std::filesystem;
namespace pg = phishguard;
using json = nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

// No SA_RESTART: a blocking read returns EINTR so the serve loop notices.
void install_signal_handlers() {
  struct sigaction sa {};
  sa.sa_handler = on_signal;
  sigemptyset(&sa.sa_mask);
  sa.sa_flags = 0;
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::string started_at;
  fs::path path;  // where the manifest goes; empty means next to the first output

  void write(int exit_code) const {
    fs::path target = path;
    if (target.empty()) {
      target = outputs.empty() ? fs::path("phishguard-" + subcommand + ".manifest.json")
                               : fs::path(outputs.front() + ".manifest.json");
    }
    json doc = {{"subcommand", subcommand},
                {"tool_version", pg::kVersion},
                {"inputs", inputs},
                {"outputs", outputs},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"config", config},
                {"started_at", started_at},
                {"finished_at", pg::utc_timestamp()},
                {"exit_code", exit_code}};
    std::ofstream out(target);
    if (out) out << doc.dump(2) << '\n';
  }
};

// Dashes stripped from the long name, value as given or the default.
json collect_config(const CLI::App& sub) {
  json cfg = json::object();
  for (const auto* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (opt->get_expected_max() > 1) {
        cfg[name] = results;
      } else if (opt->get_type_size() == 0) {
        cfg[name] = true;
      } else {
        cfg[name] = results.empty() ? "" : results.back();
      }
    } else {
      const auto def = opt->get_default_str();
      cfg[name] = def.empty() ? json(nullptr) : json(def);
    }
  }
  return cfg;
}

pg::Dataset load_canonical(const std::string& path, const std::string& provenance) {
  auto ds = pg::load_table(path, pg::parse_provenance(provenance));
  const auto canonical = pg::canonical_feature_names();
  if (ds.feature_names != canonical) {
    const auto name = ds.name;
    ds = pg::align_features({ds}, canonical).front();
    ds.name = name;
  }
  return ds;
}

// Model input vector for a URL, in the model's feature order.
Eigen::VectorXd vector_for_model(const pg::FeatureVector& fv, const pg::Model& model) {
  const auto names = model.feature_names.empty() ? pg::canonical_feature_names() : model.feature_names;
  Eigen::VectorXd x(static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto v = fv.get(names[j]);
    if (!v) throw pg::Error(pg::Errc::MissingFeature, "URL features lack '" + names[j] + "'");
    x(static_cast<Eigen::Index>(j)) = *v;
  }
  return x;
}

void check_model_matches(const pg::Dataset& ds, const pg::Model& model) {
  if (!model.feature_names.empty() && model.feature_names != ds.feature_names) {
    throw pg::Error(pg::Errc::DimensionMismatch, "dataset columns differ from the model's features");
  }
  if (ds.dimension() != model.dimension()) {
    throw pg::Error(pg::Errc::DimensionMismatch, "dataset has " + std::to_string(ds.dimension()) +
                                                     " features, model expects " +
                                                     std::to_string(model.dimension()));
  }
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

pg::FusionWeights load_fusion(const std::string& path) {
  return path.empty() ? pg::identity_fusion() : pg::fusion_from_json(pg::read_text_file(path));
}

// "provenance=path" or a bare path (provenance Unknown).
std::shared_ptr<const pg::PcsConfig> build_pcs(const std::vector<std::string>& specs, int k, double threshold,
                                               std::vector<std::string>& inputs) {
  if (specs.empty()) return nullptr;
  std::optional<pg::Dataset> reference;
  for (const auto& spec : specs) {
    std::string provenance = "unknown";
    std::string path = spec;
    if (const auto eq = spec.find('='); eq != std::string::npos && !fs::exists(spec)) {
      provenance = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    inputs.push_back(path);
    auto ds = load_canonical(path, provenance);
    reference = reference ? pg::concat(*reference, ds) : ds;
  }
  return std::make_shared<const pg::PcsConfig>(pg::PcsConfig::build(std::move(*reference), k, threshold));
}

struct Options {
  std::uint64_t seed = 42;
  std::string manifest;

  std::vector<std::string> inputs;
  std::vector<std::string> provenances{"unknown"};
  std::string output;

  std::string legit;
  std::size_t count = 1000;
  std::string out_dir = ".";
  std::vector<std::string> rules;
  bool feature_rich = false;
  std::size_t per_feature = 10;
  std::vector<std::string> features;
  std::string domain_base = "example.com";

  std::string data;
  std::string provenance = "unknown";
  std::string model_kind = "logistic";
  int folds = 5;
  bool no_standardize = false;
  std::string metrics_json;

  std::string model_file;
  std::string roc_csv;
  std::string pr_csv;

  std::string method = "shap";
  std::optional<long long> index;
  std::string url;
  int samples = 1000;
  int perturbations = 1000;
  std::size_t top = 10;
  bool as_json = false;

  double alpha = 0.5;
  int instances = 100;

  std::string fusion;
  std::vector<std::string> pcs_reference;
  int pcs_k = 5;
  double pcs_threshold = 0.5;
  std::string transport = "stdio";
  int port = 7878;
  std::optional<int> tcp;
  std::string audit;
  std::string background;

  std::vector<std::string> datasets;
  std::vector<std::string> strategies{"isolation", "validation", "hybrid"};
  double rate = 0.3;
  double delta = 0.75;
  std::size_t subset = 200;
  int csi_trials = 10;
  std::string json_out;

  std::vector<std::string> urls;
};

int cmd_ingest(const Options& o, Manifest& m) {
  if (o.provenances.size() != 1 && o.provenances.size() != o.inputs.size()) {
    throw pg::Error(pg::Errc::InvalidArgument, "give one --provenance, or one per --input");
  }
  std::optional<pg::Dataset> merged;
  for (std::size_t i = 0; i < o.inputs.size(); ++i) {
    const auto& prov = o.provenances.size() == 1 ? o.provenances[0] : o.provenances[i];
    pg::LoadReport report;
    auto ds = pg::load_table(o.inputs[i], pg::parse_provenance(prov), &report);
    ds = pg::align_features({ds}, pg::canonical_feature_names()).front();
    std::cerr << o.inputs[i] << ": " << report.rows_read << " rows read, " << report.duplicates_removed
              << " duplicates removed\n";
    merged = merged ? pg::concat(*merged, ds) : ds;
    m.inputs.push_back(o.inputs[i]);
  }
  const auto [legit, phish] = pg::class_distribution(*merged);
  pg::write_csv(o.output, *merged);
  m.outputs.push_back(o.output);
  std::cout << merged->size() << " samples (" << legit << "/" << phish << ")\n";
  return 0;
}

int cmd_generate(const Options& o, Manifest& m) {
  pg::GenerationConfig cfg;
  cfg.seed = o.seed;
  cfg.target_count = o.count;
  cfg.per_feature_target = o.per_feature;
  cfg.domain_base = o.domain_base;
  cfg.features = o.features;
  if (!o.rules.empty()) {
    cfg.rules.clear();
    for (const auto& r : o.rules) cfg.rules.push_back(pg::parse_rule(r));
  }
  if (!o.legit.empty()) {
    cfg.legit_urls = pg::read_list_file(o.legit);
    m.inputs.push_back(o.legit);
  }

  std::vector<std::string> phishing, legitimate;
  std::vector<std::pair<std::string, std::size_t>> report;
  if (o.feature_rich) {
    auto r = pg::generate_feature_rich_domains(cfg);
    phishing = std::move(r.phishing);
    legitimate = std::move(r.legitimate);
    report = std::move(r.report);
  } else {
    if (cfg.legit_urls.empty()) throw pg::Error(pg::Errc::InvalidArgument, "--legit is required without --feature-rich");
    phishing = pg::generate_synthetic_urls(cfg);
    legitimate = cfg.legit_urls;
    const auto feats = o.features.empty() ? pg::ternary_lexical_features() : o.features;
    report = pg::count_feature_triggers(phishing, feats);
  }

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    pg::write_text_file(dir / name, text);
    m.outputs.push_back((dir / name).string());
  };
  write("phishing_links.txt", join_lines(phishing));
  write("legitimate_links.txt", join_lines(legitimate));
  write("feature_report.txt", pg::format_feature_report(report));
  if (m.path.empty()) m.path = dir / "manifest.json";
  std::cout << phishing.size() << " phishing, " << legitimate.size() << " legitimate URLs written to "
            << dir.string() << "\n"
            << pg::format_feature_report(report);
  return 0;
}

int cmd_train(const Options& o, Manifest& m) {
  const auto& kinds = pg::model_kinds();
  if (std::find(kinds.begin(), kinds.end(), o.model_kind) == kinds.end()) {
    throw pg::Error(pg::Errc::InvalidArgument, "unknown model kind '" + o.model_kind + "'");
  }
  const auto ds = load_canonical(o.data, o.provenance);
  m.inputs.push_back(o.data);
  pg::TrainConfig cfg;
  cfg.seed = o.seed;
  cfg.folds = o.folds;
  cfg.standardize = !o.no_standardize;

  const pg::Trainer trainer = [&](const pg::Dataset& train) {
    auto model = std::make_shared<const pg::Model>(pg::train_model(train, o.model_kind, cfg));
    return pg::Scorer([model](const Eigen::Ref<const Eigen::VectorXd>& x) { return pg::predict_proba(*model, x); });
  };
  const auto report = pg::cross_validate_report(trainer, ds, o.folds, o.seed);
  const std::vector<std::pair<std::string, pg::MetricRow>> rows{{o.model_kind, report.mean()}};
  std::cout << pg::format_metrics_table(rows);

  const auto model = pg::train_model(ds, o.model_kind, cfg);
  pg::save_model(o.output, model);
  m.outputs.push_back(o.output);
  if (!o.metrics_json.empty()) {
    pg::write_text_file(o.metrics_json, pg::format_metrics_json(rows));
    m.outputs.push_back(o.metrics_json);
  }
  return 0;
}

int cmd_evaluate(const Options& o, Manifest& m) {
  const auto model = pg::load_model(o.model_file);
  const auto ds = load_canonical(o.data, o.provenance);
  m.inputs = {o.model_file, o.data};
  check_model_matches(ds, model);
  const Eigen::VectorXd scores = pg::predict_proba_batch(model, ds.features);
  const std::span<const int> labels(ds.labels.data(), static_cast<std::size_t>(ds.size()));
  const std::span<const double> sc(scores.data(), static_cast<std::size_t>(scores.size()));
  const auto row = pg::evaluate_scores(labels, sc);
  const std::vector<std::pair<std::string, pg::MetricRow>> rows{{model.kind, row}};
  std::cout << pg::format_metrics_table(rows);
  if (o.as_json) std::cout << pg::format_metrics_json(rows);

  if (!o.roc_csv.empty()) {
    const auto roc = pg::roc_auc(labels, sc);
    std::string text = "threshold,fpr,tpr\n";
    for (std::size_t i = 0; i < roc.curve.fpr.size(); ++i) {
      text += format_double(roc.curve.thresholds[i]) + "," + format_double(roc.curve.fpr[i]) + "," +
              format_double(roc.curve.tpr[i]) + "\n";
    }
    pg::write_text_file(o.roc_csv, text);
    m.outputs.push_back(o.roc_csv);
  }
  if (!o.pr_csv.empty()) {
    std::string text = "threshold,recall,precision\n";
    for (const auto& p : pg::pr_curve(labels, sc)) {
      text += format_double(p.threshold) + "," + format_double(p.recall) + "," + format_double(p.precision) + "\n";
    }
    pg::write_text_file(o.pr_csv, text);
    m.outputs.push_back(o.pr_csv);
  }
  return 0;
}

int cmd_explain(const Options& o, Manifest& m) {
  std::optional<pg::Dataset> ds;
  if (!o.data.empty()) {
    ds = load_canonical(o.data, o.provenance);
    m.inputs.push_back(o.data);
  }
  const auto names = ds ? ds->feature_names : pg::canonical_feature_names();

  std::optional<pg::Model> model;
  if (!o.model_file.empty()) {
    model = pg::load_model(o.model_file);
    m.inputs.push_back(o.model_file);
    if (ds) check_model_matches(*ds, *model);
  }

  std::optional<Eigen::VectorXd> x;
  if (o.index) {
    if (!ds) throw pg::Error(pg::Errc::InvalidArgument, "--index needs --data");
    if (*o.index < 0 || *o.index >= ds->size()) {
      throw pg::Error(pg::Errc::InvalidArgument, "index " + std::to_string(*o.index) + " out of range [0, " +
                                                     std::to_string(ds->size()) + ")");
    }
    x = ds->features.row(static_cast<Eigen::Index>(*o.index)).transpose();
  } else if (!o.url.empty()) {
    const pg::OfflineResolver resolver;
    const auto fv = pg::extract_features(o.url, pg::LexicalTables::bundled(), resolver);
    x = model ? vector_for_model(fv, *model) : pg::to_canonical_vector(fv);
  }

  Eigen::VectorXd scores;
  std::string scale;
  double base = 0.0;
  if (o.method == "ig") {
    if (!ds) throw pg::Error(pg::Errc::InvalidArgument, "--method ig needs --data");
    const auto ig = pg::information_gain_all(*ds);
    scores.resize(static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) scores(static_cast<Eigen::Index>(j)) = ig.ig.at(names[j]);
    scale = "bits";
    base = ig.label_entropy;
  } else {
    if (!model) throw pg::Error(pg::Errc::InvalidArgument, "--method " + o.method + " needs --model-file");
    if (!x) throw pg::Error(pg::Errc::InvalidArgument, "--method " + o.method + " needs --index or --url");
    if (o.method == "shap") {
      const Eigen::VectorXd mu = ds ? pg::background_mean(*ds) : Eigen::VectorXd::Zero(x->size());
      const auto e = pg::shap_for_model(*model, *x, mu, o.samples, o.seed);
      scores = e.phi;
      scale = e.scale;
      base = e.base_value;
    } else if (o.method == "lime") {
      if (!ds) throw pg::Error(pg::Errc::InvalidArgument, "--method lime needs --data for perturbations");
      pg::LimeConfig cfg;
      cfg.n_perturbations = o.perturbations;
      cfg.seed = o.seed;
      const pg::Model& mdl = *model;
      const pg::Scorer scorer = [&mdl](const Eigen::Ref<const Eigen::VectorXd>& v) { return pg::predict_proba(mdl, v); };
      const auto e = pg::lime_explain(scorer, *x, *ds, cfg);
      scores = e.weights;
      scale = "standardized surrogate";
      base = e.intercept;
    } else {
      throw pg::Error(pg::Errc::InvalidArgument, "unknown method '" + o.method + "' (ig, shap, lime)");
    }
  }

  const Eigen::VectorXd values = x ? *x : Eigen::VectorXd::Zero(scores.size());
  auto entries = pg::rank_attributions(names, values, scores);
  if (o.top > 0 && entries.size() > o.top) entries.resize(o.top);
  if (o.as_json) {
    std::cout << pg::attributions_json(entries, o.method, scale, base);
  } else {
    char head[64];
    std::snprintf(head, sizeof head, "%.6f", base);
    std::cout << o.method << " (" << scale << "), base " << head << "\n"
              << pg::format_attribution_bars(entries);
  }
  return 0;
}

int cmd_fuse(const Options& o, Manifest& m) {
  if (!(o.alpha >= 0.0 && o.alpha <= 1.0)) throw pg::Error(pg::Errc::InvalidArgument, "--alpha must lie in [0,1]");
  const auto model = pg::load_model(o.model_file);
  const auto ds = load_canonical(o.data, o.provenance);
  m.inputs = {o.model_file, o.data};
  check_model_matches(ds, model);
  const auto ig = pg::information_gain_all(ds);
  const auto shap = pg::global_shap_importance(model, ds, o.instances, o.samples, o.seed);
  const auto fusion = pg::fuse_weights(ig, shap, o.alpha);
  pg::write_text_file(o.output, pg::fusion_to_json(fusion));
  m.outputs.push_back(o.output);
  std::cout << "F_final: " << fusion.f_final.size() << " features (IG " << fusion.f_ig.size() << ", XAI "
            << fusion.f_xai.size() << ")\n";
  for (const auto& [name, w] : fusion.weights) {
    char line[128];
    std::snprintf(line, sizeof line, "  %-28s %.6f\n", name.c_str(), w);
    std::cout << line;
  }
  return 0;
}

int cmd_serve(const Options& o, Manifest& m) {
  pg::ServerOptions opts;
  opts.model = std::make_shared<const pg::Model>(pg::load_model(o.model_file));
  m.inputs.push_back(o.model_file);
  opts.fusion = load_fusion(o.fusion);
  if (!o.fusion.empty()) m.inputs.push_back(o.fusion);
  opts.pcs = build_pcs(o.pcs_reference, o.pcs_k, o.pcs_threshold, m.inputs);
  if (!o.background.empty()) {
    const auto bg = load_canonical(o.background, "unknown");
    check_model_matches(bg, *opts.model);
    opts.background_mean = pg::background_mean(bg);
    m.inputs.push_back(o.background);
  }
  opts.audit_path = o.audit;
  if (!o.audit.empty()) m.outputs.push_back(o.audit);

  pg::Server server(std::move(opts));
  install_signal_handlers();
  const bool tcp = o.tcp.has_value() || o.transport == "tcp";
  if (tcp) {
    const int port = o.tcp.value_or(o.port);
    std::atomic<int> bound{0};
    std::exception_ptr failure;
    std::thread worker([&] {
      try {
        pg::serve_tcp(server, port, g_stop, &bound);
      } catch (...) {
        failure = std::current_exception();
        g_stop.store(true);
      }
    });
    while (bound.load() == 0 && !g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    if (bound.load() != 0) std::cerr << "listening on 127.0.0.1:" << bound.load() << "\n";
    worker.join();
    if (failure) std::rethrow_exception(failure);
  } else if (o.transport == "stdio") {
    pg::serve_stdio(server, std::cin, std::cout, g_stop);
  } else {
    throw pg::Error(pg::Errc::InvalidArgument, "unknown transport '" + o.transport + "' (stdio, tcp)");
  }
  server.audit().flush();
  std::cerr << server.audit().size() << " contexts audited\n";
  return 0;
}

int cmd_robustness(const Options& o, Manifest& m) {
  const auto model = pg::load_model(o.model_file);
  m.inputs.push_back(o.model_file);
  const auto fusion = load_fusion(o.fusion);
  if (!o.fusion.empty()) m.inputs.push_back(o.fusion);
  std::vector<pg::Strategy> strategies;
  for (const auto& s : o.strategies) strategies.push_back(pg::parse_strategy(s));
  const auto pcs = build_pcs(o.pcs_reference, o.pcs_k, o.pcs_threshold, m.inputs);

  pg::AttackSpec spec;
  spec.contamination_rate = o.rate;
  spec.delta = o.delta;
  spec.seed = o.seed;
  pg::RobustnessOptions ropts;
  ropts.subset_size = o.subset;
  ropts.csi_trials = o.csi_trials;
  ropts.pcs = pcs.get();

  pg::RobustnessReport report;
  double elapsed = 0.0;
  for (const auto& path : o.datasets) {
    auto ds = load_canonical(path, o.provenance);
    m.inputs.push_back(path);
    check_model_matches(ds, model);
    for (auto s : strategies) {
      report.push_back(pg::run_strategy(ds, model, fusion, s, spec, ropts));
      elapsed += report.back().elapsed_ms;
    }
  }
  std::cout << pg::format_robustness_table(report);
  std::cerr << "wall clock " << static_cast<long long>(elapsed) << " ms\n";
  if (!o.json_out.empty()) {
    pg::write_text_file(o.json_out, pg::format_robustness_json(report));
    m.outputs.push_back(o.json_out);
  }
  return 0;
}

int cmd_features(const Options& o, Manifest&) {
  const pg::OfflineResolver resolver;
  json out = json::array();
  for (const auto& url : o.urls) {
    const auto fv = pg::extract_features(url, pg::LexicalTables::bundled(), resolver);
    json values = json::object();
    for (const auto& [name, v] : fv.values()) values[name] = v;
    out.push_back({{"url", url}, {"features", values}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// Input problems exit 2; failures inside the computation exit 1.
int exit_code_for(pg::Errc code) {
  switch (code) {
    case pg::Errc::NonFiniteLoss:
    case pg::Errc::DegeneratePerturbations:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Phishing URL detection toolkit"};
  app.set_version_flag("--version", std::string(pg::kVersion));
  app.require_subcommand(1);
  app.add_option("--manifest", o.manifest, "Run manifest path (default: next to the first output)");

  const auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed")->capture_default_str(); };
  const auto data_opts = [&](CLI::App* sub, bool required) {
    auto* d = sub->add_option("--data", o.data, "Dataset (CSV or ARFF)")->check(CLI::ExistingFile);
    if (required) d->required();
    sub->add_option("--provenance", o.provenance, "Provenance of --data")->capture_default_str();
  };
  const auto model_file_opt = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--model-file", o.model_file, "Trained model JSON")->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  const auto pcs_opts = [&](CLI::App* sub) {
    sub->add_option("--pcs-reference", o.pcs_reference, "Reference set, as provenance=path (repeatable)");
    sub->add_option("--pcs-k", o.pcs_k, "Neighbours for the provenance score")->capture_default_str();
    sub->add_option("--pcs-threshold", o.pcs_threshold, "Flag below this score")->capture_default_str();
  };

  auto* ingest = app.add_subcommand("ingest", "Load, deduplicate and align a dataset to the canonical features");
  ingest->add_option("--input", o.inputs, "Raw CSV or ARFF file (repeatable)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--provenance", o.provenances, "Provenance, once or per input")->capture_default_str();
  ingest->add_option("--output", o.output, "Canonical CSV to write")->required();

  auto* generate = app.add_subcommand("generate", "Generate synthetic phishing URLs");
  generate->add_option("--legit", o.legit, "Legitimate URL list, one per line")->check(CLI::ExistingFile);
  generate->add_option("--count", o.count, "Number of URLs")->capture_default_str();
  generate->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  generate->add_option("--rules", o.rules, "Transform rules to use")->delimiter(',');
  generate->add_flag("--feature-rich", o.feature_rich, "Generate per-feature variants of --domain-base");
  generate->add_option("--per-feature", o.per_feature, "Variants per feature")->capture_default_str();
  generate->add_option("--features", o.features, "Features to trigger")->delimiter(',');
  generate->add_option("--domain-base", o.domain_base, "Base domain for --feature-rich")->capture_default_str();
  seed_opt(generate);

  auto* train = app.add_subcommand("train", "Cross-validate and train a model");
  data_opts(train, true);
  train->add_option("--model", o.model_kind, "Model kind")
      ->check(CLI::IsMember(pg::model_kinds()))
      ->capture_default_str();
  train->add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
  train->add_flag("--no-standardize", o.no_standardize, "Train on raw feature values");
  train->add_option("--output", o.output, "Model JSON to write")->required();
  train->add_option("--metrics-json", o.metrics_json, "Also write the CV metrics as JSON");
  seed_opt(train);

  auto* evaluate = app.add_subcommand("evaluate", "Score a trained model on a dataset");
  model_file_opt(evaluate, true);
  data_opts(evaluate, true);
  evaluate->add_option("--roc-csv", o.roc_csv, "Write ROC curve points");
  evaluate->add_option("--pr-csv", o.pr_csv, "Write precision-recall points");
  evaluate->add_flag("--json", o.as_json, "Also print the metrics as JSON");

  auto* explain = app.add_subcommand("explain", "Rank feature attributions");
  model_file_opt(explain, false);
  data_opts(explain, false);
  explain->add_option("--method", o.method, "ig, shap or lime")
      ->check(CLI::IsMember({"ig", "shap", "lime"}))
      ->capture_default_str();
  auto* index_opt = explain->add_option("--index", o.index, "Row of --data to explain");
  explain->add_option("--url", o.url, "URL to explain")->excludes(index_opt);
  explain->add_option("--samples", o.samples, "SHAP permutations (sampled method)")->capture_default_str();
  explain->add_option("--perturbations", o.perturbations, "LIME perturbations")->capture_default_str();
  explain->add_option("--top", o.top, "Entries to show, 0 for all")->capture_default_str();
  explain->add_flag("--json", o.as_json, "Print JSON instead of bars");
  seed_opt(explain);

  auto* fuse = app.add_subcommand("fuse", "Fuse IG and SHAP importances into feature weights");
  model_file_opt(fuse, true);
  data_opts(fuse, true);
  fuse->add_option("--alpha", o.alpha, "IG share of the fused weight")->capture_default_str();
  fuse->add_option("--instances", o.instances, "Rows used for global SHAP")->capture_default_str();
  fuse->add_option("--samples", o.samples, "SHAP permutations per row")->capture_default_str();
  fuse->add_option("--output", o.output, "Fusion JSON to write")->required();
  seed_opt(fuse);

  auto* serve = app.add_subcommand("serve", "Run the tool server");
  model_file_opt(serve, true);
  serve->add_option("--fusion", o.fusion, "Fusion weights JSON (default: identity)")->check(CLI::ExistingFile);
  pcs_opts(serve);
  serve->add_option("--transport", o.transport, "stdio or tcp")
      ->check(CLI::IsMember({"stdio", "tcp"}))
      ->capture_default_str();
  serve->add_option("--port", o.port, "TCP port")->capture_default_str();
  serve->add_option("--tcp", o.tcp, "Shorthand for --transport tcp --port PORT");
  serve->add_option("--audit", o.audit, "Mirror the audit log to this JSONL file");
  serve->add_option("--background", o.background, "Dataset whose mean is the SHAP baseline")
      ->check(CLI::ExistingFile);

  auto* robustness = app.add_subcommand("robustness", "Attack and mitigate a context store");
  model_file_opt(robustness, true);
  robustness->add_option("--data", o.datasets, "Dataset (repeatable)")->required()->check(CLI::ExistingFile);
  robustness->add_option("--provenance", o.provenance, "Provenance of the datasets")->capture_default_str();
  robustness->add_option("--fusion", o.fusion, "Fusion weights JSON")->check(CLI::ExistingFile);
  robustness->add_option("--strategies", o.strategies, "isolation, validation, hybrid")
      ->delimiter(',')
      ->capture_default_str();
  robustness->add_option("--rate", o.rate, "Contamination rate")->capture_default_str();
  robustness->add_option("--delta", o.delta, "Perturbation magnitude")->capture_default_str();
  robustness->add_option("--subset", o.subset, "Contexts per dataset")->capture_default_str();
  robustness->add_option("--csi-trials", o.csi_trials, "Monte-Carlo trials per context")->capture_default_str();
  robustness->add_option("--json", o.json_out, "Write the report as JSON");
  pcs_opts(robustness);
  seed_opt(robustness);

  auto* features = app.add_subcommand("features", "Print the canonical features of URLs");
  features->add_option("--url", o.urls, "URL (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  Manifest manifest;
  manifest.subcommand = sub->get_name();
  manifest.started_at = pg::utc_timestamp();
  manifest.config = collect_config(*sub);
  if (sub->get_option_no_throw("--seed")) manifest.seed = o.seed;
  if (!o.manifest.empty()) manifest.path = o.manifest;

  int rc = 0;
  try {
    const auto& name = manifest.subcommand;
    if (name == "ingest") rc = cmd_ingest(o, manifest);
    else if (name == "generate") rc = cmd_generate(o, manifest);
    else if (name == "train") rc = cmd_train(o, manifest);
    else if (name == "evaluate") rc = cmd_evaluate(o, manifest);
    else if (name == "explain") rc = cmd_explain(o, manifest);
    else if (name == "fuse") rc = cmd_fuse(o, manifest);
    else if (name == "serve") rc = cmd_serve(o, manifest);
    else if (name == "robustness") rc = cmd_robustness(o, manifest);
    else if (name == "features") rc = cmd_features(o, manifest);
  } catch (const pg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    rc = exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    rc = 1;
  }
  std::cout.flush();
  manifest.write(rc);
  return rc;
}
