#include "phishguard/mcp.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <numeric>

#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"
#include "phishguard/math.hpp"

namespace phishguard {

using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;

std::uint64_t IsolatedContext::compute_digest() const {
  std::string s = id + '\x1f' + request_id + '\x1f' + session + '\x1f' + url + '\x1f';
  for (Index i = 0; i < x.size(); ++i) s += detail::format_number(x(i)) + ',';
  s += '\x1f' + detail::format_number(probability) + '\x1f' + std::to_string(label) + '\x1f' +
       std::string(provenance_name(provenance));
  return detail::fnv1a(s);
}

void IsolatedContext::seal() {
  digest = compute_digest();
  sealed = true;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

namespace {

const std::vector<std::string>& names_of(const Model& model) {
  static const std::vector<std::string> canonical = canonical_feature_names();
  return model.feature_names.empty() ? canonical : model.feature_names;
}

double clamp_logit(double p) { return logit(std::clamp(p, 1e-12, 1.0 - 1e-12)); }

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

FusionResult classify_with_fusion(const VectorXd& x, const Model& model, const FusionWeights& fusion) {
  const auto& names = names_of(model);
  if (x.size() != model.dimension() || static_cast<Index>(names.size()) != x.size()) {
    throw Error(Errc::DimensionMismatch, "expected " + std::to_string(model.dimension()) +
                                             " features, got " + std::to_string(x.size()));
  }
  const VectorXd fused = x.cwiseProduct(fusion.weight_vector(names));
  FusionResult r;
  r.probability = predict_proba(model, fused);
  r.label = predict_label(r.probability);

  VectorXd contribution = VectorXd::Zero(x.size());
  if (const auto* linear = std::get_if<LinearModel>(&model.params)) {
    contribution = linear->weights.cwiseProduct(fused);
  } else {
    const double base = clamp_logit(r.probability);
    VectorXd probe = fused;
    for (Index j = 0; j < x.size(); ++j) {
      if (fused(j) == 0.0) continue;
      probe(j) = 0.0;
      contribution(j) = base - clamp_logit(predict_proba(model, probe));
      probe(j) = fused(j);
    }
  }
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(contribution(a)) > std::abs(contribution(b));
  });
  for (auto j : order) {
    if (contribution(j) == 0.0) break;
    r.contributions.emplace_back(names[static_cast<std::size_t>(j)], contribution(j));
    if (r.rationale.size() < 3) r.rationale.push_back(describe_feature(names[static_cast<std::size_t>(j)], x(j)));
  }
  return r;
}

IsolatedContext make_context(std::string id, const VectorXd& x, const Model& model, const FusionWeights& fusion,
                             Provenance provenance) {
  const auto r = classify_with_fusion(x, model, fusion);
  IsolatedContext ctx;
  ctx.id = std::move(id);
  ctx.x = x;
  ctx.probability = r.probability;
  ctx.label = r.label;
  ctx.provenance = provenance;
  ctx.created_at = utc_timestamp();
  ctx.seal();
  return ctx;
}

PcsConfig PcsConfig::build(Dataset reference, int k, double threshold) {
  if (reference.empty()) throw Error(Errc::EmptyReferenceSet, "PCS reference set is empty");
  if (k < 1 || k > reference.size()) {
    throw Error(Errc::InvalidArgument, "PCS k must lie in [1, " + std::to_string(reference.size()) + "]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(Errc::InvalidArgument, "PCS threshold outside [0,1]");
  PcsConfig c;
  c.k = k;
  c.threshold = threshold;
  c.scaler = Standardizer::fit(reference.features);
  c.standardized = c.scaler.transform(reference.features);
  c.reference = std::move(reference);
  return c;
}

PcsResult provenance_score(const VectorXd& x, const PcsConfig& pcs, Provenance claimed) {
  if (pcs.reference.empty()) throw Error(Errc::EmptyReferenceSet, "PCS reference set is empty");
  if (x.size() != pcs.reference.dimension()) {
    throw Error(Errc::DimensionMismatch, "PCS vector length differs from the reference set");
  }
  const auto n = static_cast<std::size_t>(pcs.reference.size());
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(pcs.k, 1)), n);
  const bool scaled_set = pcs.scaler.scale.size() == x.size();
  const Eigen::MatrixXd scaled = scaled_set ? pcs.scaler.transform(x.transpose()) : Eigen::MatrixXd(x.transpose());
  const Eigen::MatrixXd& reference = pcs.standardized.rows() == pcs.reference.size()
                                         ? pcs.standardized
                                         : pcs.reference.features;
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = {(reference.row(static_cast<Index>(i)) - scaled.row(0)).squaredNorm(), i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::size_t matches = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (pcs.reference.provenance[dist[i].second] == claimed) ++matches;
  }
  PcsResult r;
  r.claimed = claimed;
  r.pcs = static_cast<double>(matches) / static_cast<double>(k);
  r.flagged = r.pcs < pcs.threshold;
  return r;
}

std::string context_to_json(const IsolatedContext& ctx) {
  const json j = {{"context_id", ctx.id},
                  {"request_id", ctx.request_id},
                  {"session", ctx.session},
                  {"url", ctx.url},
                  {"x", std::vector<double>(ctx.x.data(), ctx.x.data() + ctx.x.size())},
                  {"probability", ctx.probability},
                  {"label", ctx.label},
                  {"provenance", provenance_name(ctx.provenance)},
                  {"created_at", ctx.created_at},
                  {"sealed", ctx.sealed},
                  {"digest", ctx.digest}};
  return j.dump();
}

void AuditLog::open_mirror(const std::filesystem::path& path) {
  std::lock_guard lock(mutex_);
  mirror_.close();
  mirror_.open(path, std::ios::trunc);
  if (!mirror_) throw Error(Errc::Io, "cannot open audit log " + path.string());
}

void AuditLog::append(const IsolatedContext& ctx) {
  std::lock_guard lock(mutex_);
  entries_.push_back(ctx);
  if (mirror_.is_open()) mirror_ << context_to_json(ctx) << '\n';
}

std::vector<IsolatedContext> AuditLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void AuditLog::flush() {
  std::lock_guard lock(mutex_);
  if (mirror_.is_open()) mirror_.flush();
}

Server::Server(ServerOptions options) : options_(std::move(options)) {
  if (!options_.model) throw Error(Errc::InvalidArgument, "server needs a model");
  if (!options_.resolver) options_.resolver = std::make_shared<OfflineResolver>();
  if (!options_.tables) options_.tables = &LexicalTables::bundled();
  if (options_.background_mean.size() == 0) options_.background_mean = VectorXd::Zero(options_.model->dimension());
  if (options_.pcs && options_.pcs->reference.dimension() != options_.model->dimension()) {
    throw Error(Errc::DimensionMismatch, "PCS reference set and model differ in dimension");
  }
  if (!options_.audit_path.empty()) audit_.open_mirror(options_.audit_path);
}

const std::vector<std::string>& Server::tool_names() {
  static const std::vector<std::string> names = {"server_info", "extract_features", "classify_url", "explain_url"};
  return names;
}

std::string Server::next_context_id(const std::string& session, const std::string& id) {
  std::size_t use = 0;
  {
    std::lock_guard lock(ids_mutex_);
    use = id_uses_[{session, id}]++;
  }
  std::string ctx = session + "/" + id;
  if (use > 0) ctx += "#" + std::to_string(use);
  return ctx;
}

namespace {

struct ToolError {
  std::string code;
  std::string message;
};

json error_envelope(const json& id, const std::string& code, const std::string& message) {
  return {{"id", id}, {"status", "error"}, {"error", {{"code", code}, {"message", message}}}};
}

std::string require_url(const json& args) {
  if (!args.is_object() || !args.contains("url") || !args.at("url").is_string()) {
    throw ToolError{"PARSE_ERROR", "arguments.url must be a string"};
  }
  return args.at("url").get<std::string>();
}

VectorXd model_vector(const Server& server, const std::string& url) {
  const auto& opts = server.options();
  const auto fv = extract_features(url, *opts.tables, *opts.resolver);
  const auto& names = names_of(*opts.model);
  VectorXd x(static_cast<Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto v = fv.get(names[i]);
    if (!v) throw Error(Errc::MissingFeature, names[i]);
    x(static_cast<Index>(i)) = *v;
  }
  return x;
}

Provenance claimed_provenance(const json& args) {
  if (!args.contains("provenance")) return Provenance::Unknown;
  if (!args.at("provenance").is_string()) throw ToolError{"PARSE_ERROR", "arguments.provenance must be a string"};
  try {
    return parse_provenance(args.at("provenance").get<std::string>());
  } catch (const Error& e) {
    throw ToolError{"PARSE_ERROR", e.detail()};
  }
}

IsolatedContext seal_context(Server& server, const std::string& session, const std::string& id,
                             const std::string& url, const VectorXd& x, double probability, int label,
                             Provenance provenance) {
  IsolatedContext ctx;
  ctx.id = server.next_context_id(session, id);
  ctx.request_id = id;
  ctx.session = session;
  ctx.url = url;
  ctx.x = x;
  ctx.probability = probability;
  ctx.label = label;
  ctx.provenance = provenance;
  ctx.created_at = utc_timestamp();
  ctx.seal();
  server.audit().append(ctx);
  return ctx;
}

json tool_server_info(const Server& server) {
  const auto& model = *server.options().model;
  return {{"name", "phishguard"},
          {"version", server.options().version},
          {"tools", Server::tool_names()},
          {"model",
           {{"kind", model.kind},
            {"format_version", 1},
            {"feature_count", model.dimension()},
            {"fingerprint", detail::fnv1a(model_to_json(model))}}}};
}

json tool_extract_features(const Server& server, const json& args) {
  const auto url = require_url(args);
  const auto& opts = server.options();
  const auto fv = extract_features(url, *opts.tables, *opts.resolver);
  json out = json::object();
  for (const auto& [name, value] : fv.values()) out[name] = value;
  return out;
}

json tool_classify(Server& server, const json& args, const std::string& session, const std::string& id) {
  const auto url = require_url(args);
  const auto claimed = claimed_provenance(args);
  const auto& opts = server.options();
  const VectorXd x = model_vector(server, url);
  const auto r = classify_with_fusion(x, *opts.model, opts.fusion);

  json pcs = nullptr;
  bool flagged = false;
  if (opts.pcs) {
    const auto p = provenance_score(x, *opts.pcs, claimed);
    pcs = round6(p.pcs);
    flagged = p.flagged;
  }
  const auto ctx = seal_context(server, session, id, url, x, r.probability, r.label, claimed);
  return {{"label", r.label == 1 ? "phishing" : "legitimate"},
          {"probability", round6(r.probability)},
          {"rationale", r.rationale},
          {"pcs", pcs},
          {"flagged", flagged},
          {"context_id", ctx.id}};
}

json tool_explain(Server& server, const json& args, const std::string& session, const std::string& id) {
  const auto url = require_url(args);
  int top = 5;
  if (args.contains("top")) {
    if (!args.at("top").is_number_integer() || args.at("top").get<int>() < 1) {
      throw ToolError{"PARSE_ERROR", "arguments.top must be a positive integer"};
    }
    top = args.at("top").get<int>();
  }
  const auto& opts = server.options();
  const VectorXd x = model_vector(server, url);
  const auto e = shap_for_model(*opts.model, x, opts.background_mean, 200, detail::fnv1a(url));
  const double p = predict_proba(*opts.model, x);
  const auto ranked = rank_attributions(names_of(*opts.model), x, e.phi);
  json list = json::array();
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < top; ++i) {
    list.push_back({{"feature", ranked[i].feature},
                    {"value", ranked[i].value},
                    {"attribution", round6(ranked[i].attribution)},
                    {"direction", ranked[i].direction}});
  }
  const auto ctx = seal_context(server, session, id, url, x, p, predict_label(p), Provenance::Unknown);
  return {{"method", e.method},
          {"scale", e.scale},
          {"base_value", round6(e.base_value)},
          {"probability", round6(p)},
          {"attributions", list},
          {"context_id", ctx.id}};
}

}  // namespace

std::string Server::handle(std::string_view line, std::string_view default_session) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return error_envelope(nullptr, "PARSE_ERROR", e.what()).dump();
  }
  if (!request.is_object()) return error_envelope(nullptr, "PARSE_ERROR", "request must be an object").dump();
  const json id = request.contains("id") ? request.at("id") : json(nullptr);
  if (!id.is_string() || id.get<std::string>().empty()) {
    return error_envelope(nullptr, "PARSE_ERROR", "id must be a non-empty string").dump();
  }
  if (!request.contains("tool") || !request.at("tool").is_string()) {
    return error_envelope(id, "PARSE_ERROR", "tool must be a string").dump();
  }
  std::string session(default_session);
  if (request.contains("session")) {
    if (!request.at("session").is_string()) return error_envelope(id, "PARSE_ERROR", "session must be a string").dump();
    session = request.at("session").get<std::string>();
  }
  const json args = request.contains("arguments") ? request.at("arguments") : json::object();
  if (!args.is_object()) return error_envelope(id, "PARSE_ERROR", "arguments must be an object").dump();

  const auto tool = request.at("tool").get<std::string>();
  const auto request_id = id.get<std::string>();
  try {
    json result;
    if (tool == "server_info") {
      result = tool_server_info(*this);
    } else if (tool == "extract_features") {
      result = tool_extract_features(*this, args);
    } else if (tool == "classify_url") {
      result = tool_classify(*this, args, session, request_id);
    } else if (tool == "explain_url") {
      result = tool_explain(*this, args, session, request_id);
    } else {
      return error_envelope(id, "TOOL_NOT_FOUND", "unknown tool '" + tool + "'").dump();
    }
    return json{{"id", id}, {"status", "ok"}, {"result", result}}.dump();
  } catch (const ToolError& e) {
    return error_envelope(id, e.code, e.message).dump();
  } catch (const Error& e) {
    const auto code = e.code() == Errc::MalformedUrl ? "MALFORMED_URL" : "INTERNAL";
    return error_envelope(id, code, e.what()).dump();
  } catch (const std::exception& e) {
    return error_envelope(id, "INTERNAL", e.what()).dump();
  }
}

void serve_stdio(Server& server, std::istream& in, std::ostream& out, const std::atomic<bool>& stop) {
  std::string line;
  while (!stop.load() && std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    out << server.handle(line, "stdio") << '\n';
    out.flush();
  }
  server.audit().flush();
}

}  // namespace phishguard
