#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishguard/dataset.hpp"
#include "phishguard/explain.hpp"
#include "phishguard/features.hpp"
#include "phishguard/learners.hpp"
#include "phishguard/version.hpp"

namespace phishguard {

// Sealed per-request state: features, model output and predicted label.
struct IsolatedContext {
  std::string id;
  std::string request_id;
  std::string session;
  std::string url;
  Eigen::VectorXd x;
  double probability = 0.0;
  int label = 0;
  Provenance provenance = Provenance::Unknown;
  std::string created_at;  // UTC, ISO-8601; audit only, never echoed to clients
  bool sealed = false;
  std::uint64_t digest = 0;

  // Hash over every field except created_at and the seal itself.
  std::uint64_t compute_digest() const;
  void seal();
  bool intact() const { return sealed && digest == compute_digest(); }
  bool operator==(const IsolatedContext&) const = default;
};

std::string utc_timestamp();

struct FusionResult {
  int label = 0;
  double probability = 0.0;
  std::vector<std::string> rationale;                      // at most three entries
  std::vector<std::pair<std::string, double>> contributions;  // nonzero only, by descending magnitude
};

// Scores the model on x scaled elementwise by the fusion weights. Linear models
// attribute w_j * (fused x_j); other models use the logit drop when the fused
// value of feature j is zeroed.
FusionResult classify_with_fusion(const Eigen::VectorXd& x, const Model& model, const FusionWeights& fusion);

// Builds and seals a context for an already extracted vector.
IsolatedContext make_context(std::string id, const Eigen::VectorXd& x, const Model& model,
                             const FusionWeights& fusion, Provenance provenance = Provenance::Unknown);

struct PcsConfig {
  int k = 5;
  double threshold = 0.5;  // tau
  Dataset reference;
  Standardizer scaler;     // fitted on the reference set
  Eigen::MatrixXd standardized;  // reference rows after scaler

  static PcsConfig build(Dataset reference, int k, double threshold);
};

struct PcsResult {
  double pcs = 0.0;
  bool flagged = false;
  Provenance claimed = Provenance::Unknown;
};

// Fraction of the k nearest reference rows (Euclidean on standardized
// vectors, ties by row order) whose provenance equals `claimed`.
PcsResult provenance_score(const Eigen::VectorXd& x, const PcsConfig& pcs,
                           Provenance claimed = Provenance::Unknown);

// Append-only, thread-safe record of sealed contexts. Optionally mirrors each
// entry as one JSON line to a file.
class AuditLog {
 public:
  // Truncates `path` and appends one JSON line per entry from now on.
  void open_mirror(const std::filesystem::path& path);

  void append(const IsolatedContext& ctx);
  std::vector<IsolatedContext> entries() const;
  std::size_t size() const;
  void flush();

 private:
  mutable std::mutex mutex_;
  std::vector<IsolatedContext> entries_;
  std::ofstream mirror_;
};

std::string context_to_json(const IsolatedContext& ctx);

struct ServerOptions {
  std::string version{kVersion};
  std::shared_ptr<const Model> model;
  FusionWeights fusion;
  std::shared_ptr<const PcsConfig> pcs;        // optional
  std::shared_ptr<const Resolver> resolver;    // defaults to the offline resolver
  const LexicalTables* tables = nullptr;       // defaults to the bundled tables
  Eigen::VectorXd background_mean;             // explain_url baseline; zeros when empty
  std::filesystem::path audit_path;            // optional JSONL mirror of the audit log
};

class Server {
 public:
  explicit Server(ServerOptions options);

  // One request line in, one response line out (no trailing newline).
  // `default_session` applies when the request carries no session.
  std::string handle(std::string_view line, std::string_view default_session = "default");

  static const std::vector<std::string>& tool_names();
  AuditLog& audit() { return audit_; }
  const ServerOptions& options() const { return options_; }

  // "<session>/<id>", plus "#n" on the n-th reuse of the same pair.
  std::string next_context_id(const std::string& session, const std::string& id);

 private:
  ServerOptions options_;
  AuditLog audit_;
  std::mutex ids_mutex_;
  std::map<std::pair<std::string, std::string>, std::size_t> id_uses_;
};

// Reads request lines until EOF or stop; writes one response line per request.
void serve_stdio(Server& server, std::istream& in, std::ostream& out, const std::atomic<bool>& stop);

// Line protocol on a TCP port, one thread per connection. Returns once stop
// is set; `bound_port` receives the listening port (useful with port 0).
void serve_tcp(Server& server, int port, const std::atomic<bool>& stop,
               std::atomic<int>* bound_port = nullptr);

}  // namespace phishguard
