#pragma once

#include <Eigen/Dense>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phishguard/url.hpp"

namespace phishguard {

inline constexpr std::size_t kFeatureCount = 23;

// Canonical order shared by every dataset, model and wire format.
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "Abnormal_URL",
    "DNSRecord",
    "Google_Index",
    "HTTPS_token",
    "Iframe",
    "Links_in_tags",
    "Links_pointing_to_page",
    "Prefix_Suffix",
    "Redirect",
    "Request_URL",
    "RightClick",
    "SFH",
    "Shortening_Service",
    "Statistical_report",
    "Submitting_to_email",
    "URL_Length",
    "URL_of_Anchor",
    "double_slash_redirecting",
    "having_At_Symbol",
    "having_IP_Address",
    "having_Sub_Domain",
    "on_mouseover",
    "web_traffic",
};

// Computed from the URL string alone.
inline constexpr std::array<std::string_view, 8> kLexicalFeatures = {
    "URL_Length",         "having_IP_Address", "having_At_Symbol",   "double_slash_redirecting",
    "Prefix_Suffix",      "having_Sub_Domain", "Shortening_Service", "HTTPS_token",
};

// Content and reputation features, answered by a Resolver.
inline constexpr std::array<std::string_view, 15> kResolvedFeatures = {
    "Abnormal_URL", "DNSRecord",          "Google_Index",       "Iframe",
    "Links_in_tags", "Links_pointing_to_page", "Redirect",      "Request_URL",
    "RightClick",   "SFH",                "Statistical_report", "Submitting_to_email",
    "URL_of_Anchor", "on_mouseover",      "web_traffic",
};

std::optional<std::size_t> feature_index(std::string_view name);
bool is_ternary_feature(std::string_view name);
std::vector<std::string> canonical_feature_names();

// Name -> value map. Ternary features hold -1 (legitimate-leaning),
// 0 (suspicious or unknown) or 1 (phishing-leaning); URL_Length is a count.
class FeatureVector {
 public:
  using Map = std::map<std::string, double, std::less<>>;

  void set(std::string_view name, double value);
  std::optional<double> get(std::string_view name) const;
  bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
  std::size_t size() const { return values_.size(); }
  const Map& values() const { return values_; }

  bool operator==(const FeatureVector&) const = default;

 private:
  Map values_;
};

FeatureVector extract_lexical(const UrlParts& parts, const LexicalTables& tables);

enum class AnswerSource { OfflineDefault, Precomputed, External };

struct ResolverAnswer {
  std::string feature;
  double value = 0.0;
  AnswerSource source = AnswerSource::OfflineDefault;
};

// Supplies content and reputation features that cannot be read off the URL.
class Resolver {
 public:
  virtual ~Resolver() = default;
  virtual ResolverAnswer resolve(const UrlParts& parts, std::string_view feature) const = 0;
  // True when one instance may be used from several threads at once.
  virtual bool shareable() const noexcept = 0;
};

// Answers 0 ("unknown") for everything.
class OfflineResolver final : public Resolver {
 public:
  ResolverAnswer resolve(const UrlParts& parts, std::string_view feature) const override;
  bool shareable() const noexcept override { return true; }
};

// Looks answers up in a table keyed by feature name, optionally per URL
// (matched on the raw string). Missing entries fall back to the offline default.
class PrecomputedResolver final : public Resolver {
 public:
  explicit PrecomputedResolver(std::map<std::string, double, std::less<>> defaults = {});
  void add_url(std::string raw_url, std::map<std::string, double, std::less<>> answers);

  ResolverAnswer resolve(const UrlParts& parts, std::string_view feature) const override;
  bool shareable() const noexcept override { return true; }

 private:
  std::map<std::string, double, std::less<>> defaults_;
  std::map<std::string, std::map<std::string, double, std::less<>>, std::less<>> per_url_;
};

// Adds the 15 resolver-backed features to a lexical vector. A value outside
// {-1,0,1}, or any exception from the resolver, surfaces as ResolverFailure
// naming the feature.
FeatureVector resolve_remaining(const UrlParts& parts, FeatureVector lexical,
                                const Resolver& resolver);

FeatureVector extract_features(std::string_view url, const LexicalTables& tables,
                               const Resolver& resolver);

// Values in canonical order; throws MissingFeature listing absent names.
Eigen::VectorXd to_canonical_vector(const FeatureVector& fv);
FeatureVector from_canonical_vector(const Eigen::Ref<const Eigen::VectorXd>& values);

// One-line explanation of a feature value, used for rationales.
std::string describe_feature(std::string_view name, double value);

}  // namespace phishguard
