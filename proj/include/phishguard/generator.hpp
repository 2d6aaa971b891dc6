#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "phishguard/url.hpp"

namespace phishguard {

// Deterministic rewrites that turn a legitimate URL into a phishing-like one.
enum class TransformRule {
  MisleadingSubdomain,  // brand pushed into a subdomain of a foreign host
  SecurityWord,         // "verify", "secure", "account"... in the path
  Homoglyph,            // look-alike or typo substitution in the brand label
  IpHost,               // host replaced by a dotted-quad address
  AtRedirect,           // brand@attacker authority
  HyphenBrand,          // brand-word / word-brand registrable label
};

std::string_view rule_name(TransformRule rule) noexcept;
TransformRule parse_rule(std::string_view name);
std::vector<TransformRule> all_rules();

struct GenerationConfig {
  std::vector<std::string> legit_urls;
  std::size_t target_count = 1;
  std::vector<TransformRule> rules = all_rules();
  std::uint64_t seed = 0;
  std::size_t per_feature_target = 1;
  std::string domain_base = "example.com";
  // Lexical ternary features the feature-rich generator should trigger.
  std::vector<std::string> features;
};

// Lowercase, drop trailing '/', collapse repeated '/' in the path.
std::string normalize_url(std::string_view url);

// Exactly target_count unique phishing-like URLs, each different from its
// base. Throws ExhaustedRuleSpace after 100 x target_count candidate draws.
std::vector<std::string> generate_synthetic_urls(const GenerationConfig& cfg);

struct FeatureRichResult {
  std::vector<std::string> phishing;    // shuffled
  std::vector<std::string> legitimate;  // base URL paired with each phishing entry
  std::vector<std::pair<std::string, std::size_t>> report;  // feature -> trigger count
};

// per_feature_target variants for each requested feature, every one of which
// extracts that feature as 1; the report counts triggers over the whole list.
FeatureRichResult generate_feature_rich_domains(const GenerationConfig& cfg,
                                                const LexicalTables& tables = LexicalTables::bundled());

// The lexical features whose value is ternary; the default trigger set.
std::vector<std::string> ternary_lexical_features();

// Per-feature count of URLs whose lexical extraction yields 1.
std::vector<std::pair<std::string, std::size_t>> count_feature_triggers(
    const std::vector<std::string>& urls, const std::vector<std::string>& features,
    const LexicalTables& tables = LexicalTables::bundled());

std::string format_feature_report(const std::vector<std::pair<std::string, std::size_t>>& report);

}  // namespace phishguard
