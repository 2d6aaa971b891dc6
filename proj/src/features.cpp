#include "phishguard/features.hpp"

#include <algorithm>

#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"

namespace phishguard {

namespace {

double flag(bool phishing_leaning) { return phishing_leaning ? 1.0 : -1.0; }

struct FeatureText {
  std::string_view name;
  std::string_view phishing;
  std::string_view legitimate;
};

constexpr std::array<FeatureText, kFeatureCount> kDescriptions = {{
    {"Abnormal_URL", "host identity does not match the URL", "URL identity looks normal"},
    {"DNSRecord", "no DNS record for the domain", "domain has a DNS record"},
    {"Google_Index", "page is not indexed by search engines", "page is indexed by search engines"},
    {"HTTPS_token", "'https' token embedded in the host name", "no 'https' token in the host"},
    {"Iframe", "page uses invisible iframes", "no invisible iframes"},
    {"Links_in_tags", "meta/script/link tags point to foreign domains", "tag links stay on the domain"},
    {"Links_pointing_to_page", "few or no external links point to the page", "page has inbound links"},
    {"Prefix_Suffix", "hyphenated domain name", "domain name has no hyphen"},
    {"Redirect", "multiple redirects", "few or no redirects"},
    {"Request_URL", "embedded objects load from foreign domains", "embedded objects load locally"},
    {"RightClick", "right click is disabled", "right click works"},
    {"SFH", "form handler is blank or on a foreign domain", "form handler is on the domain"},
    {"Shortening_Service", "URL uses a shortening service", "URL is not shortened"},
    {"Statistical_report", "host appears in phishing statistics reports", "host absent from phishing reports"},
    {"Submitting_to_email", "form submits to an email address", "form does not submit to email"},
    {"URL_Length", "long URL", "short URL"},
    {"URL_of_Anchor", "anchors point to foreign or empty targets", "anchors point to the domain"},
    {"double_slash_redirecting", "'//' redirect inside the path", "no '//' redirect in the path"},
    {"having_At_Symbol", "'@' symbol in the URL", "no '@' symbol in the URL"},
    {"having_IP_Address", "IP address present in host", "host is a domain name"},
    {"having_Sub_Domain", "many subdomain levels", "few subdomain levels"},
    {"on_mouseover", "status bar rewritten on mouseover", "status bar untouched"},
    {"web_traffic", "little or no web traffic", "substantial web traffic"},
}};

}  // namespace

std::optional<std::size_t> feature_index(std::string_view name) {
  const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
  if (it == kFeatureNames.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kFeatureNames.begin());
}

bool is_ternary_feature(std::string_view name) { return name != "URL_Length"; }

std::vector<std::string> canonical_feature_names() {
  return {kFeatureNames.begin(), kFeatureNames.end()};
}

void FeatureVector::set(std::string_view name, double value) {
  if (auto it = values_.find(name); it != values_.end()) {
    it->second = value;
  } else {
    values_.emplace(std::string(name), value);
  }
}

std::optional<double> FeatureVector::get(std::string_view name) const {
  const auto it = values_.find(name);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

FeatureVector extract_lexical(const UrlParts& parts, const LexicalTables& tables) {
  FeatureVector fv;
  const std::string_view raw = parts.raw;
  const std::string& host = parts.host;

  fv.set("URL_Length", static_cast<double>(detail::utf8_length(raw)));
  fv.set("having_IP_Address", flag(is_ipv4_host(host)));
  fv.set("having_At_Symbol", flag(raw.find('@') != std::string_view::npos));
  fv.set("double_slash_redirecting", flag(raw.size() > 8 && raw.find("//", 8) != std::string_view::npos));

  // Hyphen anywhere in the host outside its public suffix.
  bool hyphen = false;
  if (!is_ipv4_host(host)) {
    const auto suffix = tables.public_suffix(host);
    const auto owned = host.size() > suffix.size() ? std::string_view(host).substr(0, host.size() - suffix.size())
                                                   : std::string_view(host);
    hyphen = owned.find('-') != std::string_view::npos;
  }
  fv.set("Prefix_Suffix", flag(hyphen));

  const auto depth = tables.subdomain_labels(host).size();
  fv.set("having_Sub_Domain", depth <= 1 ? -1.0 : (depth == 2 ? 0.0 : 1.0));
  fv.set("Shortening_Service", flag(tables.is_shortener(host)));
  fv.set("HTTPS_token", flag(host.find("https") != std::string::npos));
  return fv;
}

ResolverAnswer OfflineResolver::resolve(const UrlParts&, std::string_view feature) const {
  return {std::string(feature), 0.0, AnswerSource::OfflineDefault};
}

PrecomputedResolver::PrecomputedResolver(std::map<std::string, double, std::less<>> defaults)
    : defaults_(std::move(defaults)) {}

void PrecomputedResolver::add_url(std::string raw_url,
                                  std::map<std::string, double, std::less<>> answers) {
  per_url_[std::move(raw_url)] = std::move(answers);
}

ResolverAnswer PrecomputedResolver::resolve(const UrlParts& parts, std::string_view feature) const {
  if (const auto url = per_url_.find(parts.raw); url != per_url_.end()) {
    if (const auto it = url->second.find(feature); it != url->second.end()) {
      return {std::string(feature), it->second, AnswerSource::Precomputed};
    }
  }
  if (const auto it = defaults_.find(feature); it != defaults_.end()) {
    return {std::string(feature), it->second, AnswerSource::Precomputed};
  }
  return {std::string(feature), 0.0, AnswerSource::OfflineDefault};
}

FeatureVector resolve_remaining(const UrlParts& parts, FeatureVector lexical,
                                const Resolver& resolver) {
  for (const auto name : kResolvedFeatures) {
    ResolverAnswer answer;
    try {
      answer = resolver.resolve(parts, name);
    } catch (const Error& e) {
      if (e.code() == Errc::ResolverFailure) throw;
      throw Error(Errc::ResolverFailure, std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(Errc::ResolverFailure, std::string(name) + ": " + e.what());
    }
    const double v = answer.value;
    if (v != -1.0 && v != 0.0 && v != 1.0) {
      throw Error(Errc::ResolverFailure,
                  std::string(name) + ": value " + detail::format_number(v) + " outside {-1,0,1}");
    }
    lexical.set(name, v);
  }
  return lexical;
}

FeatureVector extract_features(std::string_view url, const LexicalTables& tables,
                               const Resolver& resolver) {
  const auto parts = parse_url(url);
  return resolve_remaining(parts, extract_lexical(parts, tables), resolver);
}

Eigen::VectorXd to_canonical_vector(const FeatureVector& fv) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(kFeatureCount));
  std::string missing;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (const auto v = fv.get(kFeatureNames[i])) {
      out[static_cast<Eigen::Index>(i)] = *v;
    } else {
      if (!missing.empty()) missing += ",";
      missing += kFeatureNames[i];
    }
  }
  if (!missing.empty()) throw Error(Errc::MissingFeature, "{" + missing + "}");
  return out;
}

FeatureVector from_canonical_vector(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() != static_cast<Eigen::Index>(kFeatureCount)) {
    throw Error(Errc::DimensionMismatch, "expected 23 values, got " + std::to_string(values.size()));
  }
  FeatureVector fv;
  for (std::size_t i = 0; i < kFeatureCount; ++i) fv.set(kFeatureNames[i], values[static_cast<Eigen::Index>(i)]);
  return fv;
}

std::string describe_feature(std::string_view name, double value) {
  const auto it = std::find_if(kDescriptions.begin(), kDescriptions.end(),
                               [&](const FeatureText& t) { return t.name == name; });
  if (it == kDescriptions.end()) return std::string(name) + " = " + detail::format_number(value);
  if (name == "URL_Length") {
    return "URL length " + detail::format_number(value);
  }
  if (value > 0) return std::string(it->phishing);
  if (value < 0) return std::string(it->legitimate);
  return std::string(name) + " is suspicious or unknown";
}

}  // namespace phishguard
