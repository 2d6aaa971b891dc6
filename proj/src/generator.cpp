#include "phishguard/generator.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"
#include "phishguard/features.hpp"
#include "phishguard/random.hpp"

namespace phishguard {

namespace {

constexpr std::array<std::string_view, 18> kSecurityWords = {
    "secure",  "verify",   "account", "login",    "signin",  "update",
    "confirm", "support",  "billing", "banking",  "password", "validate",
    "unlock",  "webscr",   "auth",    "recovery", "alert",   "service",
};

constexpr std::array<std::string_view, 10> kForeignTlds = {
    "com", "net", "info", "xyz", "top", "online", "site", "live", "club", "support",
};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return std::string(words[uniform_index(rng, N)]);
}

std::string number(Rng& rng, std::uint64_t below = 10000) {
  return std::to_string(uniform_index(rng, below));
}

std::string random_ipv4(Rng& rng) {
  return std::to_string(1 + uniform_index(rng, 223)) + "." + number(rng, 256) + "." +
         number(rng, 256) + "." + std::to_string(1 + uniform_index(rng, 254));
}

std::string random_code(Rng& rng, std::size_t length) {
  static constexpr std::string_view alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::string code;
  for (std::size_t i = 0; i < length; ++i) code += alphabet[uniform_index(rng, alphabet.size())];
  return code;
}

std::string attacker_host(Rng& rng) {
  return pick(kSecurityWords, rng) + "-" + pick(kSecurityWords, rng) + number(rng) + "." +
         pick(kForeignTlds, rng);
}

// A URL broken into the pieces the rules rewrite.
struct Draft {
  std::string scheme;
  std::string userinfo;
  std::string subdomains;  // labels in front of the brand, dot-joined
  std::string brand;       // registrable label; empty for IP hosts
  std::string suffix;
  std::string ip;          // set when the host is an address
  std::string path;
  std::string query;

  std::string host() const {
    if (!ip.empty()) return ip;
    std::string h;
    if (!subdomains.empty()) h += subdomains + ".";
    h += brand;
    if (!suffix.empty()) h += "." + suffix;
    return h;
  }

  std::string url() const {
    std::string out = scheme + "://";
    if (!userinfo.empty()) out += userinfo + "@";
    out += host();
    if (!path.empty() && path.front() != '/') out += "/";
    out += path;
    if (!query.empty()) out += "?" + query;
    return out;
  }
};

Draft make_draft(const UrlParts& parts, const LexicalTables& tables) {
  Draft d;
  d.scheme = parts.scheme;
  d.path = parts.path;
  d.query = parts.query;
  if (is_ipv4_host(parts.host) || parts.host.front() == '[') {
    d.ip = parts.host;
    return d;
  }
  d.suffix = tables.public_suffix(parts.host);
  if (d.suffix.size() >= parts.host.size()) {
    d.brand = parts.host;
    d.suffix.clear();
    return d;
  }
  const auto domain = tables.registrable_domain(parts.host);
  d.brand = domain.substr(0, domain.size() - d.suffix.size() - 1);
  if (domain.size() < parts.host.size()) {
    d.subdomains = parts.host.substr(0, parts.host.size() - domain.size() - 1);
  }
  return d;
}

std::string homoglyph(std::string brand, Rng& rng) {
  static constexpr std::array<std::pair<char, std::string_view>, 9> kLookAlikes = {{
      {'o', "0"}, {'l', "1"}, {'i', "1"}, {'e', "3"}, {'a', "4"},
      {'s', "5"}, {'g', "9"}, {'m', "rn"}, {'w', "vv"},
  }};
  if (brand.empty()) return brand;
  switch (uniform_index(rng, 4)) {
    case 0: {
      std::vector<std::size_t> spots;
      for (std::size_t i = 0; i < brand.size(); ++i) {
        for (const auto& [from, to] : kLookAlikes) {
          if (brand[i] == from) spots.push_back(i);
        }
      }
      if (!spots.empty()) {
        const auto i = spots[uniform_index(rng, spots.size())];
        for (const auto& [from, to] : kLookAlikes) {
          if (brand[i] == from) return brand.substr(0, i) + std::string(to) + brand.substr(i + 1);
        }
      }
      [[fallthrough]];
    }
    case 1: {
      const auto i = uniform_index(rng, brand.size());
      return brand.insert(i, 1, brand[i]);
    }
    case 2:
      if (brand.size() >= 2) {
        const auto i = uniform_index(rng, brand.size() - 1);
        if (brand[i] != brand[i + 1]) {
          std::swap(brand[i], brand[i + 1]);
          return brand;
        }
      }
      [[fallthrough]];
    default:
      if (brand.size() >= 3) {
        const auto i = uniform_index(rng, brand.size());
        return brand.erase(i, 1);
      }
      return brand + brand.back();
  }
}

void apply_rule(TransformRule rule, Draft& d, Rng& rng) {
  switch (rule) {
    case TransformRule::Homoglyph:
      if (!d.brand.empty()) {
        d.brand = homoglyph(d.brand, rng);
      } else {
        d.path = "/" + pick(kSecurityWords, rng) + number(rng) + d.path;
      }
      break;
    case TransformRule::HyphenBrand:
      if (d.brand.empty()) {
        d.ip.clear();
        d.brand = pick(kSecurityWords, rng) + "-" + pick(kSecurityWords, rng) + number(rng);
        d.suffix = pick(kForeignTlds, rng);
      } else if (uniform_index(rng, 2) == 0) {
        d.brand = d.brand + "-" + pick(kSecurityWords, rng);
      } else {
        d.brand = pick(kSecurityWords, rng) + "-" + d.brand;
      }
      break;
    case TransformRule::MisleadingSubdomain: {
      const auto shown = d.host();
      d.ip.clear();
      if (uniform_index(rng, 2) == 0) {
        // paypal.com.secure-login42.net
        d.subdomains = shown;
        d.brand = pick(kSecurityWords, rng) + "-" + pick(kSecurityWords, rng) + number(rng);
      } else {
        // paypal-verify.account1234.xyz
        const auto label = d.brand.empty() ? pick(kSecurityWords, rng) : d.brand;
        d.subdomains = label + "-" + pick(kSecurityWords, rng);
        d.brand = pick(kSecurityWords, rng) + number(rng);
      }
      d.suffix = pick(kForeignTlds, rng);
      break;
    }
    case TransformRule::IpHost: {
      const auto label = d.brand.empty() ? pick(kSecurityWords, rng) : d.brand;
      d.ip = random_ipv4(rng);
      d.path = "/" + label + d.path;
      break;
    }
    case TransformRule::AtRedirect:
      d.userinfo = d.host();
      d.ip.clear();
      d.subdomains.clear();
      if (uniform_index(rng, 4) == 0) {
        d.ip = random_ipv4(rng);
      } else {
        d.brand = pick(kSecurityWords, rng) + number(rng);
        d.suffix = pick(kForeignTlds, rng);
      }
      break;
    case TransformRule::SecurityWord: {
      std::string prefix = "/" + pick(kSecurityWords, rng);
      if (uniform_index(rng, 2) == 0) prefix += "/" + pick(kSecurityWords, rng);
      d.path = prefix + (d.path == "/" ? std::string{} : d.path);
      if (d.query.empty() && uniform_index(rng, 2) == 0) {
        d.query = pick(kSecurityWords, rng) + "=" + number(rng, 100000000);
      }
      break;
    }
  }
}

}  // namespace

std::string_view rule_name(TransformRule rule) noexcept {
  switch (rule) {
    case TransformRule::MisleadingSubdomain: return "misleading-subdomain";
    case TransformRule::SecurityWord: return "security-word";
    case TransformRule::Homoglyph: return "homoglyph";
    case TransformRule::IpHost: return "ip-host";
    case TransformRule::AtRedirect: return "at-redirect";
    case TransformRule::HyphenBrand: return "hyphen-brand";
  }
  return "unknown";
}

std::vector<TransformRule> all_rules() {
  return {TransformRule::MisleadingSubdomain, TransformRule::SecurityWord,
          TransformRule::Homoglyph,           TransformRule::IpHost,
          TransformRule::AtRedirect,          TransformRule::HyphenBrand};
}

TransformRule parse_rule(std::string_view name) {
  for (auto rule : all_rules()) {
    if (rule_name(rule) == name) return rule;
  }
  throw Error(Errc::InvalidArgument, "unknown transformation rule '" + std::string(name) + "'");
}

std::string normalize_url(std::string_view url) {
  std::string lower = detail::to_lower(url);
  const auto scheme_end = lower.find("://");
  const auto authority_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = lower.find('/', authority_start);
  if (path_start != std::string::npos) {
    std::string collapsed = lower.substr(0, path_start);
    for (std::size_t i = path_start; i < lower.size(); ++i) {
      if (lower[i] == '/' && !collapsed.empty() && collapsed.back() == '/' && i > path_start) continue;
      collapsed += lower[i];
    }
    lower = std::move(collapsed);
  }
  while (lower.size() > authority_start && lower.back() == '/') lower.pop_back();
  return lower;
}

std::vector<std::string> generate_synthetic_urls(const GenerationConfig& cfg) {
  if (cfg.legit_urls.empty()) throw Error(Errc::InvalidArgument, "no legitimate base URLs");
  if (cfg.target_count < 1) throw Error(Errc::InvalidArgument, "target count must be >= 1");
  if (cfg.rules.empty()) throw Error(Errc::InvalidArgument, "no transformation rules");
  const auto& tables = LexicalTables::bundled();

  std::vector<UrlParts> bases;
  bases.reserve(cfg.legit_urls.size());
  for (const auto& url : cfg.legit_urls) bases.push_back(parse_url(url));

  Rng rng(cfg.seed);
  std::vector<std::string> out;
  std::unordered_set<std::uint64_t> seen;
  const std::size_t budget = 100 * cfg.target_count;
  for (std::size_t attempt = 0; attempt < budget && out.size() < cfg.target_count; ++attempt) {
    const auto& base = bases[uniform_index(rng, bases.size())];

    std::vector<std::size_t> order(cfg.rules.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(std::span(order), rng);
    const std::size_t count = cfg.rules.size() >= 2 ? 1 + uniform_index(rng, 2) : 1;
    std::vector<TransformRule> chosen;
    for (std::size_t i = 0; i < count; ++i) chosen.push_back(cfg.rules[order[i]]);
    std::sort(chosen.begin(), chosen.end(), [](TransformRule a, TransformRule b) {
      // Host rewrites first, then authority and path decoration.
      constexpr auto rank = [](TransformRule r) {
        switch (r) {
          case TransformRule::Homoglyph: return 0;
          case TransformRule::HyphenBrand: return 1;
          case TransformRule::MisleadingSubdomain: return 2;
          case TransformRule::IpHost: return 3;
          case TransformRule::AtRedirect: return 4;
          case TransformRule::SecurityWord: return 5;
        }
        return 6;
      };
      return rank(a) < rank(b);
    });

    Draft draft = make_draft(base, tables);
    for (auto rule : chosen) apply_rule(rule, draft, rng);
    auto variant = draft.url();
    const auto normalized = normalize_url(variant);
    if (normalized == normalize_url(base.normalized())) continue;
    if (seen.insert(detail::fnv1a(normalized)).second) out.push_back(std::move(variant));
  }
  if (out.size() < cfg.target_count) {
    throw Error(Errc::ExhaustedRuleSpace, "produced " + std::to_string(out.size()) + " of " +
                                              std::to_string(cfg.target_count) +
                                              " unique URLs within the attempt budget");
  }
  return out;
}

std::vector<std::pair<std::string, std::size_t>> count_feature_triggers(
    const std::vector<std::string>& urls, const std::vector<std::string>& features,
    const LexicalTables& tables) {
  std::vector<std::pair<std::string, std::size_t>> report;
  for (const auto& f : features) report.emplace_back(f, 0);
  for (const auto& url : urls) {
    const auto fv = extract_lexical(parse_url(url), tables);
    for (auto& [name, count] : report) {
      if (fv.get(name) == 1.0) ++count;
    }
  }
  return report;
}

std::string format_feature_report(const std::vector<std::pair<std::string, std::size_t>>& report) {
  std::string out;
  for (const auto& [name, count] : report) out += name + " " + std::to_string(count) + "\n";
  return out;
}

std::vector<std::string> ternary_lexical_features() {
  std::vector<std::string> out;
  for (auto f : kLexicalFeatures) {
    if (is_ternary_feature(f)) out.emplace_back(f);
  }
  return out;
}

FeatureRichResult generate_feature_rich_domains(const GenerationConfig& cfg,
                                                const LexicalTables& tables) {
  if (cfg.per_feature_target < 1) throw Error(Errc::InvalidArgument, "per-feature target must be >= 1");
  std::vector<std::string> features = cfg.features;
  if (features.empty()) features = ternary_lexical_features();
  for (const auto& f : features) {
    const bool lexical = std::find(kLexicalFeatures.begin(), kLexicalFeatures.end(), f) != kLexicalFeatures.end();
    if (!lexical || !is_ternary_feature(f)) {
      throw Error(Errc::InvalidArgument, "'" + f + "' is not a ternary lexical feature");
    }
  }

  std::vector<std::string> base_urls = cfg.legit_urls;
  if (base_urls.empty()) base_urls.push_back("https://" + cfg.domain_base + "/");
  std::vector<UrlParts> bases;
  for (const auto& url : base_urls) bases.push_back(parse_url(url));
  const auto shorteners = tables.shortener_hosts();

  Rng rng(cfg.seed);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& feature : features) {
    std::size_t produced = 0;
    const std::size_t budget = 100 * cfg.per_feature_target;
    for (std::size_t attempt = 0; attempt < budget && produced < cfg.per_feature_target; ++attempt) {
      const auto bi = uniform_index(rng, bases.size());
      const Draft d = make_draft(bases[bi], tables);
      const auto host = d.host();
      const auto brand = d.brand.empty() ? pick(kSecurityWords, rng) : d.brand;
      const auto suffix = d.suffix.empty() ? pick(kForeignTlds, rng) : d.suffix;
      std::string url;
      if (feature == "having_IP_Address") {
        url = "http://" + random_ipv4(rng) + "/" + brand + "/" + pick(kSecurityWords, rng);
      } else if (feature == "having_At_Symbol") {
        url = "https://" + host + "@" + attacker_host(rng) + "/" + pick(kSecurityWords, rng);
      } else if (feature == "double_slash_redirecting") {
        url = "https://" + attacker_host(rng) + "/redirect?url=http://" + host + "/" +
              pick(kSecurityWords, rng);
      } else if (feature == "Prefix_Suffix") {
        url = "https://" + brand + "-" + pick(kSecurityWords, rng) + number(rng) + "." + suffix + "/";
      } else if (feature == "having_Sub_Domain") {
        url = "https://" + pick(kSecurityWords, rng) + "." + pick(kSecurityWords, rng) + "." +
              pick(kSecurityWords, rng) + number(rng) + "." + brand + "." + suffix + "/";
      } else if (feature == "Shortening_Service") {
        url = "https://" + shorteners[uniform_index(rng, shorteners.size())] + "/" + random_code(rng, 7);
      } else {  // HTTPS_token
        url = "http://https-" + brand + number(rng) + "." + suffix + "/" + pick(kSecurityWords, rng);
      }
      if (extract_lexical(parse_url(url), tables).get(feature) != 1.0) continue;
      if (!seen.insert(detail::fnv1a(normalize_url(url))).second) continue;
      pairs.emplace_back(std::move(url), base_urls[bi]);
      ++produced;
    }
    if (produced < cfg.per_feature_target) {
      throw Error(Errc::ExhaustedRuleSpace, "could not produce " + std::to_string(cfg.per_feature_target) +
                                                " unique variants for " + feature);
    }
  }

  shuffle(std::span(pairs), rng);
  FeatureRichResult result;
  for (auto& [phish, legit] : pairs) {
    result.phishing.push_back(std::move(phish));
    result.legitimate.push_back(std::move(legit));
  }
  result.report = count_feature_triggers(result.phishing, features, tables);
  return result;
}

}  // namespace phishguard
