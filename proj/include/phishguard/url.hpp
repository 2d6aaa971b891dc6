#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace phishguard {

struct UrlParts {
  std::string scheme;    // lowercased, "http" when the input has none
  std::string userinfo;  // text before '@' in the authority, kept out of host
  std::string host;      // lowercased, non-empty
  std::optional<int> port;
  std::string path;
  std::string query;
  std::string fragment;
  std::string raw;       // the input exactly as given

  // scheme://[userinfo@]host[:port]path[?query][#fragment]
  std::string normalized() const;
};

// Throws Error{MalformedUrl} when no host can be identified.
UrlParts parse_url(std::string_view raw);

bool is_ipv4_host(std::string_view host);

// Suffix and shortener tables backing the lexical rules.
class LexicalTables {
 public:
  LexicalTables(std::vector<std::string> public_suffixes,
                std::vector<std::string> shorteners);

  // Loads public_suffixes.txt and shorteners.txt from `dir`.
  static LexicalTables load(const std::filesystem::path& dir);
  // Tables from data_dir(), loaded once.
  static const LexicalTables& bundled();

  bool is_public_suffix(std::string_view s) const;
  bool is_shortener(std::string_view host) const;
  std::vector<std::string> shortener_hosts() const;  // sorted

  // Longest matching public suffix of host; the last label when none match.
  std::string public_suffix(std::string_view host) const;
  // Suffix plus one label. IP hosts are returned unchanged.
  std::string registrable_domain(std::string_view host) const;
  // Labels in front of the registrable domain, after dropping a leading "www.".
  std::vector<std::string> subdomain_labels(std::string_view host) const;

 private:
  std::unordered_set<std::string> suffixes_;
  std::unordered_set<std::string> shorteners_;
};

}  // namespace phishguard
