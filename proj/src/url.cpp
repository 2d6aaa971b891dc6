#include "phishguard/url.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>

#include "phishguard/data_files.hpp"
#include "phishguard/detail/text.hpp"
#include "phishguard/error.hpp"

namespace phishguard {

namespace {

bool is_scheme_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

bool is_host_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || c == '-' || c == '.' || c == '_' || u >= 0x80;
}

// Parses one IPv4 component: decimal, or hex with a 0x prefix.
std::optional<std::uint64_t> ipv4_component(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

bool is_ipv4_host(std::string_view host) {
  const auto parts = detail::split(host, '.');
  if (parts.size() == 4) {
    for (auto p : parts) {
      const auto v = ipv4_component(p);
      if (!v || *v > 255) return false;
    }
    return true;
  }
  // A single hex number such as 0xC0A80101.
  if (parts.size() == 1 && host.size() > 2 && host[0] == '0' && (host[1] == 'x' || host[1] == 'X')) {
    const auto v = ipv4_component(host);
    return v && *v <= 0xFFFFFFFFULL;
  }
  return false;
}

std::string UrlParts::normalized() const {
  std::string out = scheme + "://";
  if (!userinfo.empty()) out += userinfo + "@";
  out += host;
  if (port) out += ":" + std::to_string(*port);
  out += path;
  if (!query.empty()) out += "?" + query;
  if (!fragment.empty()) out += "#" + fragment;
  return out;
}

UrlParts parse_url(std::string_view raw) {
  UrlParts parts;
  parts.raw = std::string(raw);
  std::string_view rest = detail::trim(raw);
  if (rest.empty()) throw Error(Errc::MalformedUrl, "empty URL");

  if (const auto sep = rest.find("://"); sep != std::string_view::npos) {
    const auto scheme = rest.substr(0, sep);
    const bool valid = !scheme.empty() && std::isalpha(static_cast<unsigned char>(scheme[0])) &&
                       std::all_of(scheme.begin(), scheme.end(), is_scheme_char);
    if (!valid) throw Error(Errc::MalformedUrl, "invalid scheme in '" + parts.raw + "'");
    parts.scheme = detail::to_lower(scheme);
    rest.remove_prefix(sep + 3);
  } else {
    parts.scheme = "http";
  }

  const auto authority_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, authority_end);
  std::string_view tail = authority_end == std::string_view::npos ? std::string_view{}
                                                                   : rest.substr(authority_end);

  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    parts.userinfo = std::string(authority.substr(0, at));
    authority.remove_prefix(at + 1);
  }

  std::string_view host = authority;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) throw Error(Errc::MalformedUrl, "unterminated IPv6 host");
    host = authority.substr(0, close + 1);
    authority.remove_prefix(close + 1);
    if (!authority.empty() && authority.front() != ':') {
      throw Error(Errc::MalformedUrl, "junk after IPv6 host");
    }
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    authority.remove_prefix(colon);
  } else {
    authority = {};
  }
  if (!authority.empty() && authority.front() == ':') {
    const auto digits = authority.substr(1);
    if (!digits.empty()) {
      int port = 0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || port < 1 || port > 65535) {
        throw Error(Errc::MalformedUrl, "invalid port in '" + parts.raw + "'");
      }
      parts.port = port;
    }
  }

  while (!host.empty() && host.back() == '.') host.remove_suffix(1);
  if (host.empty()) throw Error(Errc::MalformedUrl, "no host in '" + parts.raw + "'");
  if (host.front() == '[') {
    const auto inner = host.substr(1, host.size() - 2);
    const bool ok = !inner.empty() && std::all_of(inner.begin(), inner.end(), [](char c) {
      return std::isxdigit(static_cast<unsigned char>(c)) || c == ':' || c == '.';
    });
    if (!ok) throw Error(Errc::MalformedUrl, "invalid IPv6 host in '" + parts.raw + "'");
  } else if (!std::all_of(host.begin(), host.end(), is_host_char) || host.front() == '.' ||
             host.find("..") != std::string_view::npos) {
    throw Error(Errc::MalformedUrl, "invalid host in '" + parts.raw + "'");
  }
  parts.host = detail::to_lower(host);

  if (const auto hash = tail.find('#'); hash != std::string_view::npos) {
    parts.fragment = std::string(tail.substr(hash + 1));
    tail = tail.substr(0, hash);
  }
  if (const auto q = tail.find('?'); q != std::string_view::npos) {
    parts.query = std::string(tail.substr(q + 1));
    tail = tail.substr(0, q);
  }
  parts.path = std::string(tail);
  return parts;
}

LexicalTables::LexicalTables(std::vector<std::string> public_suffixes,
                             std::vector<std::string> shorteners) {
  for (auto& s : public_suffixes) suffixes_.insert(detail::to_lower(s));
  for (auto& s : shorteners) shorteners_.insert(detail::to_lower(s));
}

LexicalTables LexicalTables::load(const std::filesystem::path& dir) {
  return LexicalTables(read_list_file(dir / "public_suffixes.txt"),
                       read_list_file(dir / "shorteners.txt"));
}

const LexicalTables& LexicalTables::bundled() {
  static const LexicalTables tables = load(data_dir());
  return tables;
}

bool LexicalTables::is_public_suffix(std::string_view s) const {
  return suffixes_.count(std::string(s)) > 0;
}

bool LexicalTables::is_shortener(std::string_view host) const {
  if (host.substr(0, 4) == "www.") host.remove_prefix(4);
  return shorteners_.count(std::string(host)) > 0;
}

std::vector<std::string> LexicalTables::shortener_hosts() const {
  std::vector<std::string> hosts(shorteners_.begin(), shorteners_.end());
  std::sort(hosts.begin(), hosts.end());
  return hosts;
}

std::string LexicalTables::public_suffix(std::string_view host) const {
  std::size_t start = 0;
  while (true) {
    const auto candidate = host.substr(start);
    if (is_public_suffix(candidate)) return std::string(candidate);
    const auto dot = host.find('.', start);
    if (dot == std::string_view::npos) return std::string(candidate);
    start = dot + 1;
  }
}

std::string LexicalTables::registrable_domain(std::string_view host) const {
  if (is_ipv4_host(host) || (!host.empty() && host.front() == '[')) return std::string(host);
  const auto suffix = public_suffix(host);
  if (suffix.size() >= host.size()) return std::string(host);
  const auto head = host.substr(0, host.size() - suffix.size() - 1);
  const auto dot = head.rfind('.');
  return std::string(dot == std::string_view::npos ? host : host.substr(dot + 1));
}

std::vector<std::string> LexicalTables::subdomain_labels(std::string_view host) const {
  if (host.substr(0, 4) == "www.") host.remove_prefix(4);
  const auto domain = registrable_domain(host);
  if (domain.size() >= host.size()) return {};
  const auto head = host.substr(0, host.size() - domain.size() - 1);
  std::vector<std::string> labels;
  for (auto label : detail::split(head, '.')) labels.emplace_back(label);
  return labels;
}

}  // namespace phishguard
