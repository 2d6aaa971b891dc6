#include "phishguard/data_files.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "phishguard/error.hpp"
#include "phishguard/detail/text.hpp"

#ifndef PHISHGUARD_BUNDLED_DATA_DIR
#define PHISHGUARD_BUNDLED_DATA_DIR "data"
#endif

namespace phishguard {

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("PHISHGUARD_DATA_DIR"); env && *env) {
    return env;
  }
  return PHISHGUARD_BUNDLED_DATA_DIR;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::vector<std::string> read_list_file(const std::filesystem::path& path) {
  std::vector<std::string> entries;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto entry = detail::trim(line);
    if (!entry.empty()) entries.emplace_back(entry);
  }
  return entries;
}

}  // namespace phishguard
