#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace phishguard {

// Directory holding the bundled list files. PHISHGUARD_DATA_DIR overrides the
// location compiled into the build.
std::filesystem::path data_dir();

// Reads a one-entry-per-line file; blank lines and '#' comments are skipped
// and entries are trimmed.
std::vector<std::string> read_list_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace phishguard
