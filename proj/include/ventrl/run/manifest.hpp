#pragma once

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ventrl/core/format.hpp"

namespace ventrl::run {

inline std::map<std::string, std::string> read_kv_config(const std::string& path) {
  std::map<std::string, std::string> kv;
  for (const auto& raw_line : split(read_text_file(path), '\n')) {
    const std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key=value, got '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Every run writes a manifest: the subcommand, the fully resolved settings,
// and a content hash per input file. No timestamps, so identical runs write
// identical manifests.
inline void write_manifest(const std::string& out_dir, const std::string& command,
                           const std::map<std::string, std::string>& resolved,
                           const std::vector<std::string>& input_files) {
  std::ostringstream out;
  out << "command=" << command << "\n";
  for (const auto& [k, v] : resolved) out << k << "=" << v << "\n";
  for (const auto& f : input_files)
    out << "input " << std::filesystem::path(f).filename().string() << " "
        << to_hex(hash_file(f)) << "\n";
  write_text_file((std::filesystem::path(out_dir) / "manifest.txt").string(), out.str());
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace ventrl::run
