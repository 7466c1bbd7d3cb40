#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dataloc::cli {

/// Everything needed to reproduce one CLI run: the exact argument vector
/// plus digests of every file it wrote.
struct RunManifest {
  std::string tool_version;
  std::string subcommand;
  std::vector<std::string> args;  // argv without the program name
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256 hex

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace dataloc::cli
