#include "manifest.hpp"

#include <array>
#include <cstdio>

#include <json.hpp>
#include <openssl/evp.h>

#include "dataloc/error.hpp"
#include "dataloc/text.hpp"

namespace dataloc::cli {

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::IoError, "sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    char buf[3];
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(text::read_file(path)); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "dataloc";
  j["version"] = tool_version;
  j["subcommand"] = subcommand;
  j["args"] = args;
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& [path, digest] : outputs) j["outputs"].push_back({{"path", path}, {"sha256", digest}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunManifest m;
    m.tool_version = j.at("version").get<std::string>();
    m.subcommand = j.at("subcommand").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    for (const auto& o : j.at("outputs")) {
      m.outputs.emplace_back(o.at("path").get<std::string>(), o.at("sha256").get<std::string>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad manifest: ") + e.what());
  }
}

}  // namespace dataloc::cli
