#ifndef AVGFLOW_MANIFEST_HPP
#define AVGFLOW_MANIFEST_HPP

#include <string>
#include <vector>

#include <json.hpp>

namespace avgflow {

// FNV-1a 64 over file bytes, hex encoded; reproducibility bookkeeping for run
// manifests (not a cryptographic digest).
std::string file_hash(const std::string& path);

// Every pipeline stage writes a manifest.json capturing the command, seed,
// configuration, and input hashes so the run directory is self-describing.
struct RunManifest {
  std::string stage;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<std::pair<std::string, std::string>> inputs;   // (path, hash)
  std::vector<std::string> outputs;

  void add_input(const std::string& path);
  void write(const std::string& dir) const;
};

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace avgflow

#endif
