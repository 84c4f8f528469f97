#include "avgflow/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "avgflow/rng.hpp"

namespace avgflow {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string file_hash(const std::string& path) {
  const std::string bytes = read_text_file(path);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(path, file_hash(path));
}

void RunManifest::write(const std::string& dir) const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["stage"] = stage;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [path, hash] : inputs)
    j["inputs"][std::filesystem::path(path).filename().string()] = {
        {"path", path}, {"hash", hash}};
  j["outputs"] = outputs;
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/manifest.json", j.dump(1) + "\n");
}

}  // namespace avgflow
