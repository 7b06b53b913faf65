#pragma once

#include "infomae/training.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace infomae {

std::uint64_t fnv1a_bytes(const void* data, std::size_t len,
                          std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::uint64_t fnv1a_tree(const std::filesystem::path& path);  // file or directory
std::string hex64(std::uint64_t v);

// runs/<name>/<command>-<seed>/ with the fixed artifact filenames
// (config.echo, manifest.json, metrics.ndjson, results.tsv, report.svg).
struct RunDir {
  std::filesystem::path path;
  static RunDir create(const std::filesystem::path& base, const std::string& run_base,
                       const std::string& name, const std::string& command, std::uint64_t seed);
  std::filesystem::path file(const std::string& name) const { return path / name; }
  void write_config_echo(const std::string& echo_json) const;
  void write_manifest(const std::string& command, const std::string& echo_json,
                      std::uint64_t seed,
                      const std::vector<std::pair<std::string, std::string>>& input_hashes) const;
};

// Newline-delimited UTF-8 metric records, one per training step.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const StepRecord& record);

 private:
  std::ofstream out_;
};

}  // namespace infomae
