#include "infomae/run_dir.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <stdexcept>

namespace infomae {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t fnv1a_bytes(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("hash: cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (f) {
    f.read(buf, sizeof(buf));
    h = fnv1a_bytes(buf, static_cast<std::size_t>(f.gcount()), h);
  }
  return h;
}

std::uint64_t fnv1a_tree(const fs::path& path) {
  if (fs::is_regular_file(path)) return fnv1a_file(path);
  if (!fs::is_directory(path)) throw std::runtime_error("hash: no such input " + path.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& f : files) {
    const std::string rel = fs::relative(f, path).string();
    h = fnv1a_bytes(rel.data(), rel.size(), h);
    const std::uint64_t fh = fnv1a_file(f);
    h = fnv1a_bytes(&fh, sizeof(fh), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

RunDir RunDir::create(const fs::path& base, const std::string& run_base, const std::string& name,
                      const std::string& command, std::uint64_t seed) {
  RunDir rd;
  rd.path = base / run_base / name / (command + "-" + std::to_string(seed));
  fs::create_directories(rd.path);
  return rd;
}

void RunDir::write_config_echo(const std::string& echo_json) const {
  std::ofstream f(file("config.echo"));
  f << echo_json << "\n";
}

void RunDir::write_manifest(
    const std::string& command, const std::string& echo_json, std::uint64_t seed,
    const std::vector<std::pair<std::string, std::string>>& input_hashes) const {
  json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config_hash"] = hex64(fnv1a_bytes(echo_json.data(), echo_json.size()));
  json inputs = json::object();
  for (const auto& [k, v] : input_hashes) inputs[k] = v;
  m["input_hashes"] = inputs;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  m["timestamp_unix_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
  std::ofstream f(file("manifest.json"));
  f << m.dump(2) << "\n";
}

MetricsWriter::MetricsWriter(const fs::path& path) : out_(path) {
  if (!out_) throw std::runtime_error("metrics: cannot open " + path.string());
}

void MetricsWriter::write(const StepRecord& r) {
  json j;
  j["step"] = r.step;
  j["stage"] = r.stage;
  j["lr"] = r.lr;
  j["shared_info"] = r.loss.shared_info;
  j["private_info"] = r.loss.private_info;
  j["reconstruction"] = r.loss.reconstruction;
  j["augmentation"] = r.loss.augmentation;
  j["temporal"] = r.loss.temporal;
  j["weighted_shared"] = r.loss.weighted_shared;
  j["weighted_private"] = r.loss.weighted_private;
  j["weighted_reconstruction"] = r.loss.weighted_reconstruction;
  j["weighted_augmentation"] = r.loss.weighted_augmentation;
  j["weighted_temporal"] = r.loss.weighted_temporal;
  j["weighted_total"] = r.loss.weighted_total;
  json terms = json::object();
  for (const auto& [tag, value] : r.loss.info_terms) terms[tag] = value;
  j["terms"] = terms;
  out_ << j.dump() << "\n";
}

}  // namespace infomae
