#include "infomae/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>

namespace infomae {

using json = nlohmann::json;

namespace {
constexpr char kMagic[8] = {'I', 'N', 'F', 'O', 'M', 'A', 'E', '1'};
}

void Checkpoint::save(const std::string& path) const {
  json manifest;
  manifest["version"] = "1";
  manifest["stage"] = stage;
  manifest["config"] = config_json.empty() ? json::object() : json::parse(config_json);
  json plist = json::array();
  for (const auto& [name, m] : params)
    plist.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  manifest["params"] = plist;
  const std::string mtxt = manifest.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint save: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = mtxt.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(mtxt.data(), static_cast<std::streamsize>(mtxt.size()));
  for (const auto& [name, m] : params) {
    for (long r = 0; r < m.rows(); ++r)
      for (long c = 0; c < m.cols(); ++c) {
        const float v = static_cast<float>(m(r, c));
        f.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  if (!f) throw std::runtime_error("checkpoint save: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint load: bad magic in " + path);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string mtxt(len, '\0');
  f.read(mtxt.data(), static_cast<std::streamsize>(len));
  if (!f) throw std::runtime_error("checkpoint load: truncated manifest in " + path);
  json manifest = json::parse(mtxt);
  if (manifest.at("version").get<std::string>() != "1")
    throw std::runtime_error("checkpoint load: unsupported version");

  Checkpoint out;
  out.stage = manifest.at("stage").get<std::string>();
  out.config_json = manifest.at("config").dump();
  for (const auto& jp : manifest.at("params")) {
    const long rows = jp.at("rows").get<long>();
    const long cols = jp.at("cols").get<long>();
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) {
        float v;
        f.read(reinterpret_cast<char*>(&v), sizeof(v));
        m(r, c) = static_cast<double>(v);
      }
    if (!f) throw std::runtime_error("checkpoint load: truncated blob in " + path);
    out.params.emplace_back(jp.at("name").get<std::string>(), std::move(m));
  }
  return out;
}

const Eigen::MatrixXd& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, m] : params)
    if (n == name) return m;
  throw std::invalid_argument("checkpoint: missing parameter " + name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, m] : params)
    if (n == name) return true;
  return false;
}

}  // namespace infomae
