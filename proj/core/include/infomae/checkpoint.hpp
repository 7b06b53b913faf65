#pragma once

#include <Eigen/Core>

#include <string>
#include <utility>
#include <vector>

namespace infomae {

// Single binary container: 8-byte magic, u64 manifest length, JSON manifest
// (version "1", stage tag, config echo, parameter names/shapes), then f32
// little-endian row-major parameter blobs in manifest order.
struct Checkpoint {
  std::string stage;        // "unimodal" | "aligned" | "joint"
  std::string config_json;  // opaque echo of the builder's config
  std::vector<std::pair<std::string, Eigen::MatrixXd>> params;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  const Eigen::MatrixXd& get(const std::string& name) const;
  bool has(const std::string& name) const;
};

}  // namespace infomae
