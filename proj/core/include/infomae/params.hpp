#pragma once

#include "infomae/autodiff.hpp"
#include "infomae/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace infomae {

// Ordered named parameter collection. Order is the checkpoint/optimizer
// order, so it must be construction-deterministic.
class ParamSet {
 public:
  ad::Var add(const std::string& name, ad::Matrix init) {
    items_.emplace_back(name, ad::Var::param(std::move(init)));
    return items_.back().second;
  }

  ad::Var get(const std::string& name) const {
    for (const auto& [n, v] : items_)
      if (n == name) return v;
    throw std::invalid_argument("ParamSet: unknown parameter " + name);
  }

  const std::vector<std::pair<std::string, ad::Var>>& items() const { return items_; }
  std::vector<ad::Var> vars() const {
    std::vector<ad::Var> out;
    out.reserve(items_.size());
    for (const auto& [n, v] : items_) out.push_back(v);
    return out;
  }

  void append_all(std::vector<ad::Var>& out) const {
    for (const auto& [n, v] : items_) out.push_back(v);
  }

  void set_frozen(bool frozen) {
    for (auto& [n, v] : items_) v.set_requires_grad(!frozen);
  }

  void zero_grad() {
    for (auto& [n, v] : items_) v.mutable_grad().setZero();
  }

  bool all_finite() const {
    for (const auto& [n, v] : items_)
      if (!v.value().allFinite()) return false;
    return true;
  }

  // FNV-1a over the raw parameter bytes; order-sensitive.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [n, v] : items_) {
      const auto* bytes = reinterpret_cast<const unsigned char*>(v.value().data());
      const std::size_t len = sizeof(double) * static_cast<std::size_t>(v.value().size());
      for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
      }
    }
    return h;
  }

 private:
  std::vector<std::pair<std::string, ad::Var>> items_;
};

// Dense init, normal entries scaled by 1/sqrt(fan_in).
inline ad::Matrix dense_init(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  ad::Matrix m(rows, cols);
  const double s = 1.0 / std::sqrt(static_cast<double>(rows));
  for (long c = 0; c < m.cols(); ++c)
    for (long r = 0; r < m.rows(); ++r) m(r, c) = gauss(rng) * s;
  return m;
}

}  // namespace infomae
