#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace infomae {

// One modality window in time-frequency form, shape channels x intervals x
// spectrum. Values are stored as doubles but the generator and augmentations
// quantize to float32 so in-memory data matches the on-disk export exactly.
class SpectrogramTensor {
 public:
  SpectrogramTensor() = default;
  SpectrogramTensor(int channels, int intervals, int spectrum)
      : c_(channels), i_(intervals), s_(spectrum),
        data_(static_cast<size_t>(channels) * intervals * spectrum, 0.0) {
    if (channels < 1 || intervals < 1 || spectrum < 1)
      throw std::invalid_argument("SpectrogramTensor: dimensions must be >= 1");
  }

  int channels() const { return c_; }
  int intervals() const { return i_; }
  int spectrum() const { return s_; }
  std::size_t size() const { return data_.size(); }

  double& at(int c, int i, int s) { return data_[index(c, i, s)]; }
  double at(int c, int i, int s) const { return data_[index(c, i, s)]; }

  const std::vector<double>& flat() const { return data_; }
  std::vector<double>& flat() { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Rounds every entry through float32; keeps memory and export identical.
  void quantize_f32() {
    for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
  }

  bool same_shape(const SpectrogramTensor& o) const {
    return c_ == o.c_ && i_ == o.i_ && s_ == o.s_;
  }

 private:
  std::size_t index(int c, int i, int s) const {
    return (static_cast<size_t>(c) * i_ + i) * s_ + s;
  }

  int c_ = 0, i_ = 0, s_ = 0;
  std::vector<double> data_;
};

}  // namespace infomae
