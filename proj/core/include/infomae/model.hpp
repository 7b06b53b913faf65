#pragma once

#include "infomae/autodiff.hpp"
#include "infomae/params.hpp"
#include "infomae/tensor.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace infomae {

struct ModelConfig {
  int patch_intervals = 2;
  int patch_spectrum = 2;
  int embed_dim = 32;
  int encoder_depth = 2;
  int decoder_depth = 2;
  int shared_dim = 4;   // d_u
  int private_dim = 4;  // d_v
  double mask_ratio = 0.75;

  int head_dim() const { return shared_dim + private_dim; }
  void validate(int intervals, int spectrum) const;
};

// Per-sample factorized representation. h is always the exact concatenation
// u || v with no renormalization in between.
struct RepBundle {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd h() const {
    Eigen::VectorXd out(u.size() + v.size());
    out << u, v;
    return out;
  }
};

// Flattened non-overlapping patches, interval-major / spectrum-minor, all
// channels of a cell stacked channel-major inside the patch vector.
struct PatchSequence {
  Eigen::MatrixXd patches;  // P x (C * p_i * p_s)
  int channels = 0, intervals = 0, spectrum = 0;
  int patch_intervals = 0, patch_spectrum = 0;
  int count() const { return static_cast<int>(patches.rows()); }
  int dim() const { return static_cast<int>(patches.cols()); }
};

PatchSequence patchify(const SpectrogramTensor& tensor, int patch_intervals, int patch_spectrum);
SpectrogramTensor unpatchify(const PatchSequence& patches);

// round-half-to-even mask count; indices uniform without replacement.
struct MaskSplit {
  std::vector<int> visible;  // ascending
  std::vector<int> masked;   // ascending
};
MaskSplit mask_indices(int num_patches, double ratio, std::uint64_t seed);
// Spec-shaped variant returning the visible subsequence plus the mask index set.
std::pair<PatchSequence, std::vector<int>> mask_patches(const PatchSequence& patches, double ratio,
                                                        std::uint64_t seed);

// Patch embedding + residual feed-forward encoder with mean pooling, two
// 2-layer MLP projection heads, and a token decoder fed by h with a learned
// mask token. All parameters are double precision autodiff leaves.
class ModalityModel {
 public:
  ModalityModel() = default;
  ModalityModel(int modality_id, int channels, int intervals, int spectrum,
                const ModelConfig& config, std::uint64_t seed);

  int modality_id() const { return modality_id_; }
  const ModelConfig& config() const { return config_; }
  int channels() const { return channels_; }
  int intervals() const { return intervals_; }
  int spectrum() const { return spectrum_; }
  int num_patches() const { return num_patches_; }
  int patch_dim() const { return patch_dim_; }
  int flat_dim() const { return channels_ * intervals_ * spectrum_; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  ParamSet& projector_params() { return projector_params_; }
  const ParamSet& projector_params() const { return projector_params_; }

  // Per-group trainability; frozen parameters neither update nor decay.
  void set_trainable(bool encoders, bool decoders, bool projectors);
  std::uint64_t content_hash() const;

  // Encoder/decoder plus projector parameters, in checkpoint order.
  std::vector<ad::Var> all_vars() const;

  struct Encoded {
    ad::Var pooled;  // B x embed_dim
    ad::Var u;       // B x shared_dim
    ad::Var v;       // B x private_dim
    ad::Var h;       // B x (shared+private)
  };

  // x is B x (C*I*S), one flattened sample per row; masks are per sample and
  // must all have the same visible count.
  Encoded encode(const ad::Var& x, const std::vector<MaskSplit>& masks) const;
  // Token decoder; returns (B*P) x patch_dim patch predictions.
  ad::Var decode(const ad::Var& h, const std::vector<MaskSplit>& masks) const;

  // Constant-input conveniences.
  ad::Var batch_to_var(const std::vector<const SpectrogramTensor*>& batch) const;
  Encoded encode_batch(const std::vector<const SpectrogramTensor*>& batch,
                       const std::vector<MaskSplit>& masks) const;

  // Patch-space targets for the reconstruction loss: (B*P) x patch_dim.
  ad::Matrix patch_targets(const std::vector<const SpectrogramTensor*>& batch) const;

 private:
  int modality_id_ = 0;
  int channels_ = 0, intervals_ = 0, spectrum_ = 0;
  int num_patches_ = 0, patch_dim_ = 0;
  ModelConfig config_;
  ParamSet params_;            // encoder + decoder
  ParamSet projector_params_;  // F_shared, F_private
  Eigen::MatrixXd positional_;  // P x embed_dim, fixed sinusoidal
  Eigen::MatrixXd positional_dec_;  // P x head_dim
};

// Spec-level single-sample operations.
RepBundle forward_modality(const ModalityModel& model, const PatchSequence& visible,
                           const std::vector<int>& visible_indices);
SpectrogramTensor reconstruct(const ModalityModel& model, const RepBundle& bundle,
                              const std::vector<int>& mask_index);

Eigen::MatrixXd sinusoidal_positions(int count, int dim);

}  // namespace infomae
