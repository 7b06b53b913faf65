#pragma once

#include "infomae/autodiff.hpp"
#include "infomae/params.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace infomae {

struct InfoHyper {
  double alpha = 1.0;
  double beta = 0.5;
  double gamma = 0.1;
  double epsilon = 0.1;
  // Coefficient on the conditional-MI expectation group of the shared loss.
  // 1.0 reproduces the full objective; 0 switches the group (and its
  // discriminators) off for the noShared ablation.
  double shared_cmi_weight = 1.0;
  void validate() const;
};

enum class ArgKind { Tensor, Vector };

struct ArgSpec {
  ArgKind kind = ArgKind::Vector;
  int channels = 0, intervals = 0, spectrum = 0;  // Tensor args
  int dim = 0;                                    // Vector args
  int flat_dim() const {
    return kind == ArgKind::Tensor ? channels * intervals * spectrum : dim;
  }
  static ArgSpec tensor(int c, int i, int s) { return {ArgKind::Tensor, c, i, s, 0}; }
  static ArgSpec vector(int d) { return {ArgKind::Vector, 0, 0, 0, d}; }
};

struct DiscriminatorConfig {
  int conv_patch_intervals = 2;
  int conv_patch_spectrum = 2;
  int conv_channels = 16;
  int embed_dim = 16;
  int mlp_hidden = 32;
  double clamp = 1e-6;  // output kept in [clamp, 1-clamp] before log-ratios
};

// Density-ratio estimator: tensor inputs go through a small strided
// convolution block to a flat embedding, representation vectors pass through
// directly, and a 5-layer fully connected scorer emits a probability.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::string term_tag, std::vector<ArgSpec> args, const DiscriminatorConfig& config,
                std::uint64_t seed);

  const std::string& term_tag() const { return tag_; }
  const std::vector<ArgSpec>& arg_specs() const { return args_; }
  int shuffle_slot() const { return shuffle_slot_; }
  double clamp() const { return config_.clamp; }

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // One Var per argument slot, each B x flat_dim of its spec. Returns Bx1
  // probabilities strictly inside (0,1) (pre-clamp sigmoid output).
  ad::Var probability(const std::vector<ad::Var>& args) const;

 private:
  std::string tag_;
  std::vector<ArgSpec> args_;
  DiscriminatorConfig config_;
  int shuffle_slot_ = 1;
  ParamSet params_;
};

// log(p/(1-p)) with p clamped into [clamp, 1-clamp]; Bx1.
ad::Var log_density_ratio(const Discriminator& disc, const std::vector<ad::Var>& inputs);

// mean(-log p) over the joint batch plus mean(-log(1-p)) over the product
// batch, with the same clamp.
ad::Var discriminator_loss(const Discriminator& disc, const std::vector<ad::Var>& joint_batch,
                           const std::vector<ad::Var>& product_batch);

// Uniform cyclic permutation (Sattolo); every element moves.
std::vector<int> sattolo_permutation(int n, std::mt19937_64& rng);

// Product-of-marginals batch: for each slot listed in shuffle_slots the rows
// of that slot are permuted by an independent derangement-biased shuffle, so
// no tuple keeps all of its original components. B >= 2 required.
std::vector<ad::Matrix> build_product_batch(const std::vector<ad::Matrix>& slots,
                                            const std::vector<int>& shuffle_slots,
                                            std::uint64_t seed);

// The ten density-ratio estimators of the two-modality objective.
class DiscriminatorSet {
 public:
  DiscriminatorSet() = default;
  static DiscriminatorSet build(const ArgSpec& x1, const ArgSpec& x2, int shared_dim,
                                int private_dim, const DiscriminatorConfig& config,
                                std::uint64_t seed);

  Discriminator& by_tag(const std::string& tag);
  const Discriminator& by_tag(const std::string& tag) const;
  std::vector<Discriminator>& all() { return discs_; }
  const std::vector<Discriminator>& all() const { return discs_; }

  std::vector<ad::Var> all_vars() const;
  void set_frozen(bool frozen);
  std::uint64_t content_hash() const;

  // Tag helpers; i is the modality index 1 or 2.
  static std::string joint3_tag(int i);
  static std::string self_tag(int i);
  static std::string cross_tag(int i);
  static std::string priv_self_tag(int i);
  static std::string priv_shared_tag(int i);

 private:
  std::vector<Discriminator> discs_;
};

struct InfoLossResult {
  ad::Var total;
  std::vector<std::pair<std::string, double>> breakdown;  // unweighted term values
};

// Shared loss, Appendix-A-consistent reduction of Eq. (4):
//   alpha * mean ||u1-u2||^2
//   + w_cmi * sum_i [ E J3_i - (1-beta) E SELF_i - E CROSS_i ]
// Expectations are batch means of log_density_ratio on joint tuples, with
// discriminators expected to be frozen by the caller during encoder updates.
InfoLossResult shared_info_loss(const ad::Var& u1, const ad::Var& u2, const ad::Var& x1,
                                const ad::Var& x2, const DiscriminatorSet& discs,
                                const InfoHyper& hyper);

// Private loss Eq. (7): gamma*(E PRIV_SELF_1 + E PRIV_SELF_2) +
// epsilon*(E PRIV_SHARED_1 + E PRIV_SHARED_2).
InfoLossResult private_info_loss(const ad::Var& v1, const ad::Var& v2, const ad::Var& u1,
                                 const ad::Var& u2, const ad::Var& x1, const ad::Var& x2,
                                 const DiscriminatorSet& discs, const InfoHyper& hyper);

}  // namespace infomae
