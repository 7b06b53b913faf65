#pragma once

#include "infomae/tensor.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace infomae {

// Linear-Gaussian multimodal world with known shared/private latent
// structure. Per sequence the latent follows z_t = rho*z_{t-1} +
// sqrt(1-rho^2)*eps_t; the first shared_dim coordinates are common to all
// modalities at a time index, the remaining private blocks are independent
// per modality. Observations are fixed random linear mixes plus noise.
struct WorldConfig {
  int num_modalities = 2;
  int shared_dim = 4;              // k
  int private_dim = 4;             // m
  std::vector<int> channels = {1, 1};
  int intervals = 8;               // I, common across modalities
  std::vector<int> spectrum = {8, 8};
  std::uint64_t mixing_seed = 7;
  double observation_noise_sigma = 0.1;
  double latent_walk_rho = 0.8;
  int num_sequences = 200;
  int sequence_length = 25;
  double pair_ratio = 0.05;
  int num_classes = 5;

  void validate() const;  // throws std::invalid_argument naming the field
  int tensor_dim(int modality) const;  // C_i * I * S_i
  int total_time_indices() const { return num_sequences * sequence_length; }
};

// ceil(pair_ratio * num_sequences * sequence_length), the generator's rule.
int num_paired_indices(const WorldConfig& config);

// Label = uniform quantization of the angle of the first two shared
// coordinates (second coordinate read as 0 when shared_dim == 1).
int label_of(const Eigen::VectorXd& shared_latent, int num_classes);

namespace detail {
struct PairFieldAccess;
}

class SampleRecord {
 public:
  int modality_id = 0;
  SpectrogramTensor tensor;
  int sequence_id = 0;
  int position_in_sequence = 0;
  int class_label = 0;
  Eigen::VectorXd true_shared_latent;  // held out of training; tests only

  // Pairing accessors count reads so stage isolation can be asserted.
  bool has_pair() const;
  int pair_id() const;  // throws if the sample is not in the synchronized set

 private:
  friend struct detail::PairFieldAccess;
  int pair_id_ = -1;
  std::shared_ptr<std::atomic<std::uint64_t>> pair_reads_;
};

struct SequenceBatch {
  // groups[b][l]: L consecutive samples of one sequence, one modality
  std::vector<std::vector<SampleRecord>> groups;
};

struct PairedBatch {
  // tuples[b][m]: all modalities of one pair_id
  std::vector<std::vector<SampleRecord>> tuples;
};

struct PairedSequenceBatch {
  // groups[b][l][m]: L consecutive-in-paired-order tuples of one sequence
  std::vector<std::vector<std::vector<SampleRecord>>> groups;
};

class SyntheticDataset {
 public:
  WorldConfig config;
  std::uint64_t seed = 0;

  // records[m][t] with t = sequence_id * sequence_length + position
  std::vector<std::vector<SampleRecord>> records;
  std::vector<int> paired_time_indices;  // pair_id p lives at time index [p]

  int num_pairs() const { return static_cast<int>(paired_time_indices.size()); }
  int num_records(int modality) const { return static_cast<int>(records.at(modality).size()); }
  std::uint64_t pair_id_reads() const { return pair_reads_ ? pair_reads_->load() : 0; }

  const SampleRecord& record(int modality, int time_index) const;

 private:
  friend struct detail::PairFieldAccess;
  std::shared_ptr<std::atomic<std::uint64_t>> pair_reads_;
};

SyntheticDataset generate_world(const WorldConfig& config, std::uint64_t seed);

// Re-draws the pairing mask only; latents, observations and labels are
// untouched, so pair-ratio sweeps reuse stage-1 checkpoints per seed.
void reassign_pairing(SyntheticDataset& dataset, double pair_ratio);

SequenceBatch sample_sequence_batch(const SyntheticDataset& dataset, int modality_id, int batch,
                                    int length, std::uint64_t seed);
PairedBatch sample_paired_batch(const SyntheticDataset& dataset, int batch, std::uint64_t seed);
// Shuffled partition of every pair into batches (last batch may be short).
std::vector<PairedBatch> paired_epoch(const SyntheticDataset& dataset, int batch, std::uint64_t seed);
PairedSequenceBatch sample_paired_sequence_batch(const SyntheticDataset& dataset, int batch,
                                                 int length, std::uint64_t seed);

enum class AugmentKind {
  AmplitudeScale,        // a..b multiplicative range
  AdditiveGaussianNoise, // a = sigma
  TimeIntervalMask,      // a = max fraction of intervals zeroed
  FrequencyBandMask,     // a = max fraction of spectrum bins zeroed
  IntervalShift,         // a = max circular offset (intervals)
};

struct AugmentTransform {
  AugmentKind kind;
  double prob = 1.0;
  double a = 0.0;
  double b = 0.0;
};

struct AugmentPolicy {
  std::vector<AugmentTransform> transforms;
  void validate() const;
  static AugmentPolicy default_policy();
};

SpectrogramTensor augment(const SampleRecord& record, const AugmentPolicy& policy,
                          std::uint64_t seed);

// Directory export/import: meta.json + per-modality f32 tensor and int64
// index files (offset, sequence_id, position, pair_id|-1, label), plus the
// ground-truth shared latents for evaluation oracles.
void export_dataset(const SyntheticDataset& dataset, const std::string& dir);
SyntheticDataset import_dataset(const std::string& dir);

}  // namespace infomae
