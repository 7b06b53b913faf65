#pragma once

#include "infomae/checkpoint.hpp"
#include "infomae/info_objectives.hpp"
#include "infomae/model.hpp"
#include "infomae/optimizer.hpp"
#include "infomae/ssl_objectives.hpp"
#include "infomae/synthetic.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace infomae {

enum class Stage { Unimodal, Align, Joint };
std::string stage_name(Stage stage);

struct TrainConfig {
  Stage stage = Stage::Unimodal;
  int epochs = 15;
  int batch_size = 64;     // stage-1 samples per step
  int align_groups = 8;    // B sequence groups per alignment step
  int sequence_length = 2; // L
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_fraction = 0.1;
  double disc_lr_multiplier = 1.0;
  int disc_steps_per_encoder_step = 1;
  std::uint64_t seed = 1;
  InfoHyper info;
  SslHyper ssl;
  DiscriminatorConfig disc;
  ModelConfig model;
  AugmentPolicy augment_policy = AugmentPolicy::default_policy();
  bool freeze_encoders = false;
  bool debug_gradient_isolation = false;
  void validate() const;
};

struct StepRecord {
  int step = 0;
  std::string stage;
  double lr = 0.0;
  LossBreakdown loss;
};
using MetricsSink = std::function<void(const StepRecord&)>;

// Checkpoint packing. Unimodal checkpoints hold encoder/decoder parameters
// only (projectors are born in stage 2); aligned/joint checkpoints hold
// everything for every modality under an "m<i>/" prefix.
Checkpoint make_unimodal_checkpoint(const ModalityModel& model);
Checkpoint make_multimodal_checkpoint(const std::vector<ModalityModel>& models,
                                      const std::string& stage);
std::vector<ModalityModel> models_from_checkpoint(const Checkpoint& ckpt,
                                                  std::uint64_t fresh_projector_seed);

struct UnimodalResult {
  std::vector<Checkpoint> checkpoints;                 // one per modality
  std::vector<std::vector<double>> epoch_mean_loss;    // [modality][epoch]
};

// Stage 1: each modality trained independently on its unimodal pool with
// masked reconstruction; never touches pairing information.
UnimodalResult pretrain_unimodal(const SyntheticDataset& dataset, const TrainConfig& config,
                                 const MetricsSink& sink = {});

// Stage 2 trainer exposing a per-step interface. Phase A updates the
// discriminators on joint-vs-product batches, phase B freezes them and
// updates encoders/decoders/projectors on the total alignment objective.
class AlignTrainer {
 public:
  AlignTrainer(const SyntheticDataset& dataset, const TrainConfig& config,
               const std::vector<Checkpoint>* unimodal_checkpoints);

  int steps_per_epoch() const { return steps_per_epoch_; }
  int total_steps() const { return total_steps_; }
  int step_index() const { return step_; }

  StepRecord training_step();  // samples the step's paired sequence batch
  StepRecord training_step_on(const PairedSequenceBatch& batch);

  std::vector<ModalityModel>& models() { return models_; }
  const std::vector<ModalityModel>& models() const { return models_; }
  DiscriminatorSet& discriminators() { return discs_; }

  Checkpoint checkpoint() const;
  std::uint64_t models_hash() const;
  std::uint64_t disc_hash() const;

  // Batch-mean shared-representation distance d(U1,U2) on given tuples,
  // full-visibility forward, no training side effects.
  double mean_pair_distance(const std::vector<std::vector<const SampleRecord*>>& tuples);

 private:
  void phase_a(const std::vector<ad::Var>& x, const std::vector<std::vector<MaskSplit>>& masks,
               int rep);
  StepRecord phase_b(const PairedSequenceBatch& batch, const std::vector<ad::Var>& x,
                     const std::vector<std::vector<MaskSplit>>& masks);

  const SyntheticDataset& dataset_;
  TrainConfig config_;
  std::string stage_tag_;
  std::vector<ModalityModel> models_;
  DiscriminatorSet discs_;
  AdamW model_opt_;
  std::vector<AdamW> disc_opts_;
  std::vector<bool> disc_active_;
  int steps_per_epoch_ = 0;
  int total_steps_ = 0;
  int step_ = 0;
};

struct AlignResult {
  Checkpoint checkpoint;
};

AlignResult align_crossmodal(const SyntheticDataset& dataset, const TrainConfig& config,
                             const std::vector<Checkpoint>& unimodal_checkpoints,
                             const MetricsSink& sink = {});
AlignResult joint_pretrain(const SyntheticDataset& dataset, const TrainConfig& config,
                           const MetricsSink& sink = {});

// Stage-2 baseline: symmetric cross-modal InfoNCE on h over paired samples,
// no discriminators, no reconstruction.
AlignResult cmc_align(const SyntheticDataset& dataset, const TrainConfig& config,
                      const std::vector<Checkpoint>& unimodal_checkpoints,
                      const MetricsSink& sink = {});

}  // namespace infomae
