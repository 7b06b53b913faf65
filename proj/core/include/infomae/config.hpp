#pragma once

#include "infomae/evaluation.hpp"
#include "infomae/synthetic.hpp"
#include "infomae/training.hpp"

#include <string>
#include <vector>

namespace infomae {

// Union of world/model/train/hyper/eval settings with every default
// materialized; echo_json is the canonical self-describing form (schema
// version "1", unknown keys rejected at parse time).
struct ExperimentConfig {
  std::string run_name = "default";
  std::string run_base = "runs";
  std::string data_path = "dataset";
  std::uint64_t seed = 1;

  WorldConfig world;
  ModelConfig model;
  InfoHyper info;
  SslHyper ssl;
  DiscriminatorConfig disc;
  AugmentPolicy augment;
  ProbeConfig probe;

  int epochs_unimodal = 15;
  int epochs_align = 30;
  int batch_size = 64;
  int align_groups = 8;
  int train_sequence_length = 2;
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_fraction = 0.1;
  double disc_lr_multiplier = 1.0;
  int disc_steps_per_encoder_step = 1;
  bool freeze_encoders = false;
  bool debug_gradient_isolation = false;

  std::vector<std::string> unimodal_checkpoints;  // empty -> convention paths
  std::vector<std::string> eval_checkpoints;      // empty -> convention paths
  std::vector<double> sweep_ratios = {0.05, 0.15, 0.25, 0.50};
  std::vector<std::uint64_t> sweep_seeds = {1, 2, 3};
  std::vector<std::string> sweep_variants = {"full", "concat", "joint"};
  std::vector<std::string> ablate_variants = {"full", "noTemp", "noShared", "noPrivate", "noAug"};

  std::string echo_json;  // all defaults filled in, sorted keys

  TrainConfig train_config(Stage stage) const;
  SweepConfig sweep_config(bool ablation) const;
};

// Reads a JSON config file (empty path means all defaults), applies dotted
// key=value overrides, validates against the schema (unknown key, type
// mismatch, or constraint violation names the key), and materializes every
// default into the echo.
ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace infomae
