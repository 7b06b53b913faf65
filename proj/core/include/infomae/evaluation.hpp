#pragma once

#include "infomae/checkpoint.hpp"
#include "infomae/synthetic.hpp"
#include "infomae/training.hpp"

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

namespace infomae {

struct Metrics {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<double> precision, recall;    // per class, 0/0 = 0
};

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                        int num_classes);

struct ProbeResult {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<double> precision, recall;
  std::vector<std::vector<int>> confusion;
  int n_eval = 0;
  std::uint64_t seed = 0;
  std::string variant;
};

struct ProbeConfig {
  int steps = 300;
  double lr = 0.5;
  double momentum = 0.9;
  int max_train = 2000;
  int max_eval = 2000;
  int finetune_epochs = 3;
  int finetune_batch = 64;
  double finetune_head_lr = 0.01;
};

// Labeled evaluation tuples live at time indices outside the synchronized
// set, so probing data is disjoint from alignment pairs by construction; the
// split asserts the disjointness anyway.
struct EvalSplit {
  std::vector<int> train_time_indices;
  std::vector<int> eval_time_indices;
};
EvalSplit make_eval_split(const SyntheticDataset& dataset, int max_train, int max_eval,
                          std::uint64_t seed);

// Frozen feature extraction: h per modality for aligned/joint checkpoints,
// pooled encoder embedding for stage-1 checkpoints (no projectors exist
// there), concatenated across the selected modalities.
struct FeatureExtractor {
  std::vector<ModalityModel> models;
  std::string stage;
  static FeatureExtractor from_checkpoints(const std::vector<Checkpoint>& checkpoints,
                                           std::uint64_t seed);
  Eigen::MatrixXd features(const SyntheticDataset& dataset, const std::vector<int>& time_indices,
                           const std::vector<int>& modalities) const;
  std::vector<int> all_modalities() const;
};

// Multinomial logistic probe on fixed features: full-batch gradient descent
// with momentum to a fixed step budget, features standardized by train-split
// statistics.
ProbeResult probe_features(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                           const Eigen::MatrixXd& eval_x, const std::vector<int>& eval_y,
                           int num_classes, const ProbeConfig& config, std::uint64_t seed,
                           const std::string& variant_tag);

ProbeResult linear_probe(const std::vector<Checkpoint>& checkpoints,
                         const SyntheticDataset& dataset, const EvalSplit& split,
                         const ProbeConfig& config, std::uint64_t seed,
                         const std::vector<int>& modalities = {});

// As linear_probe, then joint finetuning with the encoder learning rate 10x
// smaller than the head's. Zero finetune epochs reduces to linear_probe.
ProbeResult finetune_eval(const std::vector<Checkpoint>& checkpoints,
                          const SyntheticDataset& dataset, const EvalSplit& split,
                          const ProbeConfig& config, std::uint64_t seed,
                          const std::vector<int>& modalities = {});

enum class Variant { Full, NoTemp, NoShared, NoPrivate, NoAug, Concat, Joint, Cmc };
std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
const std::vector<Variant>& all_variants();

// Weight surgery for the ablations; Concat/Joint/Cmc switch pipelines.
TrainConfig apply_variant(Variant v, TrainConfig align_config);

struct VariantOutput {
  std::vector<Checkpoint> checkpoints;  // single multimodal or per-modality stage-1
};
VariantOutput run_variant(Variant v, const SyntheticDataset& dataset,
                          const TrainConfig& align_config,
                          const std::vector<Checkpoint>& stage1, const MetricsSink& sink = {});

struct SweepCell {
  double ratio = 0;
  std::string variant;
  std::uint64_t seed = 0;
  double accuracy = 0;
  double macro_f1 = 0;
};

struct SweepConfig {
  WorldConfig world;
  TrainConfig stage1;
  TrainConfig align;
  ProbeConfig probe;
  std::vector<double> ratios;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
};

// For each (seed, ratio, variant): rebuild the pairing on the seed's world,
// run the variant end to end (stage-1 checkpoints are shared within a seed),
// linear-probe, and emit one cell.
std::vector<SweepCell> pair_ratio_sweep(const SweepConfig& config,
                                        const std::function<void(const SweepCell&)>& on_cell = {});

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b);
double median(std::vector<double> values);

}  // namespace infomae
