#include "infomae/training.hpp"

#include "infomae/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace infomae {

using json = nlohmann::json;

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::Unimodal: return "unimodal";
    case Stage::Align: return "aligned";
    case Stage::Joint: return "joint";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (align_groups < 1) throw std::invalid_argument("TrainConfig: align_groups must be >= 1");
  if (sequence_length < 1) throw std::invalid_argument("TrainConfig: sequence_length must be >= 1");
  if (base_lr < 0) throw std::invalid_argument("TrainConfig: base_lr must be >= 0");
  if (weight_decay < 0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw std::invalid_argument("TrainConfig: warmup_fraction in [0,1]");
  if (disc_lr_multiplier < 0) throw std::invalid_argument("TrainConfig: disc_lr_multiplier >= 0");
  if (disc_steps_per_encoder_step < 1)
    throw std::invalid_argument("TrainConfig: disc_steps_per_encoder_step must be >= 1");
  info.validate();
  ssl.validate();
  augment_policy.validate();
  if (stage != Stage::Unimodal) {
    const bool pairwise_terms =
        ssl.lambda > 0 || info.shared_cmi_weight > 0 || info.gamma > 0 || info.epsilon > 0;
    if (pairwise_terms && align_groups * sequence_length < 2)
      throw std::invalid_argument(
          "TrainConfig: effective batch must be >= 2 while contrastive or discriminator terms "
          "are active");
    if (ssl.eta > 0 && align_groups < 2)
      throw std::invalid_argument(
          "TrainConfig: align_groups must be >= 2 while the temporal term is active");
  }
}

namespace {

json shapes_json(const ModalityModel& m) {
  return {{"id", m.modality_id()},
          {"channels", m.channels()},
          {"intervals", m.intervals()},
          {"spectrum", m.spectrum()}};
}

json model_config_json(const ModelConfig& c) {
  return {{"patch_intervals", c.patch_intervals}, {"patch_spectrum", c.patch_spectrum},
          {"embed_dim", c.embed_dim},             {"encoder_depth", c.encoder_depth},
          {"decoder_depth", c.decoder_depth},     {"shared_dim", c.shared_dim},
          {"private_dim", c.private_dim},         {"mask_ratio", c.mask_ratio}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.patch_intervals = j.at("patch_intervals").get<int>();
  c.patch_spectrum = j.at("patch_spectrum").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_depth = j.at("encoder_depth").get<int>();
  c.decoder_depth = j.at("decoder_depth").get<int>();
  c.shared_dim = j.at("shared_dim").get<int>();
  c.private_dim = j.at("private_dim").get<int>();
  c.mask_ratio = j.at("mask_ratio").get<double>();
  return c;
}

void append_params(Checkpoint& ckpt, const std::string& prefix, const ParamSet& set) {
  for (const auto& [name, var] : set.items())
    ckpt.params.emplace_back(prefix + name, var.value());
}

}  // namespace

Checkpoint make_unimodal_checkpoint(const ModalityModel& model) {
  Checkpoint ckpt;
  ckpt.stage = "unimodal";
  json cfg;
  cfg["model"] = model_config_json(model.config());
  cfg["modalities"] = json::array({shapes_json(model)});
  ckpt.config_json = cfg.dump();
  append_params(ckpt, "m" + std::to_string(model.modality_id()) + "/", model.params());
  return ckpt;
}

Checkpoint make_multimodal_checkpoint(const std::vector<ModalityModel>& models,
                                      const std::string& stage) {
  Checkpoint ckpt;
  ckpt.stage = stage;
  json cfg;
  cfg["model"] = model_config_json(models.front().config());
  json mods = json::array();
  for (const auto& m : models) mods.push_back(shapes_json(m));
  cfg["modalities"] = mods;
  ckpt.config_json = cfg.dump();
  for (const auto& m : models) {
    const std::string p = "m" + std::to_string(m.modality_id()) + "/";
    append_params(ckpt, p, m.params());
    append_params(ckpt, p, m.projector_params());
  }
  return ckpt;
}

std::vector<ModalityModel> models_from_checkpoint(const Checkpoint& ckpt,
                                                  std::uint64_t fresh_projector_seed) {
  json cfg = json::parse(ckpt.config_json);
  ModelConfig mc = model_config_from_json(cfg.at("model"));
  std::vector<ModalityModel> out;
  for (const auto& jm : cfg.at("modalities")) {
    const int id = jm.at("id").get<int>();
    ModalityModel model(id, jm.at("channels").get<int>(), jm.at("intervals").get<int>(),
                        jm.at("spectrum").get<int>(), mc,
                        derive_seed(fresh_projector_seed, "ckpt_model", id));
    const std::string prefix = "m" + std::to_string(id) + "/";
    for (const auto& [name, var] : model.params().items()) {
      const Eigen::MatrixXd& stored = ckpt.get(prefix + name);
      if (stored.rows() != var.value().rows() || stored.cols() != var.value().cols())
        throw std::runtime_error("checkpoint: shape mismatch for " + prefix + name);
      ad::Var v = var;
      v.mutable_value() = stored;
    }
    if (ckpt.stage != "unimodal") {
      for (const auto& [name, var] : model.projector_params().items()) {
        const Eigen::MatrixXd& stored = ckpt.get(prefix + name);
        ad::Var v = var;
        v.mutable_value() = stored;
      }
    }
    out.push_back(std::move(model));
  }
  return out;
}

namespace {

LossBreakdown recon_only_breakdown(double raw) {
  LossBreakdown b;
  b.reconstruction = raw;
  b.weighted_reconstruction = raw;
  b.weighted_total = raw;
  return b;
}

}  // namespace

UnimodalResult pretrain_unimodal(const SyntheticDataset& dataset, const TrainConfig& config,
                                 const MetricsSink& sink) {
  config.validate();
  if (config.stage != Stage::Unimodal)
    throw std::invalid_argument("pretrain_unimodal: config stage must be unimodal");
  const auto& wc = dataset.config;
  if (static_cast<int>(dataset.records.size()) != wc.num_modalities)
    throw std::invalid_argument("pretrain_unimodal: dataset is missing a modality pool");

  UnimodalResult result;
  for (int mi = 0; mi < wc.num_modalities; ++mi) {
    if (dataset.records[mi].empty())
      throw std::invalid_argument("pretrain_unimodal: modality " + std::to_string(mi) +
                                  " has no samples");
    ModalityModel model(mi, wc.channels[mi], wc.intervals, wc.spectrum[mi], config.model,
                        derive_seed(config.seed, "stage1_model", mi));
    AdamWConfig oc;
    oc.weight_decay = config.weight_decay;
    AdamW opt(model.all_vars(), oc);

    const int n = dataset.num_records(mi);
    const int bs = std::min(config.batch_size, n);
    const int steps_per_epoch = std::max(1, n / bs);
    const int total_steps = config.epochs * steps_per_epoch;
    std::vector<double> epoch_losses;

    int step = 0;
    for (int ep = 0; ep < config.epochs; ++ep) {
      auto rng = make_rng(config.seed, "stage1_epoch",
                          static_cast<std::uint64_t>(mi) * 1000000 + ep);
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);

      double epoch_sum = 0.0;
      for (int s = 0; s < steps_per_epoch; ++s, ++step) {
        std::vector<const SpectrogramTensor*> batch;
        batch.reserve(bs);
        std::vector<MaskSplit> masks;
        masks.reserve(bs);
        for (int b = 0; b < bs; ++b) {
          batch.push_back(&dataset.records[mi][order[s * bs + b]].tensor);
          masks.push_back(mask_indices(
              model.num_patches(), config.model.mask_ratio,
              derive_seed(config.seed, "stage1_mask",
                          (static_cast<std::uint64_t>(mi) * total_steps + step) * 4096 + b)));
        }
        auto enc = model.encode_batch(batch, masks);
        ad::Var pred = model.decode(enc.h, masks);
        ad::Var loss = masked_reconstruction_loss(pred, model.patch_targets(batch), masks,
                                                  model.num_patches(), 1.0);
        ad::backward(loss);
        const double lr = cosine_warmup_lr(config.base_lr, config.warmup_fraction,
                                           std::max(1, total_steps), step);
        opt.step(lr);
        epoch_sum += loss.item();
        if (sink) sink({step, "unimodal", lr, recon_only_breakdown(loss.item())});
      }
      epoch_losses.push_back(epoch_sum / steps_per_epoch);
    }
    result.epoch_mean_loss.push_back(std::move(epoch_losses));
    result.checkpoints.push_back(make_unimodal_checkpoint(model));
  }
  return result;
}

AlignTrainer::AlignTrainer(const SyntheticDataset& dataset, const TrainConfig& config,
                           const std::vector<Checkpoint>* unimodal_checkpoints)
    : dataset_(dataset), config_(config) {
  config_.validate();
  if (config_.stage == Stage::Unimodal)
    throw std::invalid_argument("AlignTrainer: stage must be align or joint");
  stage_tag_ = stage_name(config_.stage);
  const auto& wc = dataset.config;
  if (wc.num_modalities != 2)
    throw std::invalid_argument("AlignTrainer: the information objective is specified for "
                                "exactly two modalities");
  if (dataset.num_pairs() == 0)
    throw std::invalid_argument("AlignTrainer: paired subset is empty");
  const int need = config_.align_groups * config_.sequence_length;
  if (dataset.num_pairs() < need)
    throw std::invalid_argument(
        "AlignTrainer: pair count " + std::to_string(dataset.num_pairs()) +
        " is smaller than the per-step batch " + std::to_string(need) +
        "; reduce align_groups or sequence_length");

  if (config_.stage == Stage::Align) {
    if (!unimodal_checkpoints || static_cast<int>(unimodal_checkpoints->size()) != wc.num_modalities)
      throw std::invalid_argument("AlignTrainer: one unimodal checkpoint per modality required");
    std::vector<ModalityModel> loaded;
    for (const auto& ckpt : *unimodal_checkpoints) {
      if (ckpt.stage != "unimodal")
        throw std::invalid_argument("AlignTrainer: input checkpoint stage tag must be "
                                    "'unimodal', got '" + ckpt.stage + "'");
      auto ms = models_from_checkpoint(ckpt, derive_seed(config_.seed, "stage2_proj"));
      for (auto& m : ms) loaded.push_back(std::move(m));
    }
    std::sort(loaded.begin(), loaded.end(),
              [](const ModalityModel& a, const ModalityModel& b) {
                return a.modality_id() < b.modality_id();
              });
    models_ = std::move(loaded);
    for (int mi = 0; mi < wc.num_modalities; ++mi) {
      const auto& m = models_[mi];
      if (m.modality_id() != mi || m.channels() != wc.channels[mi] ||
          m.intervals() != wc.intervals || m.spectrum() != wc.spectrum[mi])
        throw std::invalid_argument("AlignTrainer: checkpoint shapes do not match the dataset");
    }
  } else {
    for (int mi = 0; mi < wc.num_modalities; ++mi)
      models_.emplace_back(mi, wc.channels[mi], wc.intervals, wc.spectrum[mi], config_.model,
                           derive_seed(config_.seed, "joint_model", mi));
  }

  discs_ = DiscriminatorSet::build(
      ArgSpec::tensor(wc.channels[0], wc.intervals, wc.spectrum[0]),
      ArgSpec::tensor(wc.channels[1], wc.intervals, wc.spectrum[1]), config_.model.shared_dim,
      config_.model.private_dim, config_.disc, derive_seed(config_.seed, "discs"));

  std::vector<ad::Var> model_vars;
  for (const auto& m : models_) {
    m.params().append_all(model_vars);
    m.projector_params().append_all(model_vars);
  }
  AdamWConfig oc;
  oc.weight_decay = config_.weight_decay;
  model_opt_ = AdamW(std::move(model_vars), oc);
  for (const auto& d : discs_.all()) {
    disc_opts_.emplace_back(d.params().vars(), oc);
    const std::string& tag = d.term_tag();
    bool active = false;
    if (tag.rfind("JOINT3", 0) == 0 || tag.rfind("SELF", 0) == 0 || tag.rfind("CROSS", 0) == 0)
      active = config_.info.shared_cmi_weight > 0;
    else if (tag.rfind("PRIV_SELF", 0) == 0)
      active = config_.info.gamma > 0;
    else if (tag.rfind("PRIV_SHARED", 0) == 0)
      active = config_.info.epsilon > 0;
    disc_active_.push_back(active);
  }

  steps_per_epoch_ = std::max(1, dataset.num_pairs() / need);
  total_steps_ = config_.epochs * steps_per_epoch_;

  for (auto& m : models_) m.set_trainable(!config_.freeze_encoders, true, true);
}

Checkpoint AlignTrainer::checkpoint() const {
  return make_multimodal_checkpoint(models_, stage_tag_);
}

std::uint64_t AlignTrainer::models_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& m : models_) h = mix64(h ^ m.content_hash());
  return h;
}

std::uint64_t AlignTrainer::disc_hash() const { return discs_.content_hash(); }

StepRecord AlignTrainer::training_step() {
  PairedSequenceBatch batch = sample_paired_sequence_batch(
      dataset_, config_.align_groups, config_.sequence_length,
      derive_seed(config_.seed, "align_batch", static_cast<std::uint64_t>(step_)));
  return training_step_on(batch);
}

StepRecord AlignTrainer::training_step_on(const PairedSequenceBatch& batch) {
  const int B = static_cast<int>(batch.groups.size());
  if (B == 0) throw std::invalid_argument("training_step: empty batch");
  const int L = static_cast<int>(batch.groups.front().size());
  const int M = static_cast<int>(models_.size());

  // Flatten group-major so temporal blocks stay contiguous.
  std::vector<ad::Var> x(M);
  std::vector<std::vector<MaskSplit>> masks(M);
  for (int mi = 0; mi < M; ++mi) {
    std::vector<const SpectrogramTensor*> tensors;
    tensors.reserve(static_cast<std::size_t>(B) * L);
    for (int b = 0; b < B; ++b)
      for (int l = 0; l < L; ++l) tensors.push_back(&batch.groups[b][l][mi].tensor);
    x[mi] = models_[mi].batch_to_var(tensors);
    masks[mi].reserve(tensors.size());
    for (std::size_t r = 0; r < tensors.size(); ++r)
      masks[mi].push_back(mask_indices(
          models_[mi].num_patches(), config_.model.mask_ratio,
          derive_seed(config_.seed, "align_mask",
                      (static_cast<std::uint64_t>(step_) * M + mi) * 8192 + r)));
  }

  const std::uint64_t pre_model_hash =
      config_.debug_gradient_isolation ? models_hash() : 0;
  for (int rep = 0; rep < config_.disc_steps_per_encoder_step; ++rep) phase_a(x, masks, rep);
  if (config_.debug_gradient_isolation && models_hash() != pre_model_hash)
    throw std::logic_error("gradient isolation: encoder parameters changed during phase A");

  const std::uint64_t pre_disc_hash = config_.debug_gradient_isolation ? disc_hash() : 0;
  StepRecord rec = phase_b(batch, x, masks);
  if (config_.debug_gradient_isolation && disc_hash() != pre_disc_hash)
    throw std::logic_error("gradient isolation: discriminator parameters changed during phase B");

  ++step_;
  return rec;
}

void AlignTrainer::phase_a(const std::vector<ad::Var>& x,
                           const std::vector<std::vector<MaskSplit>>& masks, int rep) {
  bool any_active = false;
  for (bool a : disc_active_) any_active = any_active || a;
  if (!any_active) return;

  discs_.set_frozen(false);
  for (auto& m : models_) m.set_trainable(false, false, false);

  std::vector<ModalityModel::Encoded> enc(models_.size());
  for (std::size_t mi = 0; mi < models_.size(); ++mi)
    enc[mi] = models_[mi].encode(x[mi], masks[mi]);

  const ad::Matrix& x1 = x[0].value();
  const ad::Matrix& x2 = x[1].value();
  const ad::Matrix u[2] = {enc[0].u.value(), enc[1].u.value()};
  const ad::Matrix v[2] = {enc[0].v.value(), enc[1].v.value()};

  const double lr = cosine_warmup_lr(config_.base_lr * config_.disc_lr_multiplier,
                                     config_.warmup_fraction, std::max(1, total_steps_), step_);
  auto& discs = discs_.all();
  for (std::size_t d = 0; d < discs.size(); ++d) {
    if (!disc_active_[d]) continue;
    const std::string& tag = discs[d].term_tag();
    std::vector<ad::Matrix> slots;
    for (int i = 1; i <= 2; ++i) {
      if (tag == DiscriminatorSet::joint3_tag(i)) slots = {x1, x2, u[i - 1]};
      else if (tag == DiscriminatorSet::self_tag(i)) slots = {i == 1 ? x1 : x2, u[i - 1]};
      else if (tag == DiscriminatorSet::cross_tag(i)) slots = {i == 1 ? x2 : x1, u[i - 1]};
      else if (tag == DiscriminatorSet::priv_self_tag(i)) slots = {i == 1 ? x1 : x2, v[i - 1]};
      else if (tag == DiscriminatorSet::priv_shared_tag(i)) slots = {v[i - 1], u[i - 1]};
      else continue;
      break;
    }
    std::vector<ad::Matrix> product = build_product_batch(
        slots, {discs[d].shuffle_slot()},
        derive_seed(config_.seed, "negatives",
                    (static_cast<std::uint64_t>(step_) * 64 + d) * 8 + rep));
    std::vector<ad::Var> joint_vars, product_vars;
    for (auto& s : slots) joint_vars.push_back(ad::Var::constant(std::move(s)));
    for (auto& s : product) product_vars.push_back(ad::Var::constant(std::move(s)));
    ad::Var loss = discriminator_loss(discs[d], joint_vars, product_vars);
    ad::backward(loss);
    disc_opts_[d].step(lr);
  }

  for (auto& m : models_) m.set_trainable(!config_.freeze_encoders, true, true);
}

StepRecord AlignTrainer::phase_b(const PairedSequenceBatch& batch, const std::vector<ad::Var>& x,
                                 const std::vector<std::vector<MaskSplit>>& masks) {
  const int B = static_cast<int>(batch.groups.size());
  const int L = static_cast<int>(batch.groups.front().size());
  const int M = static_cast<int>(models_.size());

  discs_.set_frozen(true);
  for (auto& m : models_) m.set_trainable(!config_.freeze_encoders, true, true);

  std::vector<ModalityModel::Encoded> enc(M);
  for (int mi = 0; mi < M; ++mi) enc[mi] = models_[mi].encode(x[mi], masks[mi]);

  AlignmentTerms terms;

  if (config_.ssl.delta > 0) {
    for (int mi = 0; mi < M; ++mi) {
      std::vector<const SpectrogramTensor*> tensors;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) tensors.push_back(&batch.groups[b][l][mi].tensor);
      ad::Var pred = models_[mi].decode(enc[mi].h, masks[mi]);
      ad::Var raw = masked_reconstruction_loss(pred, models_[mi].patch_targets(tensors),
                                               masks[mi], models_[mi].num_patches(), 1.0);
      terms.reconstruction_raw =
          terms.reconstruction_raw.defined() ? ad::add(terms.reconstruction_raw, raw) : raw;
    }
  }

  if (config_.info.alpha > 0 || config_.info.shared_cmi_weight > 0) {
    InfoLossResult shared =
        shared_info_loss(enc[0].u, enc[1].u, x[0], x[1], discs_, config_.info);
    terms.shared_info = shared.total;
    for (auto& kv : shared.breakdown) terms.info_term_values.push_back(std::move(kv));
  }
  if (config_.info.gamma > 0 || config_.info.epsilon > 0) {
    InfoLossResult priv = private_info_loss(enc[0].v, enc[1].v, enc[0].u, enc[1].u, x[0], x[1],
                                            discs_, config_.info);
    terms.private_info = priv.total;
    for (auto& kv : priv.breakdown) terms.info_term_values.push_back(std::move(kv));
  }

  if (config_.ssl.lambda > 0) {
    ad::Var aug_sum;
    for (int mi = 0; mi < M; ++mi) {
      std::vector<SpectrogramTensor> view_a, view_b;
      std::vector<const SpectrogramTensor*> pa, pb;
      std::vector<MaskSplit> ma, mb;
      int r = 0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l, ++r) {
          const auto& rec = batch.groups[b][l][mi];
          const std::uint64_t base =
              (static_cast<std::uint64_t>(step_) * M + mi) * 8192 + static_cast<std::uint64_t>(r);
          view_a.push_back(augment(rec, config_.augment_policy, derive_seed(config_.seed, "view_a", base)));
          view_b.push_back(augment(rec, config_.augment_policy, derive_seed(config_.seed, "view_b", base)));
          ma.push_back(mask_indices(models_[mi].num_patches(), config_.model.mask_ratio,
                                    derive_seed(config_.seed, "mask_view_a", base)));
          mb.push_back(mask_indices(models_[mi].num_patches(), config_.model.mask_ratio,
                                    derive_seed(config_.seed, "mask_view_b", base)));
        }
      for (const auto& t : view_a) pa.push_back(&t);
      for (const auto& t : view_b) pb.push_back(&t);
      auto enc_a = models_[mi].encode_batch(pa, ma);
      auto enc_b = models_[mi].encode_batch(pb, mb);
      ad::Var one = augmentation_contrastive_loss(enc_a.h, enc_b.h, config_.ssl.tau, 1.0,
                                                  config_.ssl.cosine_normalize);
      aug_sum = aug_sum.defined() ? ad::add(aug_sum, one) : one;
    }
    terms.augmentation_raw = ad::scale(aug_sum, 1.0 / M);
  }

  if (config_.ssl.eta > 0) {
    std::vector<ad::Var> per_modality;
    for (int mi = 0; mi < M; ++mi) per_modality.push_back(enc[mi].h);
    terms.temporal_raw = temporal_locality_loss(per_modality, B, L, 1.0, config_.ssl.margin);
  }

  TotalLoss tl = total_alignment_loss(terms, config_.ssl);
  if (tl.total.requires_grad()) ad::backward(tl.total);
  const double lr =
      cosine_warmup_lr(config_.base_lr, config_.warmup_fraction, std::max(1, total_steps_), step_);
  model_opt_.step(lr);

  return {step_, stage_tag_, lr, std::move(tl.breakdown)};
}

double AlignTrainer::mean_pair_distance(
    const std::vector<std::vector<const SampleRecord*>>& tuples) {
  if (tuples.empty()) throw std::invalid_argument("mean_pair_distance: no tuples");
  for (auto& m : models_) m.set_trainable(false, false, false);
  double sum = 0.0;
  const int chunk = 256;
  for (std::size_t at = 0; at < tuples.size(); at += chunk) {
    const std::size_t n = std::min<std::size_t>(chunk, tuples.size() - at);
    std::vector<Eigen::MatrixXd> u;
    for (int mi = 0; mi < 2; ++mi) {
      std::vector<const SpectrogramTensor*> tensors;
      std::vector<MaskSplit> full;
      for (std::size_t i = 0; i < n; ++i) {
        tensors.push_back(&tuples[at + i][mi]->tensor);
        MaskSplit ms;
        for (int p = 0; p < models_[mi].num_patches(); ++p) ms.visible.push_back(p);
        full.push_back(std::move(ms));
      }
      u.push_back(models_[mi].encode_batch(tensors, full).u.value());
    }
    sum += (u[0] - u[1]).rowwise().squaredNorm().sum();
  }
  for (auto& m : models_) m.set_trainable(!config_.freeze_encoders, true, true);
  return sum / static_cast<double>(tuples.size());
}

AlignResult align_crossmodal(const SyntheticDataset& dataset, const TrainConfig& config,
                             const std::vector<Checkpoint>& unimodal_checkpoints,
                             const MetricsSink& sink) {
  AlignTrainer trainer(dataset, config, &unimodal_checkpoints);
  for (int t = 0; t < trainer.total_steps(); ++t) {
    StepRecord rec = trainer.training_step();
    if (sink) sink(rec);
  }
  return {trainer.checkpoint()};
}

AlignResult joint_pretrain(const SyntheticDataset& dataset, const TrainConfig& config,
                           const MetricsSink& sink) {
  if (config.stage != Stage::Joint)
    throw std::invalid_argument("joint_pretrain: config stage must be joint");
  AlignTrainer trainer(dataset, config, nullptr);
  for (int t = 0; t < trainer.total_steps(); ++t) {
    StepRecord rec = trainer.training_step();
    if (sink) sink(rec);
  }
  return {trainer.checkpoint()};
}

AlignResult cmc_align(const SyntheticDataset& dataset, const TrainConfig& config,
                      const std::vector<Checkpoint>& unimodal_checkpoints,
                      const MetricsSink& sink) {
  TrainConfig cfg = config;
  cfg.stage = Stage::Align;
  cfg.validate();
  const auto& wc = dataset.config;
  if (wc.num_modalities != 2)
    throw std::invalid_argument("cmc_align: two modalities required");
  std::vector<ModalityModel> models;
  for (const auto& ckpt : unimodal_checkpoints) {
    if (ckpt.stage != "unimodal")
      throw std::invalid_argument("cmc_align: input checkpoints must be unimodal");
    auto ms = models_from_checkpoint(ckpt, derive_seed(cfg.seed, "stage2_proj"));
    for (auto& m : ms) models.push_back(std::move(m));
  }
  std::sort(models.begin(), models.end(), [](const ModalityModel& a, const ModalityModel& b) {
    return a.modality_id() < b.modality_id();
  });

  const int batch = cfg.align_groups * cfg.sequence_length;
  if (dataset.num_pairs() < batch)
    throw std::invalid_argument("cmc_align: pair count " + std::to_string(dataset.num_pairs()) +
                                " is smaller than the per-step batch " + std::to_string(batch));
  const int steps_per_epoch = std::max(1, dataset.num_pairs() / batch);
  const int total_steps = cfg.epochs * steps_per_epoch;

  std::vector<ad::Var> vars;
  for (const auto& m : models) {
    m.params().append_all(vars);
    m.projector_params().append_all(vars);
  }
  AdamWConfig oc;
  oc.weight_decay = cfg.weight_decay;
  AdamW opt(std::move(vars), oc);
  for (auto& m : models) m.set_trainable(!cfg.freeze_encoders, true, true);

  for (int t = 0; t < total_steps; ++t) {
    PairedBatch pb = sample_paired_batch(dataset, batch, derive_seed(cfg.seed, "cmc_batch", t));
    std::vector<ad::Var> h(2);
    for (int mi = 0; mi < 2; ++mi) {
      std::vector<const SpectrogramTensor*> tensors;
      std::vector<MaskSplit> full;
      for (const auto& tuple : pb.tuples) {
        tensors.push_back(&tuple[mi].tensor);
        MaskSplit ms;
        for (int p = 0; p < models[mi].num_patches(); ++p) ms.visible.push_back(p);
        full.push_back(std::move(ms));
      }
      h[mi] = models[mi].encode_batch(tensors, full).h;
    }
    ad::Var logits = ad::scale(ad::matmul(h[0], ad::transpose(h[1])), 1.0 / cfg.ssl.tau);
    auto infonce = [&](const ad::Var& lg) {
      ad::Var shift = ad::row_max_detached(lg);
      ad::Var lse = ad::add(ad::log_(ad::row_sum(ad::exp_(ad::sub_colvec(lg, shift)))), shift);
      std::vector<std::pair<int, int>> diag;
      for (int i = 0; i < batch; ++i) diag.emplace_back(i, i);
      ad::Var pos = ad::gather_elems(lg, std::move(diag), batch, 1);
      return ad::mean_(ad::sub(lse, pos));
    };
    ad::Var loss = ad::scale(ad::add(infonce(logits), infonce(ad::transpose(logits))), 0.5);
    ad::backward(loss);
    const double lr =
        cosine_warmup_lr(cfg.base_lr, cfg.warmup_fraction, std::max(1, total_steps), t);
    opt.step(lr);
    if (sink) {
      LossBreakdown b;
      b.augmentation = loss.item();
      b.weighted_augmentation = loss.item();
      b.weighted_total = loss.item();
      sink({t, "aligned", lr, std::move(b)});
    }
  }
  return {make_multimodal_checkpoint(models, "aligned")};
}

}  // namespace infomae
