#include "infomae/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <stdexcept>

namespace infomae {

using json = nlohmann::json;

namespace {

json default_tree() {
  return json{
      {"schema_version", "1"},
      {"seed", 1},
      {"run", {{"name", "default"}, {"dir", "runs"}}},
      {"data", {{"path", "dataset"}}},
      {"world",
       {{"num_modalities", 2},
        {"shared_dim", 4},
        {"private_dim", 4},
        {"channels", {1, 1}},
        {"intervals", 8},
        {"spectrum", {8, 8}},
        {"mixing_seed", 7},
        {"observation_noise_sigma", 0.1},
        {"latent_walk_rho", 0.8},
        {"num_sequences", 200},
        {"sequence_length", 25},
        {"pair_ratio", 0.05},
        {"num_classes", 5}}},
      {"model",
       {{"patch_intervals", 2},
        {"patch_spectrum", 2},
        {"embed_dim", 32},
        {"encoder_depth", 2},
        {"decoder_depth", 2},
        {"shared_dim", 4},
        {"private_dim", 4},
        {"mask_ratio", 0.75}}},
      {"train",
       {{"epochs_unimodal", 15},
        {"epochs_align", 30},
        {"batch_size", 64},
        {"align_groups", 8},
        {"sequence_length", 2},
        {"base_lr", 1e-3},
        {"weight_decay", 0.05},
        {"warmup_fraction", 0.1},
        {"disc_lr_multiplier", 1.0},
        {"disc_steps_per_encoder_step", 1},
        {"freeze_encoders", false},
        {"debug_gradient_isolation", false},
        {"unimodal_checkpoints", json::array()}}},
      {"info",
       {{"alpha", 1.0}, {"beta", 0.5}, {"gamma", 0.1}, {"epsilon", 0.1}, {"shared_cmi_weight", 1.0}}},
      {"ssl",
       {{"delta", 1.0},
        {"lambda", 0.1},
        {"tau", 0.5},
        {"eta", 0.1},
        {"margin", 1.0},
        {"cosine_normalize", false}}},
      {"disc",
       {{"conv_patch_intervals", 2},
        {"conv_patch_spectrum", 2},
        {"conv_channels", 16},
        {"embed_dim", 16},
        {"mlp_hidden", 32},
        {"clamp", 1e-6}}},
      {"augment",
       {{"policy",
         {{{"kind", "amplitude_scale"}, {"prob", 0.5}, {"a", 0.9}, {"b", 1.1}},
          {{"kind", "additive_gaussian_noise"}, {"prob", 0.5}, {"a", 0.05}, {"b", 0.0}},
          {{"kind", "time_interval_mask"}, {"prob", 0.3}, {"a", 0.2}, {"b", 0.0}},
          {{"kind", "frequency_band_mask"}, {"prob", 0.3}, {"a", 0.2}, {"b", 0.0}},
          {{"kind", "interval_shift"}, {"prob", 0.3}, {"a", 2.0}, {"b", 0.0}}}}}},
      {"eval",
       {{"probe_steps", 300},
        {"probe_lr", 0.5},
        {"probe_momentum", 0.9},
        {"max_train", 2000},
        {"max_eval", 2000},
        {"finetune_epochs", 3},
        {"finetune_batch", 64},
        {"finetune_head_lr", 0.01},
        {"checkpoints", json::array()},
        {"sweep_ratios", {0.05, 0.15, 0.25, 0.50}},
        {"sweep_seeds", {1, 2, 3}},
        {"sweep_variants", {"full", "concat", "joint"}},
        {"ablate_variants", {"full", "noTemp", "noShared", "noPrivate", "noAug"}}}}};
}

bool type_compatible(const json& def, const json& user) {
  if (def.is_number_integer() || def.is_number_unsigned())
    return user.is_number_integer() || user.is_number_unsigned();
  if (def.is_number_float()) return user.is_number();
  if (def.is_boolean()) return user.is_boolean();
  if (def.is_string()) return user.is_string();
  if (def.is_array()) return user.is_array();
  if (def.is_object()) return user.is_object();
  return false;
}

void merge_into(json& dst, const json& user, const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw std::invalid_argument("config: unknown key " + key);
    json& slot = dst[it.key()];
    if (slot.is_object() && it->is_object()) {
      merge_into(slot, *it, key);
      continue;
    }
    if (!type_compatible(slot, *it))
      throw std::invalid_argument("config: type mismatch for key " + key);
    if (slot.is_array() && !slot.empty() && !it->empty()) {
      const json& elem = slot.front();
      for (const auto& e : *it)
        if (!elem.is_object() && !type_compatible(elem, e))
          throw std::invalid_argument("config: element type mismatch in " + key);
    }
    slot = *it;
  }
}

json parse_override_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);  // bare strings allowed
  return v;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  json value = parse_override_value(assignment.substr(eq + 1));

  json* at = &tree;
  std::size_t begin = 0;
  std::vector<std::string> parts;
  while (true) {
    const auto dot = path.find('.', begin);
    parts.push_back(path.substr(begin, dot == std::string::npos ? dot : dot - begin));
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!at->contains(parts[i]) || !(*at)[parts[i]].is_object())
      throw std::invalid_argument("config: unknown key " + path);
    at = &(*at)[parts[i]];
  }
  const std::string& leaf = parts.back();
  if (!at->contains(leaf)) throw std::invalid_argument("config: unknown key " + path);
  if (!type_compatible((*at)[leaf], value))
    throw std::invalid_argument("config: type mismatch for key " + path);
  (*at)[leaf] = value;
}

AugmentKind augment_kind_from(const std::string& name) {
  if (name == "amplitude_scale") return AugmentKind::AmplitudeScale;
  if (name == "additive_gaussian_noise") return AugmentKind::AdditiveGaussianNoise;
  if (name == "time_interval_mask") return AugmentKind::TimeIntervalMask;
  if (name == "frequency_band_mask") return AugmentKind::FrequencyBandMask;
  if (name == "interval_shift") return AugmentKind::IntervalShift;
  throw std::invalid_argument("config: unknown augment kind '" + name + "'");
}

void constraint(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

ExperimentConfig build(const json& t) {
  ExperimentConfig c;
  c.seed = t.at("seed").get<std::uint64_t>();
  c.run_name = t.at("run").at("name").get<std::string>();
  c.run_base = t.at("run").at("dir").get<std::string>();
  c.data_path = t.at("data").at("path").get<std::string>();

  const json& w = t.at("world");
  c.world.num_modalities = w.at("num_modalities").get<int>();
  c.world.shared_dim = w.at("shared_dim").get<int>();
  c.world.private_dim = w.at("private_dim").get<int>();
  c.world.channels = w.at("channels").get<std::vector<int>>();
  c.world.intervals = w.at("intervals").get<int>();
  c.world.spectrum = w.at("spectrum").get<std::vector<int>>();
  c.world.mixing_seed = w.at("mixing_seed").get<std::uint64_t>();
  c.world.observation_noise_sigma = w.at("observation_noise_sigma").get<double>();
  c.world.latent_walk_rho = w.at("latent_walk_rho").get<double>();
  c.world.num_sequences = w.at("num_sequences").get<int>();
  c.world.sequence_length = w.at("sequence_length").get<int>();
  c.world.pair_ratio = w.at("pair_ratio").get<double>();
  c.world.num_classes = w.at("num_classes").get<int>();
  constraint(c.world.pair_ratio > 0.0 && c.world.pair_ratio <= 1.0,
             "world.pair_ratio in (0,1]");
  constraint(c.world.latent_walk_rho >= 0.0 && c.world.latent_walk_rho < 1.0,
             "world.latent_walk_rho in [0,1)");
  c.world.validate();

  const json& m = t.at("model");
  c.model.patch_intervals = m.at("patch_intervals").get<int>();
  c.model.patch_spectrum = m.at("patch_spectrum").get<int>();
  c.model.embed_dim = m.at("embed_dim").get<int>();
  c.model.encoder_depth = m.at("encoder_depth").get<int>();
  c.model.decoder_depth = m.at("decoder_depth").get<int>();
  c.model.shared_dim = m.at("shared_dim").get<int>();
  c.model.private_dim = m.at("private_dim").get<int>();
  c.model.mask_ratio = m.at("mask_ratio").get<double>();
  constraint(c.model.mask_ratio >= 0.0 && c.model.mask_ratio < 1.0, "model.mask_ratio in [0,1)");

  const json& tr = t.at("train");
  c.epochs_unimodal = tr.at("epochs_unimodal").get<int>();
  c.epochs_align = tr.at("epochs_align").get<int>();
  c.batch_size = tr.at("batch_size").get<int>();
  c.align_groups = tr.at("align_groups").get<int>();
  c.train_sequence_length = tr.at("sequence_length").get<int>();
  c.base_lr = tr.at("base_lr").get<double>();
  c.weight_decay = tr.at("weight_decay").get<double>();
  c.warmup_fraction = tr.at("warmup_fraction").get<double>();
  c.disc_lr_multiplier = tr.at("disc_lr_multiplier").get<double>();
  c.disc_steps_per_encoder_step = tr.at("disc_steps_per_encoder_step").get<int>();
  c.freeze_encoders = tr.at("freeze_encoders").get<bool>();
  c.debug_gradient_isolation = tr.at("debug_gradient_isolation").get<bool>();
  c.unimodal_checkpoints = tr.at("unimodal_checkpoints").get<std::vector<std::string>>();
  constraint(c.epochs_unimodal >= 0 && c.epochs_align >= 0, "train.epochs must be >= 0");
  constraint(c.warmup_fraction >= 0.0 && c.warmup_fraction <= 1.0,
             "train.warmup_fraction in [0,1]");

  const json& in = t.at("info");
  c.info.alpha = in.at("alpha").get<double>();
  c.info.beta = in.at("beta").get<double>();
  c.info.gamma = in.at("gamma").get<double>();
  c.info.epsilon = in.at("epsilon").get<double>();
  c.info.shared_cmi_weight = in.at("shared_cmi_weight").get<double>();
  constraint(c.info.beta >= 0.0 && c.info.beta <= 1.0, "info.beta in [0,1]");
  c.info.validate();

  const json& ss = t.at("ssl");
  c.ssl.delta = ss.at("delta").get<double>();
  c.ssl.lambda = ss.at("lambda").get<double>();
  c.ssl.tau = ss.at("tau").get<double>();
  c.ssl.eta = ss.at("eta").get<double>();
  c.ssl.margin = ss.at("margin").get<double>();
  c.ssl.cosine_normalize = ss.at("cosine_normalize").get<bool>();
  constraint(c.ssl.tau > 0.0, "ssl.tau must be > 0");
  c.ssl.validate();

  const json& dc = t.at("disc");
  c.disc.conv_patch_intervals = dc.at("conv_patch_intervals").get<int>();
  c.disc.conv_patch_spectrum = dc.at("conv_patch_spectrum").get<int>();
  c.disc.conv_channels = dc.at("conv_channels").get<int>();
  c.disc.embed_dim = dc.at("embed_dim").get<int>();
  c.disc.mlp_hidden = dc.at("mlp_hidden").get<int>();
  c.disc.clamp = dc.at("clamp").get<double>();
  constraint(c.disc.clamp > 0.0 && c.disc.clamp < 0.5, "disc.clamp in (0, 0.5)");

  c.augment.transforms.clear();
  for (const auto& jt : t.at("augment").at("policy")) {
    AugmentTransform at;
    at.kind = augment_kind_from(jt.at("kind").get<std::string>());
    at.prob = jt.at("prob").get<double>();
    at.a = jt.at("a").get<double>();
    at.b = jt.value("b", 0.0);
    c.augment.transforms.push_back(at);
  }
  c.augment.validate();

  const json& ev = t.at("eval");
  c.probe.steps = ev.at("probe_steps").get<int>();
  c.probe.lr = ev.at("probe_lr").get<double>();
  c.probe.momentum = ev.at("probe_momentum").get<double>();
  c.probe.max_train = ev.at("max_train").get<int>();
  c.probe.max_eval = ev.at("max_eval").get<int>();
  c.probe.finetune_epochs = ev.at("finetune_epochs").get<int>();
  c.probe.finetune_batch = ev.at("finetune_batch").get<int>();
  c.probe.finetune_head_lr = ev.at("finetune_head_lr").get<double>();
  c.eval_checkpoints = ev.at("checkpoints").get<std::vector<std::string>>();
  c.sweep_ratios = ev.at("sweep_ratios").get<std::vector<double>>();
  c.sweep_seeds = ev.at("sweep_seeds").get<std::vector<std::uint64_t>>();
  c.sweep_variants = ev.at("sweep_variants").get<std::vector<std::string>>();
  c.ablate_variants = ev.at("ablate_variants").get<std::vector<std::string>>();
  for (const auto& v : c.sweep_variants) variant_from_name(v);
  for (const auto& v : c.ablate_variants) variant_from_name(v);
  for (double r : c.sweep_ratios)
    constraint(r > 0.0 && r <= 1.0, "eval.sweep_ratios entries in (0,1]");

  c.echo_json = t.dump(2);
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  json tree = default_tree();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      json user = json::parse(text, nullptr, false);
      if (user.is_discarded())
        throw std::invalid_argument("config: " + path + " is not valid JSON");
      if (!user.is_object()) throw std::invalid_argument("config: top level must be an object");
      merge_into(tree, user, "");
    }
  }
  for (const auto& o : overrides) apply_override(tree, o);
  if (tree.at("schema_version").get<std::string>() != "1")
    throw std::invalid_argument("config: unsupported schema_version");
  return build(tree);
}

TrainConfig ExperimentConfig::train_config(Stage stage) const {
  TrainConfig t;
  t.stage = stage;
  t.epochs = stage == Stage::Unimodal ? epochs_unimodal : epochs_align;
  t.batch_size = batch_size;
  t.align_groups = align_groups;
  t.sequence_length = train_sequence_length;
  t.base_lr = base_lr;
  t.weight_decay = weight_decay;
  t.warmup_fraction = warmup_fraction;
  t.disc_lr_multiplier = disc_lr_multiplier;
  t.disc_steps_per_encoder_step = disc_steps_per_encoder_step;
  t.seed = seed;
  t.info = info;
  t.ssl = ssl;
  t.disc = disc;
  t.model = model;
  t.augment_policy = augment;
  t.freeze_encoders = freeze_encoders;
  t.debug_gradient_isolation = debug_gradient_isolation;
  return t;
}

SweepConfig ExperimentConfig::sweep_config(bool ablation) const {
  SweepConfig s;
  s.world = world;
  s.stage1 = train_config(Stage::Unimodal);
  s.align = train_config(Stage::Align);
  s.probe = probe;
  s.ratios = ablation ? std::vector<double>{world.pair_ratio} : sweep_ratios;
  const auto& names = ablation ? ablate_variants : sweep_variants;
  for (const auto& n : names) s.variants.push_back(variant_from_name(n));
  s.seeds = sweep_seeds;
  return s;
}

}  // namespace infomae
