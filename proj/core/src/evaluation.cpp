#include "infomae/evaluation.hpp"

#include "infomae/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace infomae {

Metrics compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                        int num_classes) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("compute_metrics: predictions/labels length mismatch");
  Metrics m;
  m.confusion.assign(num_classes, std::vector<int>(num_classes, 0));
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes || predictions[i] < 0 ||
        predictions[i] >= num_classes)
      throw std::invalid_argument("compute_metrics: class out of range");
    m.confusion[labels[i]][predictions[i]]++;
    if (labels[i] == predictions[i]) ++correct;
  }
  m.accuracy = predictions.empty() ? 0.0 : static_cast<double>(correct) / predictions.size();
  m.precision.assign(num_classes, 0.0);
  m.recall.assign(num_classes, 0.0);
  double f1_sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = m.confusion[c][c], pred_c = 0, true_c = 0;
    for (int t = 0; t < num_classes; ++t) {
      pred_c += m.confusion[t][c];
      true_c += m.confusion[c][t];
    }
    m.precision[c] = pred_c > 0 ? static_cast<double>(tp) / pred_c : 0.0;
    m.recall[c] = true_c > 0 ? static_cast<double>(tp) / true_c : 0.0;
    const double denom = m.precision[c] + m.recall[c];
    f1_sum += denom > 0 ? 2.0 * m.precision[c] * m.recall[c] / denom : 0.0;
  }
  m.macro_f1 = f1_sum / num_classes;
  return m;
}

EvalSplit make_eval_split(const SyntheticDataset& dataset, int max_train, int max_eval,
                          std::uint64_t seed) {
  std::set<int> paired(dataset.paired_time_indices.begin(), dataset.paired_time_indices.end());
  std::vector<int> eligible;
  for (int t = 0; t < dataset.config.total_time_indices(); ++t)
    if (!paired.count(t)) eligible.push_back(t);
  if (eligible.size() < 4)
    throw std::invalid_argument("make_eval_split: too few unpaired time indices");
  auto rng = make_rng(seed, "eval_split");
  std::shuffle(eligible.begin(), eligible.end(), rng);
  const int half = static_cast<int>(eligible.size()) / 2;
  EvalSplit split;
  const int ntr = std::min(max_train, half);
  const int nev = std::min(max_eval, static_cast<int>(eligible.size()) - half);
  split.train_time_indices.assign(eligible.begin(), eligible.begin() + ntr);
  split.eval_time_indices.assign(eligible.begin() + half, eligible.begin() + half + nev);
  for (int t : split.train_time_indices)
    if (paired.count(t)) throw std::logic_error("make_eval_split: split overlaps alignment pairs");
  for (int t : split.eval_time_indices)
    if (paired.count(t)) throw std::logic_error("make_eval_split: split overlaps alignment pairs");
  return split;
}

FeatureExtractor FeatureExtractor::from_checkpoints(const std::vector<Checkpoint>& checkpoints,
                                                    std::uint64_t seed) {
  if (checkpoints.empty()) throw std::invalid_argument("FeatureExtractor: no checkpoints");
  FeatureExtractor fx;
  fx.stage = checkpoints.front().stage;
  for (const auto& ckpt : checkpoints) {
    if (ckpt.stage != fx.stage)
      throw std::invalid_argument("FeatureExtractor: mixed checkpoint stages");
    auto ms = models_from_checkpoint(ckpt, derive_seed(seed, "probe_models"));
    for (auto& m : ms) fx.models.push_back(std::move(m));
  }
  std::sort(fx.models.begin(), fx.models.end(),
            [](const ModalityModel& a, const ModalityModel& b) {
              return a.modality_id() < b.modality_id();
            });
  for (std::size_t i = 1; i < fx.models.size(); ++i)
    if (fx.models[i].modality_id() == fx.models[i - 1].modality_id())
      throw std::invalid_argument("FeatureExtractor: duplicate modality in checkpoints");
  return fx;
}

std::vector<int> FeatureExtractor::all_modalities() const {
  std::vector<int> out;
  for (const auto& m : models) out.push_back(m.modality_id());
  return out;
}

Eigen::MatrixXd FeatureExtractor::features(const SyntheticDataset& dataset,
                                           const std::vector<int>& time_indices,
                                           const std::vector<int>& modalities) const {
  const bool use_h = stage != "unimodal";
  int dim = 0;
  std::vector<const ModalityModel*> chosen;
  for (int want : modalities) {
    const ModalityModel* found = nullptr;
    for (const auto& m : models)
      if (m.modality_id() == want) found = &m;
    if (!found)
      throw std::invalid_argument("FeatureExtractor: checkpoint does not cover modality " +
                                  std::to_string(want));
    chosen.push_back(found);
    dim += use_h ? found->config().head_dim() : found->config().embed_dim;
  }
  Eigen::MatrixXd out(static_cast<long>(time_indices.size()), dim);
  const int chunk = 256;
  for (std::size_t at = 0; at < time_indices.size(); at += chunk) {
    const std::size_t n = std::min<std::size_t>(chunk, time_indices.size() - at);
    int col = 0;
    for (const ModalityModel* m : chosen) {
      std::vector<const SpectrogramTensor*> tensors;
      std::vector<MaskSplit> full;
      for (std::size_t i = 0; i < n; ++i) {
        tensors.push_back(&dataset.record(m->modality_id(), time_indices[at + i]).tensor);
        MaskSplit ms;
        for (int p = 0; p < m->num_patches(); ++p) ms.visible.push_back(p);
        full.push_back(std::move(ms));
      }
      auto enc = m->encode_batch(tensors, full);
      const Eigen::MatrixXd f = use_h ? enc.h.value() : enc.pooled.value();
      out.block(static_cast<long>(at), col, static_cast<long>(n), f.cols()) = f;
      col += static_cast<int>(f.cols());
    }
  }
  return out;
}

namespace {

struct Standardizer {
  Eigen::RowVectorXd mean, inv_std;
  static Standardizer fit(const Eigen::MatrixXd& x) {
    Standardizer s;
    s.mean = x.colwise().mean();
    Eigen::RowVectorXd var =
        ((x.rowwise() - s.mean).array().square().colwise().sum() / std::max<long>(1, x.rows()))
            .matrix();
    s.inv_std = (var.array() + 1e-8).sqrt().inverse().matrix();
    return s;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() * inv_std.array();
  }
};

// Softmax cross-entropy value and gradient for an affine classifier.
double softmax_ce(const Eigen::MatrixXd& x, const std::vector<int>& y, const Eigen::MatrixXd& w,
                  const Eigen::RowVectorXd& b, Eigen::MatrixXd& gw, Eigen::RowVectorXd& gb) {
  const long n = x.rows();
  Eigen::MatrixXd logits = (x * w).rowwise() + b;
  Eigen::VectorXd shift = logits.rowwise().maxCoeff();
  Eigen::MatrixXd p = (logits.colwise() - shift).array().exp();
  Eigen::VectorXd z = p.rowwise().sum();
  double loss = 0.0;
  for (long i = 0; i < n; ++i) {
    p.row(i) /= z(i);
    loss -= std::log(std::max(p(i, y[i]), 1e-300));
    p(i, y[i]) -= 1.0;
  }
  gw = x.transpose() * p / static_cast<double>(n);
  gb = p.colwise().sum() / static_cast<double>(n);
  return loss / static_cast<double>(n);
}

std::vector<int> predict(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w,
                         const Eigen::RowVectorXd& b) {
  Eigen::MatrixXd logits = (x * w).rowwise() + b;
  std::vector<int> out(logits.rows());
  for (long i = 0; i < logits.rows(); ++i) {
    long arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[i] = static_cast<int>(arg);
  }
  return out;
}

std::vector<int> labels_at(const SyntheticDataset& dataset, const std::vector<int>& times) {
  std::vector<int> out;
  out.reserve(times.size());
  for (int t : times) out.push_back(dataset.record(0, t).class_label);
  return out;
}

}  // namespace

ProbeResult probe_features(const Eigen::MatrixXd& train_x, const std::vector<int>& train_y,
                           const Eigen::MatrixXd& eval_x, const std::vector<int>& eval_y,
                           int num_classes, const ProbeConfig& config, std::uint64_t seed,
                           const std::string& variant_tag) {
  if (train_x.rows() != static_cast<long>(train_y.size()) ||
      eval_x.rows() != static_cast<long>(eval_y.size()))
    throw std::invalid_argument("probe_features: feature/label length mismatch");
  for (int y : train_y)
    if (y < 0 || y >= num_classes) throw std::invalid_argument("probe_features: label absent or out of range");

  Standardizer st = Standardizer::fit(train_x);
  Eigen::MatrixXd xtr = st.apply(train_x);
  Eigen::MatrixXd xev = st.apply(eval_x);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(xtr.cols(), num_classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(num_classes);
  Eigen::MatrixXd vw = Eigen::MatrixXd::Zero(xtr.cols(), num_classes);
  Eigen::RowVectorXd vb = Eigen::RowVectorXd::Zero(num_classes);
  Eigen::MatrixXd gw;
  Eigen::RowVectorXd gb;
  for (int s = 0; s < config.steps; ++s) {
    softmax_ce(xtr, train_y, w, b, gw, gb);
    vw = config.momentum * vw - config.lr * gw;
    vb = config.momentum * vb - config.lr * gb;
    w += vw;
    b += vb;
  }

  Metrics m = compute_metrics(predict(xev, w, b), eval_y, num_classes);
  ProbeResult r;
  r.accuracy = m.accuracy;
  r.macro_f1 = m.macro_f1;
  r.precision = std::move(m.precision);
  r.recall = std::move(m.recall);
  r.confusion = std::move(m.confusion);
  r.n_eval = static_cast<int>(eval_y.size());
  r.seed = seed;
  r.variant = variant_tag;
  return r;
}

ProbeResult linear_probe(const std::vector<Checkpoint>& checkpoints,
                         const SyntheticDataset& dataset, const EvalSplit& split,
                         const ProbeConfig& config, std::uint64_t seed,
                         const std::vector<int>& modalities) {
  FeatureExtractor fx = FeatureExtractor::from_checkpoints(checkpoints, seed);
  const std::vector<int> mods = modalities.empty() ? fx.all_modalities() : modalities;
  Eigen::MatrixXd xtr = fx.features(dataset, split.train_time_indices, mods);
  Eigen::MatrixXd xev = fx.features(dataset, split.eval_time_indices, mods);
  return probe_features(xtr, labels_at(dataset, split.train_time_indices), xev,
                        labels_at(dataset, split.eval_time_indices), dataset.config.num_classes,
                        config, seed, fx.stage);
}

ProbeResult finetune_eval(const std::vector<Checkpoint>& checkpoints,
                          const SyntheticDataset& dataset, const EvalSplit& split,
                          const ProbeConfig& config, std::uint64_t seed,
                          const std::vector<int>& modalities) {
  FeatureExtractor fx = FeatureExtractor::from_checkpoints(checkpoints, seed);
  const std::vector<int> mods = modalities.empty() ? fx.all_modalities() : modalities;
  const int num_classes = dataset.config.num_classes;
  const bool use_h = fx.stage != "unimodal";

  // Head fit on frozen features first.
  Eigen::MatrixXd xtr = fx.features(dataset, split.train_time_indices, mods);
  std::vector<int> ytr = labels_at(dataset, split.train_time_indices);
  Standardizer st = Standardizer::fit(xtr);
  Eigen::MatrixXd xtr_n = st.apply(xtr);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(xtr.cols(), num_classes);
  Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(num_classes);
  {
    Eigen::MatrixXd vw = w, gw;
    Eigen::RowVectorXd vb = b, gb;
    for (int s = 0; s < config.steps; ++s) {
      softmax_ce(xtr_n, ytr, w, b, gw, gb);
      vw = config.momentum * vw - config.lr * gw;
      vb = config.momentum * vb - config.lr * gb;
      w += vw;
      b += vb;
    }
  }

  if (config.finetune_epochs > 0) {
    // Joint phase: autodiff graph through the encoders; head lr as configured,
    // encoder side 10x smaller.
    ad::Var wv = ad::Var::param(w);
    ad::Var bv = ad::Var::param(b);
    std::vector<ad::Var> enc_vars;
    for (auto& m : fx.models) {
      m.set_trainable(true, false, use_h);
      for (const auto& [name, var] : m.params().items()) {
        const bool is_encoder = name.rfind("embed_", 0) == 0 || name.rfind("enc", 0) == 0;
        if (is_encoder) enc_vars.push_back(var);
      }
      if (use_h) m.projector_params().append_all(enc_vars);
    }

    const int n = static_cast<int>(split.train_time_indices.size());
    const int bs = std::min(config.finetune_batch, n);
    std::vector<const ModalityModel*> chosen;
    for (int want : mods)
      for (const auto& m : fx.models)
        if (m.modality_id() == want) chosen.push_back(&m);

    int step = 0;
    for (int ep = 0; ep < config.finetune_epochs; ++ep) {
      auto rng = make_rng(seed, "finetune_epoch", ep);
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int at = 0; at + bs <= n; at += bs, ++step) {
        ad::Var feat;
        std::vector<int> yb;
        for (const ModalityModel* m : chosen) {
          std::vector<const SpectrogramTensor*> tensors;
          std::vector<MaskSplit> full;
          for (int i = 0; i < bs; ++i) {
            const int t = split.train_time_indices[order[at + i]];
            tensors.push_back(&dataset.record(m->modality_id(), t).tensor);
            MaskSplit msk;
            for (int p = 0; p < m->num_patches(); ++p) msk.visible.push_back(p);
            full.push_back(std::move(msk));
          }
          auto enc = m->encode_batch(tensors, full);
          ad::Var f = use_h ? enc.h : enc.pooled;
          feat = feat.defined() ? ad::concat_cols(feat, f) : f;
        }
        yb.reserve(bs);
        for (int i = 0; i < bs; ++i)
          yb.push_back(dataset.record(0, split.train_time_indices[order[at + i]]).class_label);

        ad::Var fn = ad::hadamard(
            ad::sub(feat, ad::Var::constant(st.mean.replicate(bs, 1))),
            ad::Var::constant(st.inv_std.replicate(bs, 1)));
        ad::Var logits = ad::add_rowvec(ad::matmul(fn, wv), bv);
        ad::Var shift = ad::row_max_detached(logits);
        ad::Var lse = ad::add(ad::log_(ad::row_sum(ad::exp_(ad::sub_colvec(logits, shift)))), shift);
        std::vector<std::pair<int, int>> picks;
        for (int i = 0; i < bs; ++i) picks.emplace_back(i, yb[i]);
        ad::Var pos = ad::gather_elems(logits, std::move(picks), bs, 1);
        ad::Var loss = ad::mean_(ad::sub(lse, pos));
        ad::backward(loss);

        const double head_lr = config.finetune_head_lr;
        const double enc_lr = head_lr / 10.0;
        wv.mutable_value() -= head_lr * wv.grad();
        wv.mutable_grad().setZero();
        bv.mutable_value() -= head_lr * bv.grad();
        bv.mutable_grad().setZero();
        for (auto& p : enc_vars) {
          p.mutable_value() -= enc_lr * p.grad();
          p.mutable_grad().setZero();
        }
      }
    }
    w = wv.value();
    b = bv.value().row(0);
  }

  Eigen::MatrixXd xev = fx.features(dataset, split.eval_time_indices, mods);
  std::vector<int> yev = labels_at(dataset, split.eval_time_indices);
  Metrics m = compute_metrics(predict(st.apply(xev), w, b), yev, num_classes);
  ProbeResult r;
  r.accuracy = m.accuracy;
  r.macro_f1 = m.macro_f1;
  r.precision = std::move(m.precision);
  r.recall = std::move(m.recall);
  r.confusion = std::move(m.confusion);
  r.n_eval = static_cast<int>(yev.size());
  r.seed = seed;
  r.variant = fx.stage + "+finetune";
  return r;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoTemp: return "noTemp";
    case Variant::NoShared: return "noShared";
    case Variant::NoPrivate: return "noPrivate";
    case Variant::NoAug: return "noAug";
    case Variant::Concat: return "concat";
    case Variant::Joint: return "joint";
    case Variant::Cmc: return "cmc";
  }
  return "unknown";
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = {Variant::Full,     Variant::NoTemp, Variant::NoShared,
                                         Variant::NoPrivate, Variant::NoAug,  Variant::Concat,
                                         Variant::Joint,    Variant::Cmc};
  return v;
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : all_variants())
    if (variant_name(v) == name) return v;
  throw std::invalid_argument("unknown variant tag: " + name);
}

TrainConfig apply_variant(Variant v, TrainConfig cfg) {
  switch (v) {
    case Variant::Full:
      cfg.stage = Stage::Align;
      break;
    case Variant::NoTemp:
      cfg.stage = Stage::Align;
      cfg.ssl.eta = 0.0;
      break;
    case Variant::NoShared:
      cfg.stage = Stage::Align;
      cfg.info.alpha = 0.0;
      cfg.info.beta = 0.0;
      cfg.info.shared_cmi_weight = 0.0;
      break;
    case Variant::NoPrivate:
      cfg.stage = Stage::Align;
      cfg.info.gamma = 0.0;
      cfg.info.epsilon = 0.0;
      break;
    case Variant::NoAug:
      cfg.stage = Stage::Align;
      cfg.ssl.lambda = 0.0;
      break;
    case Variant::Joint:
      cfg.stage = Stage::Joint;
      break;
    case Variant::Concat:
    case Variant::Cmc:
      cfg.stage = Stage::Align;
      break;
  }
  return cfg;
}

VariantOutput run_variant(Variant v, const SyntheticDataset& dataset,
                          const TrainConfig& align_config, const std::vector<Checkpoint>& stage1,
                          const MetricsSink& sink) {
  TrainConfig cfg = apply_variant(v, align_config);
  switch (v) {
    case Variant::Concat:
      return {stage1};
    case Variant::Joint:
      return {{joint_pretrain(dataset, cfg, sink).checkpoint}};
    case Variant::Cmc:
      return {{cmc_align(dataset, cfg, stage1, sink).checkpoint}};
    default:
      return {{align_crossmodal(dataset, cfg, stage1, sink).checkpoint}};
  }
}

std::vector<SweepCell> pair_ratio_sweep(const SweepConfig& config,
                                        const std::function<void(const SweepCell&)>& on_cell) {
  for (double r : config.ratios)
    if (!(r > 0.0 && r <= 1.0))
      throw std::invalid_argument("pair_ratio_sweep: ratios must lie in (0,1]");
  std::vector<SweepCell> cells;
  for (std::uint64_t seed : config.seeds) {
    WorldConfig wc = config.world;
    SyntheticDataset world = generate_world(wc, seed);

    TrainConfig s1 = config.stage1;
    s1.stage = Stage::Unimodal;
    s1.seed = seed;
    UnimodalResult stage1 = pretrain_unimodal(world, s1);

    for (double ratio : config.ratios) {
      reassign_pairing(world, ratio);
      EvalSplit split = make_eval_split(world, config.probe.max_train, config.probe.max_eval,
                                        derive_seed(seed, "sweep_split"));
      for (Variant v : config.variants) {
        TrainConfig ac = config.align;
        ac.seed = seed;
        VariantOutput out = run_variant(v, world, ac, stage1.checkpoints);
        ProbeResult probe = linear_probe(out.checkpoints, world, split, config.probe, seed);
        SweepCell cell{ratio, variant_name(v), seed, probe.accuracy, probe.macro_f1};
        cells.push_back(cell);
        if (on_cell) on_cell(cell);
      }
    }
  }
  return cells;
}

namespace {
std::vector<double> ranks_with_ties(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

double spearman_rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two aligned series");
  std::vector<double> ra = ranks_with_ties(a), rb = ranks_with_ties(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace infomae
