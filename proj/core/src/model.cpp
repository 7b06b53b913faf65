#include "infomae/model.hpp"

#include <cmath>
#include <stdexcept>

namespace infomae {

void ModelConfig::validate(int intervals, int spectrum) const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("ModelConfig: " + m); };
  if (patch_intervals < 1 || patch_spectrum < 1) fail("patch shape must be >= 1");
  if (intervals % patch_intervals != 0)
    fail("patch_intervals " + std::to_string(patch_intervals) + " does not divide intervals " +
         std::to_string(intervals));
  if (spectrum % patch_spectrum != 0)
    fail("patch_spectrum " + std::to_string(patch_spectrum) + " does not divide spectrum " +
         std::to_string(spectrum));
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (encoder_depth < 0 || decoder_depth < 0) fail("depths must be >= 0");
  if (shared_dim < 1 || private_dim < 1) fail("shared_dim and private_dim must be >= 1");
  if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) fail("mask_ratio in [0,1)");
}

PatchSequence patchify(const SpectrogramTensor& tensor, int patch_intervals, int patch_spectrum) {
  const int C = tensor.channels(), I = tensor.intervals(), S = tensor.spectrum();
  if (patch_intervals < 1 || patch_spectrum < 1 || I % patch_intervals != 0 ||
      S % patch_spectrum != 0)
    throw std::invalid_argument("patchify: patch shape " + std::to_string(patch_intervals) + "x" +
                                std::to_string(patch_spectrum) + " does not divide " +
                                std::to_string(I) + "x" + std::to_string(S));
  const int ni = I / patch_intervals, ns = S / patch_spectrum;
  PatchSequence out;
  out.channels = C;
  out.intervals = I;
  out.spectrum = S;
  out.patch_intervals = patch_intervals;
  out.patch_spectrum = patch_spectrum;
  out.patches.resize(ni * ns, C * patch_intervals * patch_spectrum);
  for (int pi = 0; pi < ni; ++pi)
    for (int ps = 0; ps < ns; ++ps) {
      const int p = pi * ns + ps;  // interval-major, spectrum-minor
      int e = 0;
      for (int c = 0; c < C; ++c)
        for (int di = 0; di < patch_intervals; ++di)
          for (int ds = 0; ds < patch_spectrum; ++ds)
            out.patches(p, e++) = tensor.at(c, pi * patch_intervals + di, ps * patch_spectrum + ds);
    }
  return out;
}

SpectrogramTensor unpatchify(const PatchSequence& patches) {
  SpectrogramTensor out(patches.channels, patches.intervals, patches.spectrum);
  const int ns = patches.spectrum / patches.patch_spectrum;
  for (int p = 0; p < patches.count(); ++p) {
    const int pi = p / ns, ps = p % ns;
    int e = 0;
    for (int c = 0; c < patches.channels; ++c)
      for (int di = 0; di < patches.patch_intervals; ++di)
        for (int ds = 0; ds < patches.patch_spectrum; ++ds)
          out.at(c, pi * patches.patch_intervals + di, ps * patches.patch_spectrum + ds) =
              patches.patches(p, e++);
  }
  return out;
}

MaskSplit mask_indices(int num_patches, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) throw std::invalid_argument("mask_indices: ratio in [0,1)");
  // round-half-to-even, the frozen rounding rule
  const int k = static_cast<int>(std::nearbyint(ratio * num_patches));
  std::vector<int> idx(num_patches);
  for (int i = 0; i < num_patches; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, num_patches - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  MaskSplit out;
  out.masked.assign(idx.begin(), idx.begin() + k);
  out.visible.assign(idx.begin() + k, idx.end());
  std::sort(out.masked.begin(), out.masked.end());
  std::sort(out.visible.begin(), out.visible.end());
  return out;
}

std::pair<PatchSequence, std::vector<int>> mask_patches(const PatchSequence& patches, double ratio,
                                                        std::uint64_t seed) {
  MaskSplit split = mask_indices(patches.count(), ratio, seed);
  PatchSequence visible = patches;
  visible.patches.resize(static_cast<long>(split.visible.size()), patches.dim());
  for (std::size_t i = 0; i < split.visible.size(); ++i)
    visible.patches.row(static_cast<long>(i)) = patches.patches.row(split.visible[i]);
  return {std::move(visible), std::move(split.masked)};
}

Eigen::MatrixXd sinusoidal_positions(int count, int dim) {
  Eigen::MatrixXd pos(count, dim);
  for (int p = 0; p < count; ++p)
    for (int d = 0; d < dim; ++d) {
      const double rate = std::pow(10000.0, -2.0 * (d / 2) / static_cast<double>(dim));
      pos(p, d) = (d % 2 == 0) ? std::sin(p * rate) : std::cos(p * rate);
    }
  return pos;
}

ModalityModel::ModalityModel(int modality_id, int channels, int intervals, int spectrum,
                             const ModelConfig& config, std::uint64_t seed)
    : modality_id_(modality_id),
      channels_(channels),
      intervals_(intervals),
      spectrum_(spectrum),
      config_(config) {
  config.validate(intervals, spectrum);
  num_patches_ = (intervals / config.patch_intervals) * (spectrum / config.patch_spectrum);
  patch_dim_ = channels * config.patch_intervals * config.patch_spectrum;
  positional_ = sinusoidal_positions(num_patches_, config.embed_dim);
  positional_dec_ = sinusoidal_positions(num_patches_, config.head_dim());

  auto rng = make_rng(seed, "model_init", static_cast<std::uint64_t>(modality_id));
  const int d = config.embed_dim;
  const int hidden = 2 * d;
  params_.add("embed_w", dense_init(patch_dim_, d, rng));
  params_.add("embed_b", ad::Matrix::Zero(1, d));
  for (int l = 0; l < config.encoder_depth; ++l) {
    const std::string p = "enc" + std::to_string(l) + "_";
    params_.add(p + "w1", dense_init(d, hidden, rng));
    params_.add(p + "b1", ad::Matrix::Zero(1, hidden));
    params_.add(p + "w2", dense_init(hidden, d, rng));
    params_.add(p + "b2", ad::Matrix::Zero(1, d));
  }
  const int hd = config.head_dim();
  const int dec_hidden = 2 * hd;
  params_.add("dec_in_w", dense_init(hd, hd, rng));
  params_.add("dec_in_b", ad::Matrix::Zero(1, hd));
  params_.add("mask_token", dense_init(1, hd, rng) * 0.02);
  for (int l = 0; l < config.decoder_depth; ++l) {
    const std::string p = "dec" + std::to_string(l) + "_";
    params_.add(p + "w1", dense_init(hd, dec_hidden, rng));
    params_.add(p + "b1", ad::Matrix::Zero(1, dec_hidden));
    params_.add(p + "w2", dense_init(dec_hidden, hd, rng));
    params_.add(p + "b2", ad::Matrix::Zero(1, hd));
  }
  params_.add("head_w", dense_init(hd, patch_dim_, rng));
  params_.add("head_b", ad::Matrix::Zero(1, patch_dim_));

  projector_params_.add("proj_u_w1", dense_init(d, d, rng));
  projector_params_.add("proj_u_b1", ad::Matrix::Zero(1, d));
  projector_params_.add("proj_u_w2", dense_init(d, config.shared_dim, rng));
  projector_params_.add("proj_u_b2", ad::Matrix::Zero(1, config.shared_dim));
  projector_params_.add("proj_v_w1", dense_init(d, d, rng));
  projector_params_.add("proj_v_b1", ad::Matrix::Zero(1, d));
  projector_params_.add("proj_v_w2", dense_init(d, config.private_dim, rng));
  projector_params_.add("proj_v_b2", ad::Matrix::Zero(1, config.private_dim));
}

std::vector<ad::Var> ModalityModel::all_vars() const {
  std::vector<ad::Var> out;
  params_.append_all(out);
  projector_params_.append_all(out);
  return out;
}

void ModalityModel::set_trainable(bool encoders, bool decoders, bool projectors) {
  for (const auto& [name, var] : params_.items()) {
    const bool is_encoder = name.rfind("embed_", 0) == 0 || name.rfind("enc", 0) == 0;
    ad::Var v = var;  // handle to the same node
    v.set_requires_grad(is_encoder ? encoders : decoders);
  }
  for (const auto& [name, var] : projector_params_.items()) {
    ad::Var v = var;
    v.set_requires_grad(projectors);
  }
}

std::uint64_t ModalityModel::content_hash() const {
  return mix64(params_.content_hash() ^ mix64(projector_params_.content_hash()));
}

namespace {

void check_finite(const ad::Var& v, const std::string& layer) {
  if (!v.value().allFinite())
    throw std::runtime_error("forward: non-finite activations at layer " + layer);
}

}  // namespace

ModalityModel::Encoded ModalityModel::encode(const ad::Var& x,
                                             const std::vector<MaskSplit>& masks) const {
  const int B = static_cast<int>(x.rows());
  if (static_cast<int>(masks.size()) != B)
    throw std::invalid_argument("encode: one mask per sample required");
  if (x.cols() != flat_dim()) throw std::invalid_argument("encode: input width mismatch");
  const int pv = static_cast<int>(masks.front().visible.size());
  for (const auto& m : masks)
    if (static_cast<int>(m.visible.size()) != pv)
      throw std::invalid_argument("encode: uneven visible counts in batch");
  if (pv == 0) throw std::invalid_argument("encode: no visible patches");

  const int ns = spectrum_ / config_.patch_spectrum;
  // (B*pv) x patch_dim gather map from the flattened batch.
  std::vector<std::pair<int, int>> src;
  src.reserve(static_cast<std::size_t>(B) * pv * patch_dim_);
  std::vector<int> pos_rows;
  pos_rows.reserve(static_cast<std::size_t>(B) * pv);
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < pv; ++j) {
      const int p = masks[b].visible[j];
      pos_rows.push_back(p);
      const int pi = p / ns, ps = p % ns;
      for (int c = 0; c < channels_; ++c)
        for (int di = 0; di < config_.patch_intervals; ++di)
          for (int ds = 0; ds < config_.patch_spectrum; ++ds) {
            const int i = pi * config_.patch_intervals + di;
            const int s = ps * config_.patch_spectrum + ds;
            src.emplace_back(b, (c * intervals_ + i) * spectrum_ + s);
          }
    }
  ad::Var patches = ad::gather_elems(x, std::move(src), B * pv, patch_dim_);

  Eigen::MatrixXd pos(B * pv, config_.embed_dim);
  for (std::size_t r = 0; r < pos_rows.size(); ++r) pos.row(static_cast<long>(r)) = positional_.row(pos_rows[r]);

  ad::Var tok = ad::add(ad::affine(patches, params_.get("embed_w"), params_.get("embed_b")),
                        ad::Var::constant(std::move(pos)));
  check_finite(tok, "embed");
  for (int l = 0; l < config_.encoder_depth; ++l) {
    const std::string p = "enc" + std::to_string(l) + "_";
    ad::Var ff = ad::affine(ad::tanh_(ad::affine(tok, params_.get(p + "w1"), params_.get(p + "b1"))),
                            params_.get(p + "w2"), params_.get(p + "b2"));
    tok = ad::add(tok, ff);
    check_finite(tok, "encoder block " + std::to_string(l));
  }
  Encoded out;
  out.pooled = ad::row_block_mean(tok, pv);
  check_finite(out.pooled, "pool");
  out.u = ad::affine(
      ad::tanh_(ad::affine(out.pooled, projector_params_.get("proj_u_w1"), projector_params_.get("proj_u_b1"))),
      projector_params_.get("proj_u_w2"), projector_params_.get("proj_u_b2"));
  out.v = ad::affine(
      ad::tanh_(ad::affine(out.pooled, projector_params_.get("proj_v_w1"), projector_params_.get("proj_v_b1"))),
      projector_params_.get("proj_v_w2"), projector_params_.get("proj_v_b2"));
  check_finite(out.u, "projector F_shared");
  check_finite(out.v, "projector F_private");
  out.h = ad::concat_cols(out.u, out.v);
  return out;
}

ad::Var ModalityModel::decode(const ad::Var& h, const std::vector<MaskSplit>& masks) const {
  const int B = static_cast<int>(h.rows());
  if (static_cast<int>(masks.size()) != B)
    throw std::invalid_argument("decode: one mask per sample required");
  if (h.cols() != config_.head_dim()) throw std::invalid_argument("decode: h width mismatch");
  const int P = num_patches_;

  ad::Var base = ad::affine(h, params_.get("dec_in_w"), params_.get("dec_in_b"));
  ad::Var tok = ad::repeat_rows(base, P);

  Eigen::MatrixXd indicator = Eigen::MatrixXd::Zero(static_cast<long>(B) * P, 1);
  for (int b = 0; b < B; ++b)
    for (int p : masks[b].masked) indicator(static_cast<long>(b) * P + p, 0) = 1.0;
  tok = ad::add(tok, ad::matmul(ad::Var::constant(std::move(indicator)), params_.get("mask_token")));
  check_finite(tok, "decoder input");

  // Positions are injected at the input of each residual block, so a depth-0
  // decoder reduces exactly to the broadcast of h.
  ad::Var pos = ad::Var::constant(positional_dec_.replicate(B, 1));
  for (int l = 0; l < config_.decoder_depth; ++l) {
    const std::string p = "dec" + std::to_string(l) + "_";
    ad::Var in = ad::add(tok, pos);
    ad::Var ff = ad::affine(ad::tanh_(ad::affine(in, params_.get(p + "w1"), params_.get(p + "b1"))),
                            params_.get(p + "w2"), params_.get(p + "b2"));
    tok = ad::add(tok, ff);
    check_finite(tok, "decoder block " + std::to_string(l));
  }
  ad::Var pred = ad::affine(tok, params_.get("head_w"), params_.get("head_b"));
  check_finite(pred, "decoder head");
  return pred;
}

ad::Var ModalityModel::batch_to_var(const std::vector<const SpectrogramTensor*>& batch) const {
  ad::Matrix x(static_cast<long>(batch.size()), flat_dim());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& t = *batch[b];
    if (t.channels() != channels_ || t.intervals() != intervals_ || t.spectrum() != spectrum_)
      throw std::invalid_argument("batch_to_var: tensor shape mismatch");
    for (std::size_t e = 0; e < t.flat().size(); ++e) x(static_cast<long>(b), static_cast<long>(e)) = t.flat()[e];
  }
  return ad::Var::constant(std::move(x));
}

ModalityModel::Encoded ModalityModel::encode_batch(const std::vector<const SpectrogramTensor*>& batch,
                                                   const std::vector<MaskSplit>& masks) const {
  return encode(batch_to_var(batch), masks);
}

ad::Matrix ModalityModel::patch_targets(const std::vector<const SpectrogramTensor*>& batch) const {
  ad::Matrix out(static_cast<long>(batch.size()) * num_patches_, patch_dim_);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    PatchSequence ps = patchify(*batch[b], config_.patch_intervals, config_.patch_spectrum);
    out.middleRows(static_cast<long>(b) * num_patches_, num_patches_) = ps.patches;
  }
  return out;
}

RepBundle forward_modality(const ModalityModel& model, const PatchSequence& visible,
                           const std::vector<int>& visible_indices) {
  if (static_cast<int>(visible_indices.size()) != visible.count())
    throw std::invalid_argument("forward_modality: index/patch count mismatch");
  // Route through the batched path with a synthetic full-row input: scatter
  // the visible patches into a zero canvas; masked patches are never read.
  SpectrogramTensor canvas(model.channels(), model.intervals(), model.spectrum());
  PatchSequence full = patchify(canvas, model.config().patch_intervals, model.config().patch_spectrum);
  for (int j = 0; j < visible.count(); ++j) full.patches.row(visible_indices[j]) = visible.patches.row(j);
  SpectrogramTensor stuffed = unpatchify(full);
  MaskSplit split;
  split.visible = visible_indices;
  for (int p = 0; p < model.num_patches(); ++p)
    if (std::find(visible_indices.begin(), visible_indices.end(), p) == visible_indices.end())
      split.masked.push_back(p);
  auto enc = model.encode_batch({&stuffed}, {split});
  RepBundle out;
  out.u = enc.u.value().row(0).transpose();
  out.v = enc.v.value().row(0).transpose();
  return out;
}

SpectrogramTensor reconstruct(const ModalityModel& model, const RepBundle& bundle,
                              const std::vector<int>& mask_index) {
  if (bundle.u.size() != model.config().shared_dim || bundle.v.size() != model.config().private_dim)
    throw std::invalid_argument("reconstruct: bundle dims do not match model");
  ad::Matrix h(1, model.config().head_dim());
  h << bundle.u.transpose(), bundle.v.transpose();
  MaskSplit split;
  split.masked = mask_index;
  for (int p = 0; p < model.num_patches(); ++p)
    if (std::find(mask_index.begin(), mask_index.end(), p) == mask_index.end())
      split.visible.push_back(p);
  ad::Var pred = model.decode(ad::Var::constant(std::move(h)), {split});
  PatchSequence ps;
  ps.channels = model.channels();
  ps.intervals = model.intervals();
  ps.spectrum = model.spectrum();
  ps.patch_intervals = model.config().patch_intervals;
  ps.patch_spectrum = model.config().patch_spectrum;
  ps.patches = pred.value();
  return unpatchify(ps);
}

}  // namespace infomae
