#include "infomae/ssl_objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace infomae {

void SslHyper::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("SslHyper: tau must be > 0");
  if (delta < 0 || lambda < 0 || eta < 0)
    throw std::invalid_argument("SslHyper: weights must be >= 0");
  if (margin < 0) throw std::invalid_argument("SslHyper: margin must be >= 0");
}

ad::Var masked_reconstruction_loss(const ad::Var& pred, const ad::Matrix& target,
                                   const std::vector<MaskSplit>& masks, int num_patches,
                                   double delta) {
  const int B = static_cast<int>(masks.size());
  if (pred.rows() != static_cast<long>(B) * num_patches || pred.rows() != target.rows() ||
      pred.cols() != target.cols())
    throw std::invalid_argument("masked_reconstruction_loss: shape mismatch");
  const std::size_t masked_count = masks.front().masked.size();
  if (masked_count == 0 && delta > 0.0)
    throw std::invalid_argument("masked_reconstruction_loss: empty mask with delta > 0");
  std::vector<int> rows;
  rows.reserve(masked_count * B);
  for (int b = 0; b < B; ++b) {
    if (masks[b].masked.size() != masked_count)
      throw std::invalid_argument("masked_reconstruction_loss: uneven mask counts");
    for (int p : masks[b].masked) rows.push_back(b * num_patches + p);
  }
  if (rows.empty()) return ad::Var::scalar(0.0);
  ad::Matrix tgt(static_cast<long>(rows.size()), target.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) tgt.row(static_cast<long>(i)) = target.row(rows[i]);
  ad::Var masked_pred = ad::gather_rows(pred, std::move(rows));
  return ad::scale(ad::mse(masked_pred, ad::Var::constant(std::move(tgt))), delta);
}

double masked_reconstruction_loss(const SpectrogramTensor& x, const SpectrogramTensor& x_hat,
                                  const std::vector<int>& mask_index, int patch_intervals,
                                  int patch_spectrum, double delta) {
  if (!x.same_shape(x_hat))
    throw std::invalid_argument("masked_reconstruction_loss: tensor shapes differ");
  if (mask_index.empty() && delta > 0.0)
    throw std::invalid_argument("masked_reconstruction_loss: empty mask with delta > 0");
  PatchSequence px = patchify(x, patch_intervals, patch_spectrum);
  PatchSequence ph = patchify(x_hat, patch_intervals, patch_spectrum);
  double sum = 0.0;
  long n = 0;
  for (int p : mask_index) {
    if (p < 0 || p >= px.count())
      throw std::invalid_argument("masked_reconstruction_loss: mask index out of range");
    sum += (px.patches.row(p) - ph.patches.row(p)).squaredNorm();
    n += px.dim();
  }
  return n == 0 ? 0.0 : delta * sum / static_cast<double>(n);
}

ad::Var augmentation_contrastive_loss(const ad::Var& h, const ad::Var& h_prime, double tau,
                                      double lambda, bool cosine_normalize) {
  if (!(tau > 0.0)) throw std::invalid_argument("augmentation_contrastive_loss: tau must be > 0");
  if (h.rows() != h_prime.rows() || h.cols() != h_prime.cols())
    throw std::invalid_argument("augmentation_contrastive_loss: view shapes differ");
  const int B = static_cast<int>(h.rows());
  if (B < 1) throw std::invalid_argument("augmentation_contrastive_loss: empty batch");

  ad::Var a = h, b = h_prime;
  if (cosine_normalize) {
    auto normalize = [](const ad::Var& x) {
      ad::Var norm = ad::sqrt_(ad::add_scalar(ad::row_sum(ad::square_(x)), 1e-12));
      return ad::mul_colvec(x, ad::reciprocal_(norm));
    };
    a = normalize(a);
    b = normalize(b);
  }

  const double inv_tau = 1.0 / tau;
  ad::Var logits_within = ad::scale(ad::matmul(a, ad::transpose(a)), inv_tau);   // B x B
  ad::Var logits_cross = ad::scale(ad::matmul(a, ad::transpose(b)), inv_tau);    // B x B
  ad::Var shift = ad::row_max_detached(ad::concat_cols(logits_within, logits_cross));
  ad::Var ew = ad::exp_(ad::sub_colvec(logits_within, shift));
  ad::Var ec = ad::exp_(ad::sub_colvec(logits_cross, shift));
  ad::Matrix offdiag = ad::Matrix::Ones(B, B);
  offdiag.diagonal().setZero();
  ad::Var denom = ad::add(ad::row_sum(ad::hadamard(ew, ad::Var::constant(std::move(offdiag)))),
                          ad::row_sum(ec));
  ad::Var log_denom = ad::add(ad::log_(denom), shift);
  std::vector<std::pair<int, int>> diag;
  diag.reserve(B);
  for (int i = 0; i < B; ++i) diag.emplace_back(i, i);
  ad::Var positives = ad::gather_elems(logits_cross, std::move(diag), B, 1);
  return ad::scale(ad::mean_(ad::sub(log_denom, positives)), lambda);
}

ad::Var temporal_locality_loss(const std::vector<ad::Var>& per_modality, int batch, int length,
                               double eta, double margin) {
  if (batch < 2)
    throw std::invalid_argument("temporal_locality_loss: need >= 2 sequences for "
                                "inter-sequence pairs, got " + std::to_string(batch));
  if (length < 1) throw std::invalid_argument("temporal_locality_loss: length must be >= 1");
  if (per_modality.empty())
    throw std::invalid_argument("temporal_locality_loss: no modalities");

  ad::Var total;
  for (const auto& emb : per_modality) {
    if (emb.rows() != static_cast<long>(batch) * length)
      throw std::invalid_argument("temporal_locality_loss: embedding rows != B*L");
    // All (s, s', i, j) row pairs at once: C is the B*B column of average
    // pairwise distances, ordered (s, s') row-major.
    std::vector<int> left, right;
    left.reserve(static_cast<std::size_t>(batch) * batch * length * length);
    right.reserve(left.capacity());
    for (int s = 0; s < batch; ++s)
      for (int t = 0; t < batch; ++t)
        for (int i = 0; i < length; ++i)
          for (int j = 0; j < length; ++j) {
            left.push_back(s * length + i);
            right.push_back(t * length + j);
          }
    ad::Var x = ad::gather_rows(emb, std::move(left));
    ad::Var y = ad::gather_rows(emb, std::move(right));
    ad::Var d = ad::sqrt_(ad::row_sum(ad::square_(ad::sub(x, y))));
    ad::Var c = ad::row_block_mean(d, length * length);  // (B*B) x 1

    std::vector<int> intra, inter;
    intra.reserve(static_cast<std::size_t>(batch) * (batch - 1));
    inter.reserve(intra.capacity());
    for (int s = 0; s < batch; ++s)
      for (int t = 0; t < batch; ++t) {
        if (s == t) continue;
        intra.push_back(s * batch + s);
        inter.push_back(s * batch + t);
      }
    ad::Var hinge = ad::relu_(ad::add_scalar(
        ad::sub(ad::gather_rows(c, std::move(intra)), ad::gather_rows(c, std::move(inter))),
        margin));
    ad::Var m = ad::scale(ad::sum_(hinge), 1.0 / (static_cast<double>(batch) * (batch - 1)));
    total = total.defined() ? ad::add(total, m) : m;
  }
  return ad::scale(total, eta);
}

TotalLoss total_alignment_loss(const AlignmentTerms& terms, const SslHyper& ssl) {
  ssl.validate();
  TotalLoss out;
  out.breakdown.info_terms = terms.info_term_values;
  ad::Var total = ad::Var::scalar(0.0);

  auto fold = [&](const ad::Var& raw, double weight, double& raw_slot, double& weighted_slot) {
    if (!raw.defined()) return;
    raw_slot = raw.item();
    weighted_slot = weight * raw_slot;
    if (!std::isfinite(raw_slot))
      throw std::runtime_error("total_alignment_loss: non-finite term");
    total = ad::add(total, ad::scale(raw, weight));
  };

  fold(terms.shared_info, 1.0, out.breakdown.shared_info, out.breakdown.weighted_shared);
  fold(terms.private_info, 1.0, out.breakdown.private_info, out.breakdown.weighted_private);
  fold(terms.reconstruction_raw, ssl.delta, out.breakdown.reconstruction,
       out.breakdown.weighted_reconstruction);
  fold(terms.augmentation_raw, ssl.lambda, out.breakdown.augmentation,
       out.breakdown.weighted_augmentation);
  fold(terms.temporal_raw, ssl.eta, out.breakdown.temporal, out.breakdown.weighted_temporal);

  out.total = total;
  out.breakdown.weighted_total = total.item();
  return out;
}

}  // namespace infomae
