#pragma once

#include "infomae/autodiff.hpp"
#include "infomae/model.hpp"

#include <string>
#include <vector>

namespace infomae {

struct SslHyper {
  double delta = 1.0;   // reconstruction weight
  double lambda = 0.1;  // augmentation contrastive weight
  double tau = 0.5;     // temperature
  double eta = 0.1;     // temporal weight
  double margin = 1.0;
  bool cosine_normalize = false;  // inner products on normalized embeddings
  void validate() const;
};

// Every weighted term of the total objective plus the unweighted raw values.
struct LossBreakdown {
  double shared_info = 0, private_info = 0, reconstruction = 0, augmentation = 0, temporal = 0;
  double weighted_shared = 0, weighted_private = 0, weighted_reconstruction = 0,
         weighted_augmentation = 0, weighted_temporal = 0;
  double weighted_total = 0;
  std::vector<std::pair<std::string, double>> info_terms;  // per term_tag values
};

// delta * mean over masked patch entries of squared error, batch-averaged.
// pred is (B*P) x patch_dim, target the matching constant patches; all masks
// must carry the same masked count.
ad::Var masked_reconstruction_loss(const ad::Var& pred, const ad::Matrix& target,
                                   const std::vector<MaskSplit>& masks, int num_patches,
                                   double delta);

// Tensor-level form for single samples.
double masked_reconstruction_loss(const SpectrogramTensor& x, const SpectrogramTensor& x_hat,
                                  const std::vector<int>& mask_index, int patch_intervals,
                                  int patch_spectrum, double delta);

// InfoNCE over two augmented views: positives are the aligned rows, the
// denominator pools within-view (k != j) and cross-view (all k) similarities.
// Negative mean over the batch, lambda-weighted; max-shifted for stability.
ad::Var augmentation_contrastive_loss(const ad::Var& h, const ad::Var& h_prime, double tau,
                                      double lambda, bool cosine_normalize = false);

// Ranking hinge on average pairwise embedding distances: per modality
// sum_{s != s'} max(C_ss - C_ss' + margin, 0) / (B*(B-1)), summed over
// modalities and eta-weighted. Each entry of per_modality is (B*L) x D with
// rows grouped by sequence.
ad::Var temporal_locality_loss(const std::vector<ad::Var>& per_modality, int batch, int length,
                               double eta, double margin);

// Graph handles for the five objective terms; undefined Vars count as zero.
// The info totals come in already internally weighted (alpha/beta and
// gamma/epsilon are structural), the other three are raw and get their
// delta/lambda/eta weights here.
struct AlignmentTerms {
  ad::Var shared_info;
  ad::Var private_info;
  ad::Var reconstruction_raw;
  ad::Var augmentation_raw;
  ad::Var temporal_raw;
  std::vector<std::pair<std::string, double>> info_term_values;
};

struct TotalLoss {
  ad::Var total;
  LossBreakdown breakdown;
};

TotalLoss total_alignment_loss(const AlignmentTerms& terms, const SslHyper& ssl);

}  // namespace infomae
