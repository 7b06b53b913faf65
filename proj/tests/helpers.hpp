#pragma once

#include "infomae/autodiff.hpp"
#include "infomae/rng.hpp"
#include "infomae/synthetic.hpp"
#include "infomae/training.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace infomae::testing {

// Central finite differences against analytic gradients for every entry of
// every parameter. build() must assemble an identical graph on every call.
inline double max_grad_rel_err(const std::function<ad::Var()>& build,
                               std::vector<ad::Var> params, double step = 1e-5) {
  for (auto& p : params) p.mutable_grad().setZero();
  ad::Var loss = build();
  ad::backward(loss);
  std::vector<ad::Matrix> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(p.grad());

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Matrix& value = params[pi].mutable_value();
    for (long c = 0; c < value.cols(); ++c)
      for (long r = 0; r < value.rows(); ++r) {
        const double keep = value(r, c);
        value(r, c) = keep + step;
        const double fp = build().item();
        value(r, c) = keep - step;
        const double fm = build().item();
        value(r, c) = keep;
        const double numeric = (fp - fm) / (2.0 * step);
        const double a = analytic[pi](r, c);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
  }
  for (auto& p : params) p.mutable_grad().setZero();
  return worst;
}

inline ad::Matrix random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  auto rng = make_rng(seed, "test_matrix");
  std::normal_distribution<double> gauss(0.0, 1.0);
  ad::Matrix m(rows, cols);
  for (long c = 0; c < cols; ++c)
    for (long r = 0; r < rows; ++r) m(r, c) = gauss(rng) * scale;
  return m;
}

inline WorldConfig tiny_world(int num_sequences = 40, int sequence_length = 12,
                              double pair_ratio = 0.25) {
  WorldConfig w;
  w.num_modalities = 2;
  w.shared_dim = 2;
  w.private_dim = 2;
  w.channels = {1, 1};
  w.intervals = 4;
  w.spectrum = {4, 4};
  w.observation_noise_sigma = 0.05;
  w.latent_walk_rho = 0.8;
  w.num_sequences = num_sequences;
  w.sequence_length = sequence_length;
  w.pair_ratio = pair_ratio;
  w.num_classes = 4;
  return w;
}

inline TrainConfig tiny_train(Stage stage, std::uint64_t seed = 1) {
  TrainConfig t;
  t.stage = stage;
  t.epochs = 2;
  t.batch_size = 32;
  t.align_groups = 4;
  t.sequence_length = 2;
  t.seed = seed;
  t.model.patch_intervals = 2;
  t.model.patch_spectrum = 2;
  t.model.embed_dim = 12;
  t.model.encoder_depth = 1;
  t.model.decoder_depth = 1;
  t.model.shared_dim = 2;
  t.model.private_dim = 2;
  t.disc.conv_channels = 6;
  t.disc.embed_dim = 6;
  t.disc.mlp_hidden = 10;
  return t;
}

}  // namespace infomae::testing
