#pragma once

#include "infomae/autodiff.hpp"

#include <vector>

namespace infomae {

// Linear warmup from 0 over ceil(warmup_fraction*total_steps) steps, then
// half-cosine decay to 0 at total_steps: lr = base * cos(pi/2 * progress)^2.
double cosine_warmup_lr(double base_lr, double warmup_fraction, int total_steps, int step);
std::vector<double> make_schedule(double base_lr, double warmup_fraction, int total_steps);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Decoupled-weight-decay adaptive-moment descent. step() consumes and zeroes
// the parameter gradients; parameters whose gradient never got touched decay
// only, matching the decoupled formulation.
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<ad::Var> params, AdamWConfig config);

  void step(double lr);
  void zero_grad();
  int steps_taken() const { return t_; }
  const std::vector<ad::Var>& params() const { return params_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<ad::Matrix> m_, v_;
  AdamWConfig config_;
  int t_ = 0;
};

}  // namespace infomae
