#include "infomae/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace infomae {

double cosine_warmup_lr(double base_lr, double warmup_fraction, int total_steps, int step) {
  if (total_steps < 1) throw std::invalid_argument("schedule: total_steps must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw std::invalid_argument("schedule: warmup_fraction in [0,1]");
  const int warmup = static_cast<int>(std::ceil(warmup_fraction * total_steps));
  if (step < warmup) return base_lr * static_cast<double>(step) / warmup;
  if (total_steps == warmup) return 0.0;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  const double c = std::cos(std::numbers::pi / 2.0 * std::min(progress, 1.0));
  return base_lr * c * c;
}

std::vector<double> make_schedule(double base_lr, double warmup_fraction, int total_steps) {
  std::vector<double> out(total_steps);
  for (int s = 0; s < total_steps; ++s) out[s] = cosine_warmup_lr(base_lr, warmup_fraction, total_steps, s);
  return out;
}

AdamW::AdamW(std::vector<ad::Var> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, t_);
  const double bc2 = 1.0 - std::pow(config_.beta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const ad::Matrix& g = p.grad();
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    const ad::Matrix mhat = m_[i] / bc1;
    const ad::Matrix vhat = v_[i] / bc2;
    p.mutable_value() -=
        lr * (mhat.array() / (vhat.array().sqrt() + config_.eps) +
              config_.weight_decay * p.value().array())
            .matrix();
    if (!p.value().allFinite())
      throw std::runtime_error("AdamW: parameters became non-finite after update");
    p.mutable_grad().setZero();
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.mutable_grad().setZero();
}

}  // namespace infomae
