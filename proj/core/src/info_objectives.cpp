#include "infomae/info_objectives.hpp"

#include "infomae/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace infomae {

void InfoHyper::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw std::invalid_argument("InfoHyper: beta must be in [0,1]");
  if (alpha < 0 || gamma < 0 || epsilon < 0 || shared_cmi_weight < 0)
    throw std::invalid_argument("InfoHyper: weights must be >= 0");
}

Discriminator::Discriminator(std::string term_tag, std::vector<ArgSpec> args,
                             const DiscriminatorConfig& config, std::uint64_t seed)
    : tag_(std::move(term_tag)), args_(std::move(args)), config_(config) {
  // JOINT3 ratios are broken by permuting U (the last slot); every other term
  // permutes its second argument.
  shuffle_slot_ = tag_.rfind("JOINT3", 0) == 0 ? 2 : 1;

  auto rng = make_rng(seed, "disc_init");
  int concat_dim = 0;
  for (std::size_t a = 0; a < args_.size(); ++a) {
    const auto& spec = args_[a];
    if (spec.kind == ArgKind::Tensor) {
      const int pi = config_.conv_patch_intervals, ps = config_.conv_patch_spectrum;
      if (spec.intervals % pi != 0 || spec.spectrum % ps != 0)
        throw std::invalid_argument("Discriminator " + tag_ +
                                    ": conv patch does not divide tensor shape");
      const int patch_dim = spec.channels * pi * ps;
      const std::string p = "arg" + std::to_string(a) + "_";
      params_.add(p + "conv_w", dense_init(patch_dim, config_.conv_channels, rng));
      params_.add(p + "conv_b", ad::Matrix::Zero(1, config_.conv_channels));
      params_.add(p + "emb_w", dense_init(config_.conv_channels, config_.embed_dim, rng));
      params_.add(p + "emb_b", ad::Matrix::Zero(1, config_.embed_dim));
      concat_dim += config_.embed_dim;
    } else {
      concat_dim += spec.dim;
    }
  }
  // 5 affine layers ending in a single logit.
  const int h = config_.mlp_hidden;
  params_.add("mlp_w1", dense_init(concat_dim, h, rng));
  params_.add("mlp_b1", ad::Matrix::Zero(1, h));
  params_.add("mlp_w2", dense_init(h, h, rng));
  params_.add("mlp_b2", ad::Matrix::Zero(1, h));
  params_.add("mlp_w3", dense_init(h, h, rng));
  params_.add("mlp_b3", ad::Matrix::Zero(1, h));
  params_.add("mlp_w4", dense_init(h, h, rng));
  params_.add("mlp_b4", ad::Matrix::Zero(1, h));
  params_.add("mlp_w5", dense_init(h, 1, rng));
  params_.add("mlp_b5", ad::Matrix::Zero(1, 1));
}

ad::Var Discriminator::probability(const std::vector<ad::Var>& args) const {
  if (args.size() != args_.size())
    throw std::invalid_argument("Discriminator " + tag_ + ": arity mismatch, expected " +
                                std::to_string(args_.size()) + " inputs, got " +
                                std::to_string(args.size()));
  const long B = args.front().rows();
  ad::Var feat;
  for (std::size_t a = 0; a < args_.size(); ++a) {
    const auto& spec = args_[a];
    const auto& in = args[a];
    if (in.rows() != B)
      throw std::invalid_argument("Discriminator " + tag_ + ": ragged batch");
    if (in.cols() != spec.flat_dim())
      throw std::invalid_argument("Discriminator " + tag_ + ": arg " + std::to_string(a) +
                                  " width mismatch");
    ad::Var emb;
    if (spec.kind == ArgKind::Tensor) {
      const int pi = config_.conv_patch_intervals, ps = config_.conv_patch_spectrum;
      const int ni = spec.intervals / pi, ns = spec.spectrum / ps;
      const int P = ni * ns;
      const int patch_dim = spec.channels * pi * ps;
      std::vector<std::pair<int, int>> src;
      src.reserve(static_cast<std::size_t>(B) * P * patch_dim);
      for (long b = 0; b < B; ++b)
        for (int p = 0; p < P; ++p) {
          const int bi = p / ns, bs = p % ns;
          for (int c = 0; c < spec.channels; ++c)
            for (int di = 0; di < pi; ++di)
              for (int ds = 0; ds < ps; ++ds) {
                const int i = bi * pi + di, s = bs * ps + ds;
                src.emplace_back(static_cast<int>(b), (c * spec.intervals + i) * spec.spectrum + s);
              }
        }
      const std::string pfx = "arg" + std::to_string(a) + "_";
      ad::Var patches = ad::gather_elems(in, std::move(src), static_cast<int>(B) * P, patch_dim);
      ad::Var conv = ad::tanh_(ad::affine(patches, params_.get(pfx + "conv_w"), params_.get(pfx + "conv_b")));
      ad::Var pooled = ad::row_block_mean(conv, P);
      emb = ad::tanh_(ad::affine(pooled, params_.get(pfx + "emb_w"), params_.get(pfx + "emb_b")));
    } else {
      emb = in;
    }
    feat = feat.defined() ? ad::concat_cols(feat, emb) : emb;
  }
  ad::Var z = feat;
  for (int l = 1; l <= 4; ++l) {
    z = ad::tanh_(ad::affine(z, params_.get("mlp_w" + std::to_string(l)),
                             params_.get("mlp_b" + std::to_string(l))));
  }
  return ad::sigmoid_(ad::affine(z, params_.get("mlp_w5"), params_.get("mlp_b5")));
}

ad::Var log_density_ratio(const Discriminator& disc, const std::vector<ad::Var>& inputs) {
  ad::Var p = ad::clamp_(disc.probability(inputs), disc.clamp(), 1.0 - disc.clamp());
  return ad::sub(ad::log_(p), ad::log_(ad::add_scalar(ad::scale(p, -1.0), 1.0)));
}

ad::Var discriminator_loss(const Discriminator& disc, const std::vector<ad::Var>& joint_batch,
                           const std::vector<ad::Var>& product_batch) {
  if (joint_batch.empty() || product_batch.empty() || joint_batch.front().rows() == 0 ||
      product_batch.front().rows() == 0)
    throw std::invalid_argument("discriminator_loss: empty batch");
  ad::Var pj = ad::clamp_(disc.probability(joint_batch), disc.clamp(), 1.0 - disc.clamp());
  ad::Var pp = ad::clamp_(disc.probability(product_batch), disc.clamp(), 1.0 - disc.clamp());
  ad::Var joint_term = ad::scale(ad::mean_(ad::log_(pj)), -1.0);
  ad::Var prod_term = ad::scale(ad::mean_(ad::log_(ad::add_scalar(ad::scale(pp, -1.0), 1.0))), -1.0);
  return ad::add(joint_term, prod_term);
}

std::vector<int> sattolo_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    std::swap(p[i], p[pick(rng)]);
  }
  return p;
}

std::vector<ad::Matrix> build_product_batch(const std::vector<ad::Matrix>& slots,
                                            const std::vector<int>& shuffle_slots,
                                            std::uint64_t seed) {
  if (slots.empty()) throw std::invalid_argument("build_product_batch: no slots");
  const long B = slots.front().rows();
  if (B < 2)
    throw std::invalid_argument("build_product_batch: batch size must be >= 2 to construct "
                                "product-of-marginals negatives");
  std::vector<ad::Matrix> out = slots;
  auto rng = make_rng(seed, "product_batch");
  for (int s : shuffle_slots) {
    if (s < 0 || s >= static_cast<int>(slots.size()))
      throw std::invalid_argument("build_product_batch: shuffle slot out of range");
    std::vector<int> perm = sattolo_permutation(static_cast<int>(B), rng);
    ad::Matrix shuffled(B, slots[s].cols());
    for (long r = 0; r < B; ++r) shuffled.row(r) = slots[s].row(perm[r]);
    out[s] = std::move(shuffled);
  }
  return out;
}

DiscriminatorSet DiscriminatorSet::build(const ArgSpec& x1, const ArgSpec& x2, int shared_dim,
                                         int private_dim, const DiscriminatorConfig& config,
                                         std::uint64_t seed) {
  const ArgSpec u = ArgSpec::vector(shared_dim);
  const ArgSpec v = ArgSpec::vector(private_dim);
  DiscriminatorSet set;
  auto add = [&](const std::string& tag, std::vector<ArgSpec> args, int idx) {
    set.discs_.emplace_back(tag, std::move(args), config, derive_seed(seed, "disc", idx));
  };
  int idx = 0;
  for (int i = 1; i <= 2; ++i) {
    const ArgSpec& xs = (i == 1) ? x1 : x2;
    const ArgSpec& xc = (i == 1) ? x2 : x1;
    add(joint3_tag(i), {x1, x2, u}, idx++);
    add(self_tag(i), {xs, u}, idx++);
    add(cross_tag(i), {xc, u}, idx++);
  }
  for (int i = 1; i <= 2; ++i) {
    const ArgSpec& xs = (i == 1) ? x1 : x2;
    add(priv_self_tag(i), {xs, v}, idx++);
    add(priv_shared_tag(i), {v, u}, idx++);
  }
  return set;
}

std::string DiscriminatorSet::joint3_tag(int i) {
  return "JOINT3(X1,X2,U" + std::to_string(i) + ")";
}
std::string DiscriminatorSet::self_tag(int i) {
  return "SELF(X" + std::to_string(i) + ",U" + std::to_string(i) + ")";
}
std::string DiscriminatorSet::cross_tag(int i) {
  return "CROSS(X" + std::to_string(3 - i) + ",U" + std::to_string(i) + ")";
}
std::string DiscriminatorSet::priv_self_tag(int i) {
  return "PRIV_SELF(X" + std::to_string(i) + ",V" + std::to_string(i) + ")";
}
std::string DiscriminatorSet::priv_shared_tag(int i) {
  return "PRIV_SHARED(V" + std::to_string(i) + ",U" + std::to_string(i) + ")";
}

Discriminator& DiscriminatorSet::by_tag(const std::string& tag) {
  for (auto& d : discs_)
    if (d.term_tag() == tag) return d;
  throw std::invalid_argument("DiscriminatorSet: unknown term_tag " + tag);
}

const Discriminator& DiscriminatorSet::by_tag(const std::string& tag) const {
  for (const auto& d : discs_)
    if (d.term_tag() == tag) return d;
  throw std::invalid_argument("DiscriminatorSet: unknown term_tag " + tag);
}

std::vector<ad::Var> DiscriminatorSet::all_vars() const {
  std::vector<ad::Var> out;
  for (const auto& d : discs_) d.params().append_all(out);
  return out;
}

void DiscriminatorSet::set_frozen(bool frozen) {
  for (auto& d : discs_) d.params().set_frozen(frozen);
}

std::uint64_t DiscriminatorSet::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& d : discs_) h = mix64(h ^ d.params().content_hash());
  return h;
}

namespace {

double term_value(const ad::Var& v, const std::string& tag) {
  const double x = v.item();
  if (!std::isfinite(x))
    throw std::runtime_error("info loss: non-finite term " + tag);
  return x;
}

}  // namespace

InfoLossResult shared_info_loss(const ad::Var& u1, const ad::Var& u2, const ad::Var& x1,
                                const ad::Var& x2, const DiscriminatorSet& discs,
                                const InfoHyper& hyper) {
  hyper.validate();
  if (u1.rows() != u2.rows() || u1.rows() != x1.rows() || x1.rows() != x2.rows())
    throw std::invalid_argument("shared_info_loss: batch misalignment");

  InfoLossResult out;
  ad::Var dist = ad::mean_(ad::row_sum(ad::square_(ad::sub(u1, u2))));
  out.breakdown.emplace_back("distance(U1,U2)", term_value(dist, "distance(U1,U2)"));
  out.total = ad::scale(dist, hyper.alpha);

  if (hyper.shared_cmi_weight > 0.0) {
    for (int i = 1; i <= 2; ++i) {
      const ad::Var& u = (i == 1) ? u1 : u2;
      const ad::Var& xs = (i == 1) ? x1 : x2;
      const ad::Var& xc = (i == 1) ? x2 : x1;
      const std::string jt = DiscriminatorSet::joint3_tag(i);
      const std::string st = DiscriminatorSet::self_tag(i);
      const std::string ct = DiscriminatorSet::cross_tag(i);
      ad::Var ej = ad::mean_(log_density_ratio(discs.by_tag(jt), {x1, x2, u}));
      ad::Var es = ad::mean_(log_density_ratio(discs.by_tag(st), {xs, u}));
      ad::Var ec = ad::mean_(log_density_ratio(discs.by_tag(ct), {xc, u}));
      out.breakdown.emplace_back(jt, term_value(ej, jt));
      out.breakdown.emplace_back(st, term_value(es, st));
      out.breakdown.emplace_back(ct, term_value(ec, ct));
      ad::Var group = ad::sub(ej, ad::add(ad::scale(es, 1.0 - hyper.beta), ec));
      out.total = ad::add(out.total, ad::scale(group, hyper.shared_cmi_weight));
    }
  }
  term_value(out.total, "shared_info total");
  return out;
}

InfoLossResult private_info_loss(const ad::Var& v1, const ad::Var& v2, const ad::Var& u1,
                                 const ad::Var& u2, const ad::Var& x1, const ad::Var& x2,
                                 const DiscriminatorSet& discs, const InfoHyper& hyper) {
  hyper.validate();
  if (v1.rows() != v2.rows() || v1.rows() != x1.rows() || x1.rows() != x2.rows())
    throw std::invalid_argument("private_info_loss: batch misalignment");

  InfoLossResult out;
  out.total = ad::Var::scalar(0.0);
  for (int i = 1; i <= 2; ++i) {
    const ad::Var& v = (i == 1) ? v1 : v2;
    const ad::Var& u = (i == 1) ? u1 : u2;
    const ad::Var& xs = (i == 1) ? x1 : x2;
    if (hyper.gamma > 0.0) {
      const std::string pt = DiscriminatorSet::priv_self_tag(i);
      ad::Var ep = ad::mean_(log_density_ratio(discs.by_tag(pt), {xs, v}));
      out.breakdown.emplace_back(pt, term_value(ep, pt));
      out.total = ad::add(out.total, ad::scale(ep, hyper.gamma));
    }
    if (hyper.epsilon > 0.0) {
      const std::string st = DiscriminatorSet::priv_shared_tag(i);
      ad::Var es = ad::mean_(log_density_ratio(discs.by_tag(st), {v, u}));
      out.breakdown.emplace_back(st, term_value(es, st));
      out.total = ad::add(out.total, ad::scale(es, hyper.epsilon));
    }
  }
  term_value(out.total, "private_info total");
  return out;
}

}  // namespace infomae
