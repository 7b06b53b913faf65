#include "infomae/synthetic.hpp"

#include "infomae/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace infomae {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace detail {
struct PairFieldAccess {
  static void set_pair(SampleRecord& r, int pid) { r.pair_id_ = pid; }
  static int raw_pair(const SampleRecord& r) { return r.pair_id_; }
  static void bind_counter(SampleRecord& r, std::shared_ptr<std::atomic<std::uint64_t>> c) {
    r.pair_reads_ = std::move(c);
  }
  static void init_counter(SyntheticDataset& d) {
    d.pair_reads_ = std::make_shared<std::atomic<std::uint64_t>>(0);
  }
  static const std::shared_ptr<std::atomic<std::uint64_t>>& counter(const SyntheticDataset& d) {
    return d.pair_reads_;
  }
};
}  // namespace detail

using detail::PairFieldAccess;

void WorldConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("WorldConfig: " + m); };
  if (num_modalities < 2) fail("num_modalities must be >= 2");
  if (shared_dim < 1) fail("shared_dim must be >= 1");
  if (private_dim < 1) fail("private_dim must be >= 1");
  if (intervals < 1) fail("intervals must be >= 1");
  if (static_cast<int>(channels.size()) != num_modalities)
    fail("channels needs one entry per modality");
  if (static_cast<int>(spectrum.size()) != num_modalities)
    fail("spectrum needs one entry per modality");
  for (int m = 0; m < num_modalities; ++m) {
    if (channels[m] < 1) fail("channels must be >= 1");
    if (spectrum[m] < 1) fail("spectrum must be >= 1");
    if (tensor_dim(m) < shared_dim + private_dim)
      fail("C*I*S must be >= shared_dim + private_dim for every modality");
  }
  if (observation_noise_sigma < 0) fail("observation_noise_sigma must be >= 0");
  if (!(latent_walk_rho >= 0.0 && latent_walk_rho < 1.0)) fail("latent_walk_rho in [0,1)");
  if (num_sequences < 1) fail("num_sequences must be >= 1");
  if (sequence_length < 1) fail("sequence_length must be >= 1");
  if (!(pair_ratio > 0.0 && pair_ratio <= 1.0)) fail("pair_ratio in (0,1]");
  if (num_classes < 2) fail("num_classes must be >= 2");
}

int WorldConfig::tensor_dim(int modality) const {
  return channels.at(modality) * intervals * spectrum.at(modality);
}

int num_paired_indices(const WorldConfig& config) {
  const double want = config.pair_ratio * static_cast<double>(config.total_time_indices());
  int n = static_cast<int>(std::ceil(want));
  return std::min(n, config.total_time_indices());
}

int label_of(const Eigen::VectorXd& shared_latent, int num_classes) {
  const double z0 = shared_latent(0);
  const double z1 = shared_latent.size() >= 2 ? shared_latent(1) : 0.0;
  const double angle = std::atan2(z1, z0);  // [-pi, pi]
  double t = (angle + std::numbers::pi) / (2.0 * std::numbers::pi);
  int bin = static_cast<int>(std::floor(t * num_classes));
  return std::clamp(bin, 0, num_classes - 1);
}

bool SampleRecord::has_pair() const {
  if (pair_reads_) pair_reads_->fetch_add(1);
  return pair_id_ >= 0;
}

int SampleRecord::pair_id() const {
  if (pair_reads_) pair_reads_->fetch_add(1);
  if (pair_id_ < 0)
    throw std::logic_error("SampleRecord: sample is not in the synchronized set");
  return pair_id_;
}

const SampleRecord& SyntheticDataset::record(int modality, int time_index) const {
  return records.at(modality).at(time_index);
}

namespace {

// Partial Fisher-Yates: first k entries of a shuffled [0, n).
std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& rng) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

namespace {
SyntheticDataset generate_world_impl(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  const int M = config.num_modalities;
  const int k = config.shared_dim;
  const int m = config.private_dim;
  const int latent_dim = k + M * m;
  const int total = config.total_time_indices();
  const double rho = config.latent_walk_rho;
  const double innov = std::sqrt(1.0 - rho * rho);

  // Fixed mixing maps, drawn from mixing_seed only.
  std::vector<Eigen::MatrixXd> mixing(M);
  for (int mi = 0; mi < M; ++mi) {
    auto rng = make_rng(config.mixing_seed, "mixing", static_cast<std::uint64_t>(mi));
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd a(config.tensor_dim(mi), k + m);
    const double s = 1.0 / std::sqrt(static_cast<double>(k + m));
    for (long r = 0; r < a.rows(); ++r)
      for (long c = 0; c < a.cols(); ++c) a(r, c) = gauss(rng) * s;
    mixing[mi] = std::move(a);
  }

  SyntheticDataset ds;
  ds.config = config;
  ds.seed = seed;
  PairFieldAccess::init_counter(ds);
  ds.records.assign(M, {});
  for (int mi = 0; mi < M; ++mi) ds.records[mi].reserve(total);

  auto latent_rng = make_rng(seed, "latent");
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::mt19937_64> noise_rng;
  for (int mi = 0; mi < M; ++mi) noise_rng.push_back(make_rng(seed, "noise", mi));

  Eigen::VectorXd z(latent_dim);
  for (int s = 0; s < config.num_sequences; ++s) {
    for (int t = 0; t < config.sequence_length; ++t) {
      if (t == 0) {
        for (int d = 0; d < latent_dim; ++d) z(d) = gauss(latent_rng);
      } else {
        for (int d = 0; d < latent_dim; ++d) z(d) = rho * z(d) + innov * gauss(latent_rng);
      }
      Eigen::VectorXd shared = z.head(k);
      const int label = label_of(shared, config.num_classes);
      for (int mi = 0; mi < M; ++mi) {
        Eigen::VectorXd lat(k + m);
        lat.head(k) = shared;
        lat.tail(m) = z.segment(k + mi * m, m);
        Eigen::VectorXd obs = mixing[mi] * lat;
        if (config.observation_noise_sigma > 0.0) {
          for (long d = 0; d < obs.size(); ++d)
            obs(d) += config.observation_noise_sigma * gauss(noise_rng[mi]);
        }
        SampleRecord rec;
        rec.modality_id = mi;
        rec.sequence_id = s;
        rec.position_in_sequence = t;
        rec.class_label = label;
        rec.true_shared_latent = shared;
        PairFieldAccess::bind_counter(rec, PairFieldAccess::counter(ds));
        rec.tensor = SpectrogramTensor(config.channels[mi], config.intervals, config.spectrum[mi]);
        for (long d = 0; d < obs.size(); ++d) rec.tensor.flat()[d] = obs(d);
        rec.tensor.quantize_f32();
        if (!rec.tensor.all_finite())
          throw std::runtime_error("generate_world: non-finite observation (bad config)");
        ds.records[mi].push_back(std::move(rec));
      }
    }
  }

  auto pair_rng = make_rng(seed, "pairing");
  std::vector<int> chosen = sample_without_replacement(total, num_paired_indices(config), pair_rng);
  std::sort(chosen.begin(), chosen.end());
  ds.paired_time_indices = chosen;
  for (int p = 0; p < static_cast<int>(chosen.size()); ++p)
    for (int mi = 0; mi < M; ++mi) PairFieldAccess::set_pair(ds.records[mi][chosen[p]], p);
  return ds;
}

}  // namespace

SyntheticDataset generate_world(const WorldConfig& config, std::uint64_t seed) {
  return generate_world_impl(config, seed);
}

void reassign_pairing(SyntheticDataset& dataset, double pair_ratio) {
  if (!(pair_ratio > 0.0 && pair_ratio <= 1.0))
    throw std::invalid_argument("reassign_pairing: pair_ratio in (0,1]");
  dataset.config.pair_ratio = pair_ratio;
  for (auto& mod : dataset.records)
    for (auto& rec : mod) PairFieldAccess::set_pair(rec, -1);
  auto pair_rng = make_rng(dataset.seed, "pairing");
  std::vector<int> chosen = sample_without_replacement(dataset.config.total_time_indices(),
                                                       num_paired_indices(dataset.config), pair_rng);
  std::sort(chosen.begin(), chosen.end());
  dataset.paired_time_indices = chosen;
  for (int p = 0; p < static_cast<int>(chosen.size()); ++p)
    for (auto& mod : dataset.records) PairFieldAccess::set_pair(mod[chosen[p]], p);
}

SequenceBatch sample_sequence_batch(const SyntheticDataset& dataset, int modality_id, int batch,
                                    int length, std::uint64_t seed) {
  const auto& cfg = dataset.config;
  if (modality_id < 0 || modality_id >= cfg.num_modalities)
    throw std::invalid_argument("sample_sequence_batch: bad modality_id");
  if (length < 1 || length > cfg.sequence_length)
    throw std::invalid_argument("sample_sequence_batch: length " + std::to_string(length) +
                                " exceeds sequence_length " + std::to_string(cfg.sequence_length));
  if (batch > cfg.num_sequences)
    throw std::invalid_argument("sample_sequence_batch: need " + std::to_string(batch) +
                                " sequences, dataset has " + std::to_string(cfg.num_sequences));
  auto rng = make_rng(seed, "seq_batch");
  std::vector<int> seqs = sample_without_replacement(cfg.num_sequences, batch, rng);
  SequenceBatch out;
  out.groups.reserve(batch);
  for (int s : seqs) {
    std::uniform_int_distribution<int> start_pick(0, cfg.sequence_length - length);
    const int start = start_pick(rng);
    std::vector<SampleRecord> group;
    group.reserve(length);
    for (int l = 0; l < length; ++l)
      group.push_back(dataset.record(modality_id, s * cfg.sequence_length + start + l));
    out.groups.push_back(std::move(group));
  }
  return out;
}

PairedBatch sample_paired_batch(const SyntheticDataset& dataset, int batch, std::uint64_t seed) {
  const int have = dataset.num_pairs();
  if (batch > have)
    throw std::invalid_argument("sample_paired_batch: requested " + std::to_string(batch) +
                                " pairs, dataset has " + std::to_string(have));
  auto rng = make_rng(seed, "pair_batch");
  std::vector<int> pick = sample_without_replacement(have, batch, rng);
  PairedBatch out;
  out.tuples.reserve(batch);
  for (int p : pick) {
    const int t = dataset.paired_time_indices[p];
    std::vector<SampleRecord> tuple;
    tuple.reserve(dataset.config.num_modalities);
    for (int mi = 0; mi < dataset.config.num_modalities; ++mi)
      tuple.push_back(dataset.record(mi, t));
    out.tuples.push_back(std::move(tuple));
  }
  return out;
}

std::vector<PairedBatch> paired_epoch(const SyntheticDataset& dataset, int batch,
                                      std::uint64_t seed) {
  const int have = dataset.num_pairs();
  if (have == 0) throw std::invalid_argument("paired_epoch: dataset has no pairs");
  if (batch < 1) throw std::invalid_argument("paired_epoch: batch must be >= 1");
  auto rng = make_rng(seed, "pair_epoch");
  std::vector<int> order = sample_without_replacement(have, have, rng);
  std::vector<PairedBatch> out;
  for (int at = 0; at < have; at += batch) {
    PairedBatch b;
    for (int i = at; i < std::min(at + batch, have); ++i) {
      const int t = dataset.paired_time_indices[order[i]];
      std::vector<SampleRecord> tuple;
      for (int mi = 0; mi < dataset.config.num_modalities; ++mi)
        tuple.push_back(dataset.record(mi, t));
      b.tuples.push_back(std::move(tuple));
    }
    out.push_back(std::move(b));
  }
  return out;
}

PairedSequenceBatch sample_paired_sequence_batch(const SyntheticDataset& dataset, int batch,
                                                 int length, std::uint64_t seed) {
  const auto& cfg = dataset.config;
  // Sequences with at least `length` paired time indices qualify.
  std::vector<std::vector<int>> per_seq(cfg.num_sequences);
  for (int t : dataset.paired_time_indices) per_seq[t / cfg.sequence_length].push_back(t);
  std::vector<int> eligible;
  for (int s = 0; s < cfg.num_sequences; ++s)
    if (static_cast<int>(per_seq[s].size()) >= length) eligible.push_back(s);
  if (static_cast<int>(eligible.size()) < batch)
    throw std::invalid_argument(
        "sample_paired_sequence_batch: need " + std::to_string(batch) + " sequences with >= " +
        std::to_string(length) + " paired samples, dataset has " +
        std::to_string(eligible.size()));
  auto rng = make_rng(seed, "pair_seq_batch");
  std::vector<int> pick = sample_without_replacement(static_cast<int>(eligible.size()), batch, rng);
  PairedSequenceBatch out;
  out.groups.reserve(batch);
  for (int e : pick) {
    const auto& times = per_seq[eligible[e]];  // ascending by construction
    std::uniform_int_distribution<int> start_pick(0, static_cast<int>(times.size()) - length);
    const int start = start_pick(rng);
    std::vector<std::vector<SampleRecord>> group;
    group.reserve(length);
    for (int l = 0; l < length; ++l) {
      std::vector<SampleRecord> tuple;
      for (int mi = 0; mi < cfg.num_modalities; ++mi)
        tuple.push_back(dataset.record(mi, times[start + l]));
      group.push_back(std::move(tuple));
    }
    out.groups.push_back(std::move(group));
  }
  return out;
}

void AugmentPolicy::validate() const {
  for (const auto& t : transforms) {
    if (t.prob < 0.0 || t.prob > 1.0)
      throw std::invalid_argument("AugmentPolicy: probability must be in [0,1]");
    switch (t.kind) {
      case AugmentKind::TimeIntervalMask:
      case AugmentKind::FrequencyBandMask:
        if (t.a < 0.0 || t.a > 1.0)
          throw std::invalid_argument("AugmentPolicy: mask fraction must be in [0,1]");
        break;
      case AugmentKind::AdditiveGaussianNoise:
        if (t.a < 0.0) throw std::invalid_argument("AugmentPolicy: noise sigma must be >= 0");
        break;
      case AugmentKind::AmplitudeScale:
        if (t.b < t.a) throw std::invalid_argument("AugmentPolicy: scale range b < a");
        break;
      case AugmentKind::IntervalShift:
        if (t.a < 0.0) throw std::invalid_argument("AugmentPolicy: max offset must be >= 0");
        break;
    }
  }
}

AugmentPolicy AugmentPolicy::default_policy() {
  AugmentPolicy p;
  p.transforms = {
      {AugmentKind::AmplitudeScale, 0.5, 0.9, 1.1},
      {AugmentKind::AdditiveGaussianNoise, 0.5, 0.05, 0.0},
      {AugmentKind::TimeIntervalMask, 0.3, 0.2, 0.0},
      {AugmentKind::FrequencyBandMask, 0.3, 0.2, 0.0},
      {AugmentKind::IntervalShift, 0.3, 2.0, 0.0},
  };
  return p;
}

SpectrogramTensor augment(const SampleRecord& record, const AugmentPolicy& policy,
                          std::uint64_t seed) {
  policy.validate();
  SpectrogramTensor out = record.tensor;
  auto rng = make_rng(seed, "augment");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int C = out.channels(), I = out.intervals(), S = out.spectrum();
  for (const auto& t : policy.transforms) {
    if (unit(rng) >= t.prob) continue;
    switch (t.kind) {
      case AugmentKind::AmplitudeScale: {
        const double s = t.a + (t.b - t.a) * unit(rng);
        for (double& v : out.flat()) v *= s;
        break;
      }
      case AugmentKind::AdditiveGaussianNoise: {
        for (double& v : out.flat()) v += t.a * gauss(rng);
        break;
      }
      case AugmentKind::TimeIntervalMask: {
        const int max_len = static_cast<int>(std::floor(t.a * I));
        if (max_len == 0) break;
        std::uniform_int_distribution<int> len_pick(1, max_len);
        const int len = len_pick(rng);
        std::uniform_int_distribution<int> start_pick(0, I - len);
        const int start = start_pick(rng);
        for (int c = 0; c < C; ++c)
          for (int i = start; i < start + len; ++i)
            for (int s = 0; s < S; ++s) out.at(c, i, s) = 0.0;
        break;
      }
      case AugmentKind::FrequencyBandMask: {
        const int max_len = static_cast<int>(std::floor(t.a * S));
        if (max_len == 0) break;
        std::uniform_int_distribution<int> len_pick(1, max_len);
        const int len = len_pick(rng);
        std::uniform_int_distribution<int> start_pick(0, S - len);
        const int start = start_pick(rng);
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < I; ++i)
            for (int s = start; s < start + len; ++s) out.at(c, i, s) = 0.0;
        break;
      }
      case AugmentKind::IntervalShift: {
        const int max_off = static_cast<int>(std::floor(t.a));
        if (max_off == 0) break;
        std::uniform_int_distribution<int> off_pick(-max_off, max_off);
        const int off = off_pick(rng);
        if (off == 0) break;
        SpectrogramTensor shifted = out;
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < I; ++i) {
            const int src = ((i - off) % I + I) % I;
            for (int s = 0; s < S; ++s) shifted.at(c, i, s) = out.at(c, src, s);
          }
        out = shifted;
        break;
      }
    }
  }
  out.quantize_f32();
  return out;
}

namespace {

void write_exact(std::ofstream& f, const void* data, std::size_t bytes) {
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_exact(std::ifstream& f, void* data, std::size_t bytes) {
  f.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!f) throw std::runtime_error("dataset import: truncated file");
}

}  // namespace

void export_dataset(const SyntheticDataset& dataset, const std::string& dir) {
  fs::create_directories(dir);
  const auto& cfg = dataset.config;
  json meta;
  meta["schema_version"] = "1";
  meta["seed"] = dataset.seed;
  meta["config"] = {
      {"num_modalities", cfg.num_modalities}, {"shared_dim", cfg.shared_dim},
      {"private_dim", cfg.private_dim},       {"channels", cfg.channels},
      {"intervals", cfg.intervals},           {"spectrum", cfg.spectrum},
      {"mixing_seed", cfg.mixing_seed},       {"observation_noise_sigma", cfg.observation_noise_sigma},
      {"latent_walk_rho", cfg.latent_walk_rho}, {"num_sequences", cfg.num_sequences},
      {"sequence_length", cfg.sequence_length}, {"pair_ratio", cfg.pair_ratio},
      {"num_classes", cfg.num_classes}};
  meta["num_pairs"] = dataset.num_pairs();
  json mods = json::array();
  for (int mi = 0; mi < cfg.num_modalities; ++mi) {
    mods.push_back({{"modality_id", mi},
                    {"num_records", dataset.num_records(mi)},
                    {"tensor_file", "modality_" + std::to_string(mi) + ".f32"},
                    {"index_file", "modality_" + std::to_string(mi) + ".idx"}});
  }
  meta["modalities"] = mods;
  meta["shared_latents_file"] = "shared_latents.f64";
  {
    std::ofstream mf(fs::path(dir) / "meta.json");
    mf << meta.dump(2) << "\n";
  }

  for (int mi = 0; mi < cfg.num_modalities; ++mi) {
    std::ofstream tf(fs::path(dir) / ("modality_" + std::to_string(mi) + ".f32"),
                     std::ios::binary);
    std::ofstream xf(fs::path(dir) / ("modality_" + std::to_string(mi) + ".idx"),
                     std::ios::binary);
    std::int64_t offset = 0;
    for (const auto& rec : dataset.records[mi]) {
      for (double v : rec.tensor.flat()) {
        const float f = static_cast<float>(v);
        write_exact(tf, &f, sizeof(float));
      }
      const std::int64_t row[5] = {offset, rec.sequence_id, rec.position_in_sequence,
                                   static_cast<std::int64_t>(PairFieldAccess::raw_pair(rec)),
                                   rec.class_label};
      write_exact(xf, row, sizeof(row));
      offset += static_cast<std::int64_t>(rec.tensor.size() * sizeof(float));
    }
  }

  {
    std::ofstream lf(fs::path(dir) / "shared_latents.f64", std::ios::binary);
    for (const auto& rec : dataset.records[0])
      write_exact(lf, rec.true_shared_latent.data(),
                  sizeof(double) * static_cast<std::size_t>(cfg.shared_dim));
  }
}

SyntheticDataset import_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("dataset import: missing " + dir + "/meta.json");
  json meta = json::parse(mf);
  if (meta.at("schema_version").get<std::string>() != "1")
    throw std::runtime_error("dataset import: unsupported schema version");

  WorldConfig cfg;
  const auto& jc = meta.at("config");
  cfg.num_modalities = jc.at("num_modalities").get<int>();
  cfg.shared_dim = jc.at("shared_dim").get<int>();
  cfg.private_dim = jc.at("private_dim").get<int>();
  cfg.channels = jc.at("channels").get<std::vector<int>>();
  cfg.intervals = jc.at("intervals").get<int>();
  cfg.spectrum = jc.at("spectrum").get<std::vector<int>>();
  cfg.mixing_seed = jc.at("mixing_seed").get<std::uint64_t>();
  cfg.observation_noise_sigma = jc.at("observation_noise_sigma").get<double>();
  cfg.latent_walk_rho = jc.at("latent_walk_rho").get<double>();
  cfg.num_sequences = jc.at("num_sequences").get<int>();
  cfg.sequence_length = jc.at("sequence_length").get<int>();
  cfg.pair_ratio = jc.at("pair_ratio").get<double>();
  cfg.num_classes = jc.at("num_classes").get<int>();
  cfg.validate();

  SyntheticDataset ds;
  ds.config = cfg;
  ds.seed = meta.at("seed").get<std::uint64_t>();
  PairFieldAccess::init_counter(ds);
  ds.records.assign(cfg.num_modalities, {});

  std::vector<Eigen::VectorXd> latents;
  {
    std::ifstream lf(fs::path(dir) / meta.at("shared_latents_file").get<std::string>(),
                     std::ios::binary);
    if (!lf) throw std::runtime_error("dataset import: missing shared latents file");
    const int total = cfg.total_time_indices();
    latents.resize(total);
    for (int t = 0; t < total; ++t) {
      Eigen::VectorXd z(cfg.shared_dim);
      read_exact(lf, z.data(), sizeof(double) * static_cast<std::size_t>(cfg.shared_dim));
      latents[t] = std::move(z);
    }
  }

  std::vector<int> paired;
  for (const auto& jm : meta.at("modalities")) {
    const int mi = jm.at("modality_id").get<int>();
    const int n = jm.at("num_records").get<int>();
    std::ifstream tf(fs::path(dir) / jm.at("tensor_file").get<std::string>(), std::ios::binary);
    std::ifstream xf(fs::path(dir) / jm.at("index_file").get<std::string>(), std::ios::binary);
    if (!tf || !xf) throw std::runtime_error("dataset import: missing modality files");
    auto& out = ds.records.at(mi);
    out.reserve(n);
    for (int r = 0; r < n; ++r) {
      std::int64_t row[5];
      read_exact(xf, row, sizeof(row));
      SampleRecord rec;
      rec.modality_id = mi;
      rec.sequence_id = static_cast<int>(row[1]);
      rec.position_in_sequence = static_cast<int>(row[2]);
      PairFieldAccess::set_pair(rec, static_cast<int>(row[3]));
      rec.class_label = static_cast<int>(row[4]);
      PairFieldAccess::bind_counter(rec, PairFieldAccess::counter(ds));
      rec.tensor = SpectrogramTensor(cfg.channels[mi], cfg.intervals, cfg.spectrum[mi]);
      tf.seekg(row[0]);
      for (double& v : rec.tensor.flat()) {
        float f;
        read_exact(tf, &f, sizeof(float));
        v = static_cast<double>(f);
      }
      const int t = rec.sequence_id * cfg.sequence_length + rec.position_in_sequence;
      rec.true_shared_latent = latents.at(t);
      if (mi == 0 && PairFieldAccess::raw_pair(rec) >= 0) paired.push_back(t);
      out.push_back(std::move(rec));
    }
  }
  std::sort(paired.begin(), paired.end());
  ds.paired_time_indices = std::move(paired);
  return ds;
}

}  // namespace infomae
