#include "infomae/dispatch.hpp"

#include "infomae/config.hpp"
#include "infomae/report.hpp"
#include "infomae/rng.hpp"
#include "infomae/run_dir.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

namespace infomae {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::vector<fs::path> convention_unimodal_paths(const fs::path& base, const ExperimentConfig& cfg) {
  std::vector<fs::path> out;
  const fs::path dir =
      base / cfg.run_base / cfg.run_name / ("pretrain-" + std::to_string(cfg.seed));
  for (int m = 0; m < cfg.world.num_modalities; ++m)
    out.push_back(dir / ("checkpoint_modality_" + std::to_string(m) + ".ckpt"));
  return out;
}

std::vector<Checkpoint> load_unimodal_checkpoints(const fs::path& base,
                                                  const ExperimentConfig& cfg,
                                                  std::vector<fs::path>* used_paths) {
  std::vector<fs::path> paths;
  if (!cfg.unimodal_checkpoints.empty()) {
    for (const auto& p : cfg.unimodal_checkpoints) paths.push_back(resolve(base, p));
  } else {
    paths = convention_unimodal_paths(base, cfg);
  }
  std::string missing;
  for (const auto& p : paths)
    if (!fs::exists(p)) missing += "\n  " + p.string();
  if (!missing.empty())
    throw std::runtime_error("missing unimodal checkpoints (run `infomae pretrain` first); "
                             "expected:" + missing);
  std::vector<Checkpoint> ckpts;
  for (const auto& p : paths) ckpts.push_back(Checkpoint::load(p.string()));
  if (used_paths) *used_paths = paths;
  return ckpts;
}

std::vector<fs::path> probe_checkpoint_paths(const fs::path& base, const ExperimentConfig& cfg,
                                             std::string* attempted) {
  if (!cfg.eval_checkpoints.empty()) {
    std::vector<fs::path> out;
    for (const auto& p : cfg.eval_checkpoints) out.push_back(resolve(base, p));
    return out;
  }
  const fs::path root = base / cfg.run_base / cfg.run_name;
  const std::string s = std::to_string(cfg.seed);
  std::vector<std::vector<fs::path>> candidates = {
      {root / ("align-" + s) / "checkpoint_aligned.ckpt"},
      {root / ("joint-" + s) / "checkpoint_joint.ckpt"},
      convention_unimodal_paths(base, cfg)};
  for (const auto& set : candidates) {
    bool all = true;
    for (const auto& p : set) all = all && fs::exists(p);
    if (all) return set;
    if (attempted)
      for (const auto& p : set) *attempted += "\n  " + p.string();
  }
  return {};
}

void write_checkpoint_guarded(const Checkpoint& ckpt, const fs::path& path) {
  ckpt.save(path.string());
}

int run_command(const DispatchOptions& options, std::ostream& out, std::ostream& err) {
  const fs::path base = options.out_dir ? fs::path(*options.out_dir) : fs::path(".");
  std::vector<std::string> overrides = options.overrides;
  if (options.seed) overrides.push_back("seed=" + std::to_string(*options.seed));
  ExperimentConfig cfg = parse_config(options.config_path, overrides);

  const fs::path data_dir = resolve(base, cfg.data_path);
  RunDir rd = RunDir::create(base, cfg.run_base, cfg.run_name, options.command, cfg.seed);
  rd.write_config_echo(cfg.echo_json);

  std::vector<std::pair<std::string, std::string>> input_hashes;
  const std::string& cmd = options.command;

  if (cmd == "generate") {
    SyntheticDataset ds = generate_world(cfg.world, cfg.seed);
    export_dataset(ds, data_dir.string());
    rd.write_manifest(cmd, cfg.echo_json, cfg.seed,
                      {{"dataset", hex64(fnv1a_tree(data_dir))}});
    out << "generated " << ds.config.num_modalities << " modalities x "
        << ds.num_records(0) << " windows, " << ds.num_pairs() << " synchronized pairs -> "
        << data_dir.string() << "\n";
    return 0;
  }

  if (cmd == "pretrain" || cmd == "align" || cmd == "joint") {
    if (!fs::exists(data_dir / "meta.json"))
      throw std::runtime_error("missing dataset at " + data_dir.string() +
                               " (run `infomae generate` first)");
    input_hashes.emplace_back("dataset", hex64(fnv1a_tree(data_dir)));
    SyntheticDataset ds = import_dataset(data_dir.string());
    MetricsWriter metrics(rd.file("metrics.ndjson"));
    MetricsSink sink = [&](const StepRecord& r) { metrics.write(r); };

    if (cmd == "pretrain") {
      UnimodalResult res = pretrain_unimodal(ds, cfg.train_config(Stage::Unimodal), sink);
      for (std::size_t m = 0; m < res.checkpoints.size(); ++m) {
        const fs::path p = rd.file("checkpoint_modality_" + std::to_string(m) + ".ckpt");
        write_checkpoint_guarded(res.checkpoints[m], p);
        out << "wrote " << p.string() << "\n";
      }
    } else if (cmd == "align") {
      std::vector<fs::path> used;
      std::vector<Checkpoint> ckpts = load_unimodal_checkpoints(base, cfg, &used);
      for (const auto& p : used)
        input_hashes.emplace_back(p.filename().string(), hex64(fnv1a_file(p)));
      AlignResult res = align_crossmodal(ds, cfg.train_config(Stage::Align), ckpts, sink);
      const fs::path p = rd.file("checkpoint_aligned.ckpt");
      write_checkpoint_guarded(res.checkpoint, p);
      out << "wrote " << p.string() << "\n";
    } else {
      AlignResult res = joint_pretrain(ds, cfg.train_config(Stage::Joint), sink);
      const fs::path p = rd.file("checkpoint_joint.ckpt");
      write_checkpoint_guarded(res.checkpoint, p);
      out << "wrote " << p.string() << "\n";
    }
    rd.write_manifest(cmd, cfg.echo_json, cfg.seed, input_hashes);
    return 0;
  }

  if (cmd == "probe" || cmd == "finetune") {
    if (!fs::exists(data_dir / "meta.json"))
      throw std::runtime_error("missing dataset at " + data_dir.string() +
                               " (run `infomae generate` first)");
    std::string attempted;
    std::vector<fs::path> paths = probe_checkpoint_paths(base, cfg, &attempted);
    if (paths.empty())
      throw std::runtime_error("no checkpoints found for probing; attempted:" + attempted);
    std::string missing;
    for (const auto& p : paths)
      if (!fs::exists(p)) missing += "\n  " + p.string();
    if (!missing.empty()) throw std::runtime_error("missing checkpoints:" + missing);

    std::vector<Checkpoint> ckpts;
    for (const auto& p : paths) {
      ckpts.push_back(Checkpoint::load(p.string()));
      input_hashes.emplace_back(p.filename().string(), hex64(fnv1a_file(p)));
    }
    input_hashes.emplace_back("dataset", hex64(fnv1a_tree(data_dir)));
    SyntheticDataset ds = import_dataset(data_dir.string());
    EvalSplit split = make_eval_split(ds, cfg.probe.max_train, cfg.probe.max_eval,
                                      derive_seed(cfg.seed, "probe_split"));
    ProbeResult res = cmd == "probe"
                          ? linear_probe(ckpts, ds, split, cfg.probe, cfg.seed)
                          : finetune_eval(ckpts, ds, split, cfg.probe, cfg.seed);
    std::vector<ResultRow> rows = {
        {ds.config.pair_ratio, res.variant, cfg.seed, res.accuracy, res.macro_f1}};
    write_results_tsv(rd.file("results.tsv"), rows);
    rd.write_manifest(cmd, cfg.echo_json, cfg.seed, input_hashes);
    out << cmd << " [" << res.variant << "] accuracy=" << res.accuracy
        << " macro_f1=" << res.macro_f1 << " n_eval=" << res.n_eval << "\n";
    return 0;
  }

  if (cmd == "sweep" || cmd == "ablate") {
    SweepConfig sc = cfg.sweep_config(cmd == "ablate");
    std::vector<ResultRow> rows;
    auto cells = pair_ratio_sweep(sc, [&](const SweepCell& c) {
      out << "ratio=" << c.ratio << " variant=" << c.variant << " seed=" << c.seed
          << " accuracy=" << c.accuracy << "\n";
    });
    for (const auto& c : cells)
      rows.push_back({c.ratio, c.variant, c.seed, c.accuracy, c.macro_f1});
    write_results_tsv(rd.file("results.tsv"), rows);
    write_aggregate_tsv(rd.file("aggregate.tsv"), rows);
    rd.write_manifest(cmd, cfg.echo_json, cfg.seed, input_hashes);
    out << render_summary_table(rows);
    return 0;
  }

  if (cmd == "report") {
    if (options.report_dirs.empty())
      throw std::runtime_error("report: no run directories given");
    std::vector<ResultRow> rows;
    for (const auto& d : options.report_dirs) {
      const fs::path p = resolve(base, d) / "results.tsv";
      if (!fs::exists(p)) throw std::runtime_error("report: missing results table " + p.string());
      auto part = read_results_tsv(p);
      rows.insert(rows.end(), part.begin(), part.end());
      input_hashes.emplace_back(p.string(), hex64(fnv1a_file(p)));
    }
    const std::string table = render_summary_table(rows);
    const std::string svg = render_report_svg(rows);
    {
      std::ofstream f(rd.file("summary.txt"));
      f << table;
    }
    {
      std::ofstream f(rd.file("report.svg"));
      f << svg;
    }
    write_results_tsv(rd.file("results.tsv"), rows);
    rd.write_manifest(cmd, cfg.echo_json, cfg.seed, input_hashes);
    out << table;
    return 0;
  }

  err << "unknown command: " << cmd << "\n";
  return 2;
}

}  // namespace

int dispatch(const DispatchOptions& options, std::ostream& out, std::ostream& err) {
  try {
    return run_command(options, out, err);
  } catch (const std::exception& e) {
    err << "infomae " << options.command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace infomae
