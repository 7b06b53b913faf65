#include "infomae/dispatch.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"InfoMAE: pair-efficient multimodal SSL on synthetic worlds"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::vector<std::string> report_dirs;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"generate", "generate the synthetic multimodal dataset"},
      {"pretrain", "stage 1: independent unimodal masked-reconstruction pretraining"},
      {"align", "stage 2: cross-modal alignment from unimodal checkpoints"},
      {"joint", "joint multimodal pretraining baseline (pairs only, random init)"},
      {"probe", "linear probe on frozen representations"},
      {"finetune", "linear probe followed by light finetuning"},
      {"sweep", "pair-ratio sweep across variants and seeds"},
      {"ablate", "ablation run at the configured pair ratio"},
      {"report", "render summary table and charts from results tables"}};

  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    sub->add_option("--set", overrides, "dotted key=value override, repeatable");
    sub->add_option("--seed", seed, "seed override");
    sub->add_option("--out", out_dir, "base directory for runs/ and the dataset");
    if (name == "report")
      sub->add_option("dirs", report_dirs, "run directories containing results.tsv");
  }

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  infomae::DispatchOptions opts;
  opts.command = sub->get_name();
  opts.config_path = config_path;
  opts.overrides = overrides;
  if (sub->count("--seed") > 0) opts.seed = seed;
  if (sub->count("--out") > 0) opts.out_dir = out_dir;
  opts.report_dirs = report_dirs;
  return infomae::dispatch(opts, std::cout, std::cerr);
}
