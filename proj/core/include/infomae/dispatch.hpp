#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace infomae {

struct DispatchOptions {
  std::string command;  // generate|pretrain|align|joint|probe|finetune|sweep|ablate|report
  std::string config_path;            // empty -> all defaults
  std::vector<std::string> overrides; // dotted key=value assignments
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir; // base for runs/ and the dataset path
  std::vector<std::string> report_dirs;
};

// Runs one command end to end: validates prerequisites, writes config echo,
// manifest and artifacts into the run directory, returns the exit status.
// Diagnostics go to err, human-readable progress to out.
int dispatch(const DispatchOptions& options, std::ostream& out, std::ostream& err);

}  // namespace infomae
