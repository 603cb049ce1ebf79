#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace imaginet::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,   // I/O and data errors
  kConfig = 2,
  kNumerical = 3,
  kGradCheck = 4,
  kMismatch = 5,
};

/// Flat key=value settings. Later layers win: defaults < preset < config
/// file < command-line flags.
using Settings = std::map<std::string, std::string>;

/// Reads a key=value file; '#' starts a comment line. Throws ConfigError on
/// malformed lines.
Settings read_config_file(const std::filesystem::path& path);

/// Settings of a named preset ("desk" or "full").
Settings preset(const std::string& name);

/// Path of the checkpoint written after `epoch`: model.imgn → model.epoch3.imgn.
std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& final_path,
                                            std::size_t epoch);
std::filesystem::path vocab_path(const std::filesystem::path& checkpoint);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imaginet::cli
