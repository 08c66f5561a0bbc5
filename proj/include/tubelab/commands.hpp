#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "tubelab/config.hpp"

namespace tubelab {

struct CommandOptions {
  std::optional<std::string> out_dir;  // overrides output.directory
  int workers = 1;
  std::optional<std::uint64_t> seed;  // overrides mc.seed and sweep.field_seed
};

enum ExitCode { kExitPass = 0, kExitProperty = 1, kExitConfig = 2, kExitNumerical = 3 };

int cmd_validate(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_mc(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_fiber(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);
int cmd_resolvent(const ExperimentConfig& cfg, const CommandOptions& opt, std::ostream& log);

// Loads the config, runs one subcommand and maps failures to exit codes.
int run_command(const std::string& name, const std::string& config_path,
                const CommandOptions& opt, std::ostream& log, std::ostream& err);

}  // namespace tubelab
