#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include "mf/cli/run_config.hpp"

namespace mf::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kNumericAbort = 4 };

/// Maps a failure to the documented exit code (config 2, data 3, numeric 4).
int exit_code_for(const std::exception& e);

// Each command writes its artifacts below cfg.run.out, starting with
// resolved.ini (also echoed to log), and is a pure function of the config,
// the seed and its input files.
void cmd_flops(const RunConfig& cfg, std::ostream& log);
void cmd_params(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_eval(const RunConfig& cfg, std::ostream& log);
void cmd_rank(const RunConfig& cfg, std::ostream& log);
void cmd_infer(const RunConfig& cfg, std::ostream& log);

const std::vector<std::string>& command_names();

/// Runs a command by name and converts exceptions to exit codes.
int run_command(const std::string& name, const RunConfig& cfg, std::ostream& log, std::ostream& err);

}  // namespace mf::cli
