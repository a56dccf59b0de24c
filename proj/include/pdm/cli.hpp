#pragma once

#include <string>
#include <vector>

#include "pdm/config.hpp"

namespace pdm {

// Run commands. Each writes its artifacts plus the resolved config into
// `out_dir` and returns a process exit code (0 on success); failures are
// reported by exception and mapped to exit codes by run_cli.
int cmd_train(const RunConfig& config, const std::string& out_dir, bool quiet,
              const std::string& resume_path = "");
int cmd_sample(const RunConfig& config, const std::string& out_dir, bool quiet);
int cmd_eval(const RunConfig& config, const std::string& out_dir, bool quiet);
int cmd_synth(const RunConfig& config, const std::string& out_dir, bool quiet);
int cmd_inspect(const std::vector<std::string>& paths);

// Full argv-level entry point: parses arguments, dispatches, and maps errors
// to exit codes (2 config, 3 data, 4 numeric).
int run_cli(int argc, char** argv);

}  // namespace pdm
