#pragma once

#include <iosfwd>

#include "config.hpp"

namespace rpolab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Dispatch a validated config: runs the command, writes the output bundle
// (artifacts, canonical config.json, manifest.json) under cfg.out_dir, and
// prints a short human summary to `out`.  Throws the library error types on
// failure; a failed check run still writes its bundle before throwing.
void run_command(const RunConfig& cfg, std::ostream& out);

// Full tool entry point: parses flags, loads the config, dispatches, and
// reports failures as one-line JSON on `err`.  Returns the process exit
// code: 0 success, 2 configuration error, 3 solver or certification
// failure (including failed check suites), 4 I/O error, 1 unexpected.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rpolab::cli
