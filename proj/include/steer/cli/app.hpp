#pragma once

#include <ostream>

#include "steer/cli/config.hpp"

namespace steer::cli {

/// Runs a resolved configuration. Results go under `config.out`, tables to
/// `log`. Library errors propagate as `steer::Error`.
void run(const ExperimentConfig& config, std::ostream& log);

/// `steer-recon <subcommand> [--config PATH] [--key value ...] --out DIR`.
/// Returns the process exit status: 0 on success, 2 for a library error
/// (reported on `err` as "error [kind]: message"), or the argument parser's
/// code for malformed command lines.
int main_entry(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace steer::cli
