#pragma once

#include "layerprobe/error.hpp"

#include <iosfwd>

namespace layerprobe {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2, // configuration or command-line problem
  kExitData = 3,       // unreadable, corrupt or unusable input data
  kExitInternal = 4,
};

int exit_code_for(Errc code) noexcept;

/// Entry point behind the `layerprobe` executable:
///   layerprobe score    --config <cfg> --activation <amx> --target <amx>
///   layerprobe sweep    --config <cfg> [--out <dir>] [--workers <n>]
///                       [--mode reference|parallel] [--resume]
///   layerprobe meta     --report <dir> --analysis <json> [--out <dir>]
///   layerprobe validate <file>...
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace layerprobe
