#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ovc::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitBoundViolation = 2,
};

// Runs one command line (without the program name). Reports go to `--out`
// when given, otherwise to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Version string embedded in every report header.
const char* version();

}  // namespace ovc::cli
