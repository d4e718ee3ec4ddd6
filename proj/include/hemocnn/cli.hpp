#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hemocnn {

/// Process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitNumeric = 4,
    kExitGradcheck = 5,
};

/// Entry point for `hemocnn {train|eval|predict|gradcheck|synth}`.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hemocnn
