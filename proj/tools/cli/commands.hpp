#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace venus::cli {

/// Runs one `venus` invocation in-process. `args` excludes the program name.
/// Returns the process exit code: 0 success, 1 runtime failure, 2 usage,
/// configuration or validation error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace venus::cli
