#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace sgflm::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2, // bad flags, config file or I/O
    kDataError = 3,   // corrupt or inconsistent dataset
    kNumericalError = 4,
};

/// Environment variable naming the default output directory.
inline constexpr const char* kOutputRootEnv = "SGFLM_OUTPUT_ROOT";

/// Defaults for every flat dotted config key.
nlohmann::json default_config();

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace sgflm::cli
