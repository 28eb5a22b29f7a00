#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace gamma_elliptic::cli {

// Process exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitViolated = 2;
inline constexpr int kExitParse = 64;

// Runs config.task, writing its files under config.output and a short
// progress log to `log`. Library errors escape; main() maps them to statuses.
int run(const RunConfig& config, std::ostream& log);

}  // namespace gamma_elliptic::cli
