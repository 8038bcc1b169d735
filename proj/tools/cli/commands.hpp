#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hyperscore::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the binary and the tests. `args` excludes the
/// program name. Data goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace hyperscore::cli
