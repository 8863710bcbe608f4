#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blfmrac {

/// Exit codes: 0 pass, 2 infeasible or constraint violated, 1 internal error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitViolated = 2;

/// `args[0]` is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace blfmrac
