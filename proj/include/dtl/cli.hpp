#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dtl {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 unexpected failure, 2 config, 3 data, 4 numerical.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtl
