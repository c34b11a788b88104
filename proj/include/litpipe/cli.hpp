#pragma once

#include "litpipe/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace litpipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitUpstream = 2;

/// 2 for upstream, provider and internal failures, else 1.
int exit_code_for(ErrorCode code);

/// Entry point behind the `litpipe` executable. `args` excludes argv[0].
/// Results go to `out`; usage and error text go to `err`; logs go to stderr.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace litpipe::cli
