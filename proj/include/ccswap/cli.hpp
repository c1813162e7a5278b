#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccswap::cli {

// Exit codes
inline constexpr int kOk            = 0;
inline constexpr int kConfigError   = 2;
inline constexpr int kPipelineError = 3;
inline constexpr int kBBoxError     = 4;  // bbox command: EmptyMask or DegenerateAttention

// Runs one command. Errors are reported as "error: <Name>: <message>" on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccswap::cli
