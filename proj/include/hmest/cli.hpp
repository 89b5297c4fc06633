#pragma once

#include <iosfwd>

namespace hmest::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kBadInput = 2;
inline constexpr int kNoEstimate = 3;
inline constexpr int kUnwritableOutput = 4;
inline constexpr int kValidationFailed = 5;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hmest::cli
