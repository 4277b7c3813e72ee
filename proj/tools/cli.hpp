#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or input error,
// 2 numeric-contract failure.

namespace msg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumeric = 2;

int cli_main(int argc, char** argv);

}  // namespace msg::cli
