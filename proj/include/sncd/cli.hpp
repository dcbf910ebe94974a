#pragma once

namespace sncd::cli {

/// Full command-line front end. Returns the process exit code:
/// 0 success, 2 bad flags, 3 I/O failure, 4 data validation failure.
int run(int argc, const char* const* argv);

}  // namespace sncd::cli
