#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace paperprint::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kInvalidInput = 2,
    kIntegrityFailure = 3,
    kReject = 4,
};

/// Runs one command line (without the program name). Diagnostics go to err,
/// results to out. PAPERPRINT_STORE supplies the default store directory and
/// PAPERPRINT_FAULT=temp_written aborts the process before the first rename
/// of an atomic write (crash testing).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace paperprint::cli
