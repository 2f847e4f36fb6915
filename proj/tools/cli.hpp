#pragma once

#include <iosfwd>

namespace bcmarket::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInvalidScenario = 2,
    kNonConvergence = 3,
    kTrivialEquilibrium = 4,
    kVerificationMismatch = 5,
};

/// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bcmarket::cli
