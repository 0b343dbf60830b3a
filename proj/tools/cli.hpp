#pragma once

#include <ostream>

namespace tagsynth::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,  // internal error (numerical non-convergence, bugs)
  kInput = 2,
  kProvider = 3,
  kNotConverged = 4,
};

/// Runs one command line. Results that are not written to a named path go to
/// `out`; logs and usage go to stderr.
int dispatch(int argc, const char* const* argv, std::ostream& out);

}  // namespace tagsynth::cli
