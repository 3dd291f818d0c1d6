#pragma once

#include <ostream>

namespace qcuts3d::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kArgument = 2,
  kFormat = 3,
  kData = 4,
  kConvergence = 5,
  kIo = 6,
  kPlacement = 7,
  kConfiguration = 8,
};

/// Entry point of the qcuts3d tool, usable in-process.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qcuts3d::cli
