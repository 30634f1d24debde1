#ifndef SSW_CLI_HPP
#define SSW_CLI_HPP

#include <iosfwd>

namespace ssw::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalidEstimate = 1,  // at least one requested estimator failed or was out of range
  kInputError = 2,       // unreadable input, bad spec, unknown preset
};

/// Entry point behind the `ssw` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssw::cli

#endif  // SSW_CLI_HPP
