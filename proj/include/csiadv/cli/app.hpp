#pragma once

#include <iosfwd>

namespace csiadv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Parses arguments and runs one subcommand. Validation problems (bad flags,
/// bad config, outputs present without --force) return 1; failures while a
/// stage runs return 2.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace csiadv::cli
