#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace candleaug {

/// Runs one `candleaug` subcommand. `args` excludes the program name.
/// Returns 0 on success, 2 on usage errors, 1 on domain errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace candleaug
