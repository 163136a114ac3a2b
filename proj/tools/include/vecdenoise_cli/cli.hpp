#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vecdenoise::cli {

/// Entry point behind the `vecdenoise` binary. `args` excludes the program
/// name. Returns the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vecdenoise::cli
