#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace octseg {

/// Entry point of the octseg command line tool. Returns 0 on success, 2 on
/// usage or configuration errors, 1 on data or runtime errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace octseg
