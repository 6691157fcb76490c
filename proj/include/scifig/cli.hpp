#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scifig::cli {

// Entry point of the scifig binary. `args` excludes the program name.
// Exit codes: 0 success, 1 usage or configuration, 2 I/O, 3 data format.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scifig::cli
