#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qaexpert::cli {

// Parses argv and runs one command. Returns the process exit status:
// 0 success, 1 command error, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qaexpert::cli
