#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace prime {

// Runs one command line (program name first). Returns the process exit code:
// 0 success, 2 usage, 3 data validation, 4 numerical failure. Failures also
// print a one-line JSON error object to `err`.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace prime
