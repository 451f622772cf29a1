#pragma once

// Command-line front end. Commands: flow, interval, verify, reconstruct,
// autonomous, decompose, mollify. Exit codes: 0 success, 1 failed condition
// or domain violation, 2 usage or configuration error.

#include <iosfwd>
#include <string>
#include <vector>

namespace flowatlas {

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace flowatlas
