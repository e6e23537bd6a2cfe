#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pondstat {

/// Entry point of the `pondstat` command. Exit codes: 0 success, 1 usage
/// error, 2 data error. `args[0]` is the program name, as in argv.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

} // namespace pondstat
