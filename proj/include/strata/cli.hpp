#pragma once

// The `strata` command line. run_cli is the whole program minus main(),
// so tests can drive it in-process.
//
// Exit codes: 0 ok, 1 usage or user error, 2 engine or data error.
//
// Rows are addressed by --where selectors (field=value pairs over data and
// borrowed fields) or by --row ids. A row id is the row's 1-based position
// in the file, counting rows of every table in document order.

#include <iosfwd>
#include <string>
#include <vector>

namespace strata {

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace strata
