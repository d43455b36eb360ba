// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ddeps::cli {

/// Runs one command. `args` excludes the program name.
/// Returns 0 on success, 2 on usage errors, 1 on numerical failures. Errors are written to `err`
/// as a single JSON object {"error": kind, "message": text}.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddeps::cli
