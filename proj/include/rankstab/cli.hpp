#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rankstab::cli {

/// Runs one subcommand. Returns the process exit code: 0 ok, 2 usage,
/// 3 config, 4 data, 5 provider. Errors are written to `err` as one JSON
/// object per line with "error" and "message".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

} // namespace rankstab::cli
