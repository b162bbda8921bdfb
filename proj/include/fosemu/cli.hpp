#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fosemu::cli {

/// Process exit statuses.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataValidation = 2,
    kNumerical = 3,
};

/// Runs one `fosemu` command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace fosemu::cli
