#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mbwish::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kOracleRefused = 3,
    kDegraded = 4,
    kVerifyFailed = 5,
};

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace mbwish::cli
