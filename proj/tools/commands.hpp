#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace powerdiag::cli {

/// Process exit statuses.
enum ExitStatus : int {
    kExitOk = 0,             ///< success; for diagnose, safe or balance regime
    kExitDomainError = 1,    ///< library rejected the input (e.g. zero signal power)
    kExitUsage = 2,          ///< bad flags, unreadable or malformed files
    kExitForbidden = 3,      ///< diagnose: power-dominant, penalty confirmed
    kExitForbiddenDegenerate = 4,  ///< diagnose: power-dominant, penalty not confirmed
};

/// Runs one invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace powerdiag::cli
