#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace sqlab {

struct VerifyCheck {
    std::string name;
    std::string tolerance;  // human-readable tolerance / criterion
    std::function<bool(std::string& detail)> run;
};

// The per-module invariant checks bundled behind the verify subcommand.
std::vector<VerifyCheck> verify_suite(int threads = 1);

// Runs every check, printing one line per check; returns the failure count.
int run_verify(std::ostream& out, int threads = 1);

}  // namespace sqlab
