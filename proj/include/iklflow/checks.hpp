#pragma once

#include <string>
#include <vector>

namespace iklflow {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

/// Acceptance-check suite. scope is one of
/// "kernels" | "flows" | "oracles" | "all". Exceptions inside a check
/// are reported as failures, never propagated.
std::vector<CheckResult> run_checks(const std::string &scope);

}  // namespace iklflow
