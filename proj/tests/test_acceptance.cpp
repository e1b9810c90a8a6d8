// Acceptance harness: runs every criterion end to end and prints one
// verdict line each. Exit status 0 iff all criteria pass.
#include <cstdio>

#include "iklflow/checks.hpp"

int main() {
    const auto results = iklflow::run_checks("all");
    bool all_pass = true;
    for (const auto &r : results) {
        all_pass = all_pass && r.pass;
        std::printf("%s %-32s %6.2fs  %s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.seconds, r.detail.c_str());
    }
    std::printf("%s: %zu criteria\n", all_pass ? "ALL PASS" : "FAILED",
                results.size());
    return all_pass ? 0 : 1;
}
