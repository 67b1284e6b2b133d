#include <cstdio>
#include <cstdlib>

#include "sckd/selfcheck.hpp"

// Acceptance gate. With no arguments runs all nine criteria; with a numeric
// argument runs just that one. Prints one line per criterion and exits
// nonzero if any fails.
int main(int argc, char** argv) {
    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
        if (only < 1 || only > 9) {
            std::fprintf(stderr, "usage: %s [criterion 1..9]\n", argv[0]);
            return 2;
        }
    }
    bool all_ok = true;
    for (int id = 1; id <= 9; ++id) {
        if (only != 0 && id != only) continue;
        const sckd::CheckResult r = sckd::run_check(id);
        std::printf("criterion %d: %s  %-40s %7.2fs  %s\n", r.id,
                    r.passed ? "pass" : "FAIL", r.name.c_str(), r.seconds,
                    r.detail.c_str());
        std::fflush(stdout);
        all_ok = all_ok && r.passed;
    }
    return all_ok ? 0 : 1;
}
