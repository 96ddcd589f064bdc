// Runs the experiment behind each acceptance criterion with default settings
// and prints one PASS/FAIL line per criterion. Arguments select criteria.

#include "experiments.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <set>
#include <string>

namespace ex = microlocal::experiments;

int main(int argc, char** argv) {
    // Wall-clock budgets in seconds; criteria not listed have none.
    const std::map<int, double> budget{{1, 30.0}, {2, 60.0}, {3, 120.0}, {10, 60.0}};

    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& info : ex::registry()) {
        if (!wanted.empty() && !wanted.count(info.criterion)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        std::string why;
        try {
            const ex::ExperimentConfig cfg = ex::resolve_config(info.name, nullptr, 1);
            const ex::ExperimentResult r = ex::run_experiment(cfg);
            ok = r.passed();
            for (const auto& f : r.failures) why += "\n    " + f;
        } catch (const std::exception& e) {
            why = std::string("\n    exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (auto it = budget.find(info.criterion); it != budget.end() && secs > it->second) {
            ok = false;
            why += "\n    over the " + std::to_string(it->second) + " s budget";
        }
        std::printf("criterion %2d %-30s %s  (%.2f s)%s\n", info.criterion, info.name.c_str(), ok ? "PASS" : "FAIL",
                    secs, why.c_str());
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    return failed == 0 ? 0 : 1;
}
