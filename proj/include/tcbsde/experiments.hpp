#pragma once

#include <iosfwd>

#include "tcbsde/config.hpp"

namespace tcbsde {

struct CheckResult {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::vector<CheckResult> checks;
    std::vector<std::string> artifacts;  // paths written
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

/// Runs the configured experiment: writes CSV/JSONL artifacts under the output
/// directory (named by kind and seed) and prints one PASS/FAIL line per check.
ExperimentReport run_experiment(const ExperimentConfig& config, std::ostream& log);

/// 0 when every check passed, 1 otherwise.
int experiment_exit_code(const ExperimentReport& report);

}  // namespace tcbsde
