#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tcbsde {

/// Standard-parameter validation failed; message lists every violated condition.
struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Picard loop ran out of iterations; carries the recorded distance trace.
struct ConvergenceFailure : std::runtime_error {
    ConvergenceFailure(const std::string& msg, std::vector<double> trace)
        : std::runtime_error(msg), distance_trace(std::move(trace)) {}
    std::vector<double> distance_trace;
};

/// A linear-algebra step failed (rank-deficient regression, non-finite state).
struct NumericalFailure : std::runtime_error {
    NumericalFailure(const std::string& msg, int step_index)
        : std::runtime_error(msg), step(step_index) {}
    int step;
};

}  // namespace tcbsde
