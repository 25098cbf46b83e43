#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcbsde/intensity.hpp"
#include "tcbsde/levy_measure.hpp"
#include "tcbsde/regression.hpp"

namespace tcbsde {

enum class ExperimentKind {
    simulate_noise,
    isometry,
    char_function,
    solve_bsde,
    linear_oracle,
    comparison,
    mean_variance,
    utility,
    max_principle,
};

std::string kind_name(ExperimentKind kind);
std::optional<ExperimentKind> kind_from_name(const std::string& name);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::simulate_noise;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "out";

    double horizon = 1.0;
    int steps = 50;
    int scenario_count = 0;

    std::vector<JumpAtom> atoms;
    IntensityModel intensity{constant_intensity(1.0), constant_intensity(1.0)};

    RegressionSpec regression;

    std::string driver = "zero";
    std::string terminal = "zero";
    double driver_a = 0.0, driver_c = 0.0, driver_e0 = 0.0, driver_ez = 0.0;
    double terminal_constant = 0.0;
    double bsde_tolerance = 1e-10;
    int bsde_max_iterations = 25;

    double rho = 0.0, alpha = 0.0, psi0 = 0.0, psi_jump = 0.0;
    double target_k = 0.0, initial_wealth = 0.0;
    int inner_paths = 256;
    std::string utility = "quadratic";
    double utility_gamma = 1.0;

    std::map<std::string, double> tolerances;
};

struct ParseError {
    int line = 0;  // 0 when the error is not tied to a specific line
    std::string message;
};

struct ConfigResult {
    std::optional<ExperimentConfig> config;
    std::vector<ParseError> errors;
    bool ok() const { return config.has_value(); }
};

/// Parses the flat key-value format (sections in brackets, '#' comments) and
/// validates the result; every error is collected, not just the first.
ConfigResult parse_config(const std::string& text);

std::string describe_errors(const std::vector<ParseError>& errors);

}  // namespace tcbsde
