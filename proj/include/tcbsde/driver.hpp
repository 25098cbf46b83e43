#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>

#include "tcbsde/noise_batch.hpp"

namespace tcbsde {

/// One row of an integrand as seen by a driver: the diffusion slot and one
/// value per jump atom.
struct PhiSlice {
    double diffusion = 0.0;
    std::span<const double> jump;
};

/// Generator of the equation, Lipschitz in (y, phi) under the clock-weighted
/// metric |dy| + |dphi(0)| sqrt(lamB) + (sum_j dphi(z_j)^2 w_j)^{1/2} sqrt(lamH).
/// Scenario and step give the generator its omega-dependence (e.g. an adjoint
/// generator evaluated along a controlled state path).
struct Driver {
    std::function<double(int scenario, int step, double t, double lam_b, double lam_h, double y,
                         const PhiSlice& phi)>
        evaluate;
    double lipschitz_bound = 0.0;  // K_g
    std::string description;
};

inline Driver zero_driver() {
    return Driver{[](int, int, double, double, double, double, const PhiSlice&) { return 0.0; },
                  0.0, "zero"};
}

struct TerminalCondition {
    std::function<double(const NoiseScenario&)> evaluate;
    double square_budget = std::numeric_limits<double>::infinity();
    std::string description;
};

struct ParameterReport {
    double max_lipschitz_ratio = 0.0;
    double declared_bound = 0.0;
    double generator_at_zero_l2 = 0.0;  // sample mean of the time integral of g(lam,0,0)^2
    double terminal_second_moment = 0.0;
    double terminal_budget = 0.0;
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks the square-integrability and Lipschitz requirements on a batch by
/// sampling random states/perturbations. Throws ValidationFailure listing
/// every violated condition.
ParameterReport validate_standard_parameters(const Driver& g, const TerminalCondition& xi,
                                             const NoiseBatch& batch,
                                             std::uint64_t probe_seed = 0x5eedULL,
                                             int probe_count = 4096,
                                             double ratio_tolerance = 1e-6);

}  // namespace tcbsde
