#pragma once

#include <functional>
#include <span>

#include "tcbsde/noise_batch.hpp"

namespace tcbsde {

/// A random field sampled on grid x {diffusion slot, atoms}: values(i, 0) is
/// phi_{t_i}(0), values(i, 1+j) is phi_{t_i}(z_j). One instance holds one
/// scenario's field; deterministic fields are simply reused across scenarios.
struct Integrand {
    std::shared_ptr<const TimeGrid> grid;
    std::shared_ptr<const LevyMeasure> levy;
    Eigen::MatrixXd values;  // N x (1 + J)

    int steps() const { return static_cast<int>(values.rows()); }
    int slots() const { return static_cast<int>(values.cols()); }
};

/// Builds an integrand row by row. The row callback sees only the scenario
/// view at the row's step, so the result is predictable by construction.
using IntegrandRow = std::function<void(const ScenarioView&, std::span<double> row)>;

Integrand build_integrand(const NoiseScenario& s, const IntegrandRow& row_fn);

Integrand constant_integrand(std::shared_ptr<const TimeGrid> grid,
                             std::shared_ptr<const LevyMeasure> levy, double diffusion,
                             double jump_value);

/// Non-anticipating stochastic integral of phi against the mixed noise:
/// sum_i phi_i(0) dB_i + sum_{i,j} phi_i(z_j) dHtilde_{ij}.
double integrate(const Integrand& phi, const NoiseScenario& s);

/// Pathwise squared I-norm against the scenario's clock:
/// sum_i [ phi_i(0)^2 dLambda^B_i + sum_j phi_i(z_j)^2 w_j dLambda^H_i ].
/// Averaging over a batch recovers the expectation in the norm.
double i_norm_squared(const Integrand& phi, const IntensityPath& path);

using IntegrandBuilder = std::function<Integrand(const NoiseScenario&)>;

struct IsometryCheck {
    double lhs = 0;  // sample mean of I(phi)^2
    double rhs = 0;  // sample mean of the pathwise squared norm
    double se = 0;   // standard error of the paired difference
};

IsometryCheck isometry_check(const IntegrandBuilder& builder, const NoiseBatch& batch);

/// Max over scenarios of |xi I(phi) - I(xi phi)| for a factor xi that depends
/// only on the intensity trajectory; zero in exact arithmetic.
double factor_check(const std::function<double(const IntensityPath&)>& xi,
                    const IntegrandBuilder& builder, const NoiseBatch& batch);

}  // namespace tcbsde
