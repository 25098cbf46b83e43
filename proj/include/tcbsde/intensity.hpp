#pragma once

#include <memory>
#include <variant>
#include <vector>

#include "tcbsde/rng.hpp"
#include "tcbsde/time_grid.hpp"

namespace tcbsde {

/// Deterministic right-continuous step function: values[k] on [times[k], times[k+1]).
struct PiecewiseConstantIntensity {
    std::vector<double> times;   // increasing, first must be 0
    std::vector<double> values;  // nonnegative, one per knot
};

/// Continuous-time chain jumping between two nonnegative levels.
struct TwoStateIntensity {
    double low = 0.0;
    double high = 0.0;
    double rate_up = 0.0;        // low -> high
    double rate_down = 0.0;      // high -> low
    double p_start_high = 0.0;   // initial distribution
};

/// Square-root diffusion, Euler steps clipped at zero.
struct CirIntensity {
    double mean_reversion = 0.0;
    double level = 0.0;
    double vol = 0.0;
    double x0 = 0.0;
};

using IntensityComponent =
    std::variant<PiecewiseConstantIntensity, TwoStateIntensity, CirIntensity>;

/// Intensity pair lambda = (lambda^B, lambda^H); the two components drive the
/// Brownian and jump clocks and are simulated from one dedicated stream.
struct IntensityModel {
    IntensityComponent brownian;
    IntensityComponent jump;
};

bool component_is_deterministic(const IntensityComponent& c);
bool is_deterministic(const IntensityModel& m);
void validate_component(const IntensityComponent& c);

inline PiecewiseConstantIntensity constant_intensity(double value) {
    return PiecewiseConstantIntensity{{0.0}, {value}};
}

/// Discretized trajectory of (lambda^B, lambda^H) with the cumulative clocks.
/// The clocks use the left-endpoint rule, exact for piecewise-constant paths
/// whose knots sit on the grid; every consumer of the time-change reads these
/// cumulative values, never midpoint evaluations.
struct IntensityPath {
    std::shared_ptr<const TimeGrid> grid;
    std::vector<double> lam_b, lam_h;  // values at grid points, size N+1
    std::vector<double> cum_b, cum_h;  // cumulative integrals, size N+1, start at 0

    double d_cum_b(int i) const {
        return cum_b[static_cast<std::size_t>(i) + 1] - cum_b[static_cast<std::size_t>(i)];
    }
    double d_cum_h(int i) const {
        return cum_h[static_cast<std::size_t>(i) + 1] - cum_h[static_cast<std::size_t>(i)];
    }
    /// Remaining clock mass on [t_i, T].
    double tail_b(int i) const { return cum_b.back() - cum_b[static_cast<std::size_t>(i)]; }
    double tail_h(int i) const { return cum_h.back() - cum_h[static_cast<std::size_t>(i)]; }
};

/// Simulates one intensity trajectory on the grid. Only the supplied stream is
/// consumed, keeping intensity draws independent of all noise draws.
IntensityPath simulate_intensity(const IntensityModel& model,
                                 std::shared_ptr<const TimeGrid> grid, RngStream& stream);

}  // namespace tcbsde
