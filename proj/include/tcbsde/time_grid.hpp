#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace tcbsde {

/// Uniform partition 0 = t_0 < t_1 < ... < t_N = T of the trading horizon.
struct TimeGrid {
    double horizon = 0.0;
    std::vector<double> points;

    int steps() const { return static_cast<int>(points.size()) - 1; }
    double time(int i) const { return points[static_cast<std::size_t>(i)]; }
    double dt(int i) const {
        return points[static_cast<std::size_t>(i) + 1] - points[static_cast<std::size_t>(i)];
    }
};

inline TimeGrid make_grid(double horizon, int steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("make_grid: horizon must be positive and finite");
    if (steps < 1) throw std::invalid_argument("make_grid: need at least one step");
    TimeGrid grid;
    grid.horizon = horizon;
    grid.points.resize(static_cast<std::size_t>(steps) + 1);
    for (int i = 0; i <= steps; ++i)
        grid.points[static_cast<std::size_t>(i)] = horizon * static_cast<double>(i) / steps;
    grid.points.back() = horizon;
    return grid;
}

}  // namespace tcbsde
