#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <stdexcept>

#include "tcbsde/intensity.hpp"
#include "tcbsde/levy_measure.hpp"

namespace tcbsde {

/// One simulated world: intensity trajectory, Brownian-measure increments and
/// per-cell jump counts on the grid, plus the compensated increments.
struct NoiseScenario {
    std::shared_ptr<const IntensityPath> intensity;
    std::shared_ptr<const LevyMeasure> levy;
    Eigen::VectorXd d_brownian;      // N, increment of B over (t_i, t_{i+1}]
    Eigen::MatrixXd counts;          // N x J, H mass on (t_i, t_{i+1}] x {z_j}
    Eigen::MatrixXd d_compensated;   // N x J, counts - w_j * dLambda^H
    std::uint64_t seed = 0;

    const TimeGrid& grid() const { return *intensity->grid; }
    int steps() const { return static_cast<int>(d_brownian.size()); }
    int atom_count() const { return static_cast<int>(counts.cols()); }
};

// Information available at grid point `step` under the G-filtration: the whole
// intensity trajectory (F^Lambda is known at time 0) plus noise increments of
// cells strictly before the step. Builders of predictable integrands receive
// only this view, which enforces predictability structurally.
class ScenarioView {
  public:
    ScenarioView(const NoiseScenario& s, int step) : s_(s), step_(step) {}

    int step() const { return step_; }
    double time() const { return s_.grid().time(step_); }
    const IntensityPath& intensity() const { return *s_.intensity; }
    const LevyMeasure& levy() const { return *s_.levy; }

    double d_brownian(int i) const {
        check(i);
        return s_.d_brownian(i);
    }
    double count(int i, int j) const {
        check(i);
        return s_.counts(i, j);
    }
    double d_compensated(int i, int j) const {
        check(i);
        return s_.d_compensated(i, j);
    }
    /// B_{t_step}, the Brownian level at the current grid point.
    double brownian_level() const {
        double sum = 0.0;
        for (int i = 0; i < step_; ++i) sum += s_.d_brownian(i);
        return sum;
    }
    /// eta_{t_step} = sum of z_j * compensated increments up to the step.
    double eta_level() const {
        double sum = 0.0;
        for (int i = 0; i < step_; ++i)
            for (int j = 0; j < s_.atom_count(); ++j)
                sum += s_.levy->atoms[static_cast<std::size_t>(j)].z * s_.d_compensated(i, j);
        return sum;
    }

  private:
    void check(int i) const {
        if (i < 0 || i >= step_)
            throw std::logic_error("ScenarioView: access beyond the predictable prefix");
    }
    const NoiseScenario& s_;
    int step_;
};

}  // namespace tcbsde
