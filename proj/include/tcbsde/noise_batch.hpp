#pragma once

#include <complex>
#include <functional>
#include <iosfwd>

#include "tcbsde/scenario.hpp"

namespace tcbsde {

/// A Monte Carlo batch of scenarios sharing one grid and one jump measure.
struct NoiseBatch {
    std::shared_ptr<const TimeGrid> grid;
    std::shared_ptr<const LevyMeasure> levy;
    std::vector<NoiseScenario> scenarios;
    std::uint64_t master_seed = 0;

    // Cumulative noise levels at grid points, filled at simulation time.
    Eigen::MatrixXd brownian_levels;  // M x (N+1)
    Eigen::MatrixXd eta_levels;       // M x (N+1)

    int size() const { return static_cast<int>(scenarios.size()); }
    int steps() const { return grid->steps(); }
    int atom_count() const { return levy->atom_count(); }
};

/// Draws one scenario given its intensity trajectory: Gaussian increments with
/// variance equal to the Brownian-clock increment, Poisson cell counts with
/// mean w_j times the jump-clock increment, all cells independent given the
/// trajectory. Brownian and jump draws come from separate streams.
NoiseScenario simulate_noise(std::shared_ptr<const IntensityPath> intensity,
                             std::shared_ptr<const LevyMeasure> levy, RngStream& brownian,
                             RngStream& jumps, std::uint64_t seed_token);

/// Simulates a full batch; scenario-parallel, bit-identical for any thread
/// count. Deterministic intensity models share a single trajectory object.
NoiseBatch simulate_batch(const IntensityModel& model, std::shared_ptr<const TimeGrid> grid,
                          std::shared_ptr<const LevyMeasure> levy, int count,
                          std::uint64_t master_seed);

enum class NoiseComponent { brownian, jump };

struct CharFunctionCheck {
    std::complex<double> empirical;  // mean of exp{i c Z_t}
    std::complex<double> reference;  // mean over trajectories of the conditional CF
    double se = 0.0;                 // standard error of the paired difference
    double gap() const { return std::abs(empirical - reference); }
};

/// Empirical characteristic function of B_t or eta_t at a grid point, paired
/// with the clock-averaged conditional characteristic function. The Gaussian
/// reference uses exp{-c^2 Lambda/2}.
CharFunctionCheck empirical_char_function(const NoiseBatch& batch, double c, int step,
                                          NoiseComponent which);

struct MomentCheck {
    double mean = 0, variance = 0;
    double ref_mean = 0, ref_variance = 0;  // total-variance decomposition of the clock
    double se_mean = 0, se_variance = 0;
};

/// Mean and variance of the cell count over [step_begin, step_end) x {z_atom},
/// against the law-of-total-variance reference E[Lambda] + Var[Lambda].
MomentCheck doubly_stochastic_moments(const NoiseBatch& batch, int step_begin, int step_end,
                                      int atom);

/// A cell (step range) x (one slot); slot -1 is the Brownian axis, j >= 0 an atom.
struct NoiseCell {
    int step_begin = 0;
    int step_end = 0;
    int slot = -1;
};

struct MeanCheck {
    double mean = 0;
    double se = 0;
};

double mu_of_cell(const NoiseScenario& s, const NoiseCell& cell);

/// Empirical E[mu(A) mu(B)] for disjoint cells; zero in expectation.
MeanCheck orthogonality_check(const NoiseBatch& batch, const NoiseCell& a, const NoiseCell& b);

/// Empirical mean of mu(cell), optionally restricted to a sub-sample selected
/// by an event measurable before the cell starts; zero in expectation.
MeanCheck martingale_check(const NoiseBatch& batch, const NoiseCell& cell,
                           const std::function<bool(const ScenarioView&)>& selector = nullptr);

/// One row per (scenario, step): scenario_id, t, lamB, lamH, dB, one count
/// column per atom. t is the left endpoint of the step.
void export_batch_csv(const NoiseBatch& batch, std::ostream& out);

}  // namespace tcbsde
