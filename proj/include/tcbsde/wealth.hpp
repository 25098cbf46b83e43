#pragma once

#include <string>

#include "tcbsde/noise_batch.hpp"

namespace tcbsde {

/// Market data of the portfolio problems: riskless rate rho, risky rate alpha,
/// noise loading psi (diffusion slot + per-atom slots), all deterministic per
/// grid point; mean-variance target k and initial wealth.
struct MeanVarianceModel {
    std::vector<double> rate_riskless;   // rho at grid points, size N+1
    std::vector<double> rate_risky;      // alpha at grid points
    std::vector<double> loading_diffusion;  // psi(0) at grid points
    Eigen::MatrixXd loading_jump;        // (N+1) x J, psi(z_j)
    double target = 0.0;                 // k
    double initial_wealth = 0.0;

    int atom_count() const { return static_cast<int>(loading_jump.cols()); }
};

MeanVarianceModel make_constant_mv_model(double rho, double alpha, double psi0,
                                         double psi_jump_slope, const LevyMeasure& levy,
                                         const TimeGrid& grid, double target, double x0);

void validate_mv_model(const MeanVarianceModel& model, const TimeGrid& grid);

/// Amount invested in the risky asset at a step, as a function of the step,
/// the scenario index and current wealth.
using ControlRule = std::function<double(int step, int scenario, double wealth)>;

struct WealthPaths {
    Eigen::MatrixXd wealth;     // M x (N+1), Euler scheme
    Eigen::MatrixXd wealth_ou;  // M x (N+1), exponential-discount form on the same control path
    Eigen::MatrixXd control;    // M x N, control applied on each cell
};

/// Euler scheme dX = [rho X + (alpha-rho) u] dt + u (psi(0) dB + sum psi(z_j) dHtilde),
/// plus the exact exponential-discount evaluation along the same control path
/// for cross-checking the discretization.
WealthPaths simulate_wealth(const MeanVarianceModel& model, const ControlRule& rule,
                            const NoiseBatch& batch);

/// Weighted squared loading against the clock rates at a step:
/// psi(0)^2 lamB + sum_j psi(z_j)^2 w_j lamH.
double mv_denominator(const MeanVarianceModel& model, const LevyMeasure& levy,
                      const IntensityPath& path, int step);

struct MvCoefficients {
    Eigen::MatrixXd a;  // M x (N+1), strictly negative, a(., N) = -1
    Eigen::MatrixXd c;  // M x (N+1), c(., N) = k
};

// Closed-form affine coefficients of the adjoint value: per scenario
//   A_t = -exp{ -int_t^T [ (alpha-rho)^2 / denominator - 2 rho ] ds },
//   C_t =  k exp{ -int_t^T [ (alpha-rho)^2 / denominator -   rho ] ds },
// integrated by the fixed left rule on the scenario's own intensity
// trajectory. They read the future of the clock rates, which is exactly why
// they are admissible for the G-control but not the F-control.
MvCoefficients mv_coefficients(const MeanVarianceModel& model, const NoiseBatch& batch);

/// Feedback value u = -(alpha-rho)(a x + c) / (a * denominator).
double mv_feedback(const MeanVarianceModel& model, const LevyMeasure& levy,
                   const IntensityPath& path, int step, double a, double c, double x);

ControlRule mv_control_G(const MeanVarianceModel& model, const MvCoefficients& coef,
                         const NoiseBatch& batch);

struct FProjectedCoefficients {
    Eigen::MatrixXd a;  // E[A_t | F_t] per (scenario, grid point)
    Eigen::MatrixXd c;
    int inner_paths = 0;
    std::string accuracy_warning;  // set when the inner budget is too small to trust
};

/// Projections of the affine coefficients on the noise filtration. Exact for
/// deterministic intensity; inner Monte Carlo continuation of the intensity
/// model otherwise (memoized per (step, chain state) for two-state models).
FProjectedCoefficients f_projected_mv_coefficients(const MeanVarianceModel& model,
                                                   const IntensityModel& intensity,
                                                   const NoiseBatch& batch, int inner_paths,
                                                   std::uint64_t seed);

ControlRule mv_control_F(const MeanVarianceModel& model, const FProjectedCoefficients& coef,
                         const NoiseBatch& batch);

struct PerformanceEstimate {
    double value = 0.0;
    double se = 0.0;
};

/// J(u) = mean of -(X_T - k)^2 / 2 over the batch.
PerformanceEstimate mv_performance(const MeanVarianceModel& model, const Eigen::MatrixXd& wealth);

/// Paired estimate of J(candidate) - J(challenger) on common scenarios.
PerformanceEstimate mv_performance_gap(const MeanVarianceModel& model,
                                       const Eigen::MatrixXd& wealth_candidate,
                                       const Eigen::MatrixXd& wealth_challenger);

}  // namespace tcbsde
