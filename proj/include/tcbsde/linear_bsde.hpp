#pragma once

#include <limits>

#include "tcbsde/bsde_solver.hpp"

namespace tcbsde {

/// Coefficients of a linear generator
///   g = A y + C + E(0) phi(0) sqrt(lamB) + sum_j E(z_j) phi(z_j) w_j sqrt(lamH).
/// A is bounded by bound_a; E obeys |E(0)| < bound_e and 0 <= E(z) < bound_e z
/// on jump atoms, which keeps the exponential's logarithm defined.
struct LinearCoefficients {
    std::function<double(int scenario, int step)> drift_y;        // A
    std::function<double(int scenario, int step)> inhomogeneity;  // C
    std::function<double(int scenario, int step, int slot)> loading;  // E, slot 0 = diffusion
    double bound_a = 0.0;
    double bound_e = 0.0;
    double lipschitz_bound = -1.0;  // exact K_g when known; negative derives it from the bounds
};

LinearCoefficients constant_linear_coefficients(double a, double c, double e0, double ez_slope,
                                                const LevyMeasure& levy);

/// The generator above packaged as a Driver with its exact Lipschitz constant.
Driver linear_driver(const LinearCoefficients& coef, const LevyMeasure& levy);

// Discrete stochastic exponential Gamma at the grid points, Gamma_0 = 1.
// Per cell the exponent collects
//   [A - E(0)^2/2 1{lamB!=0}] dt + E(0) 1{lamB!=0}/sqrt(lamB) dB
//   + sum_j [ln(1 + E(z_j) 1{lamH!=0}/sqrt(lamH)) - E(z_j) 1{lamH!=0}/sqrt(lamH)] w_j dLambda^H
//   + sum_j  ln(1 + E(z_j) 1{lamH!=0}/sqrt(lamH)) dHtilde_j,
// so the jump part equals the product of (1 + E/sqrt(lamH)) over cell counts
// times the compensator correction: a discrete Doleans exponential. Cells with
// a vanishing intensity contribute nothing. Throws std::domain_error naming
// the cell when 1 + E/sqrt(lamH) is not positive.
Eigen::VectorXd gamma_process(const LinearCoefficients& coef, const NoiseScenario& s,
                              int scenario_index);

/// Gamma for every scenario of a batch; rows are scenarios.
Eigen::MatrixXd gamma_matrix(const LinearCoefficients& coef, const NoiseBatch& batch);

/// Closed-form solution of the linear equation: per scenario the discounted
/// target xi Gamma_T/Gamma_t + sum_{s >= t} (Gamma_s/Gamma_t) C_s dt, projected
/// on the step's information by the shared regression machinery.
Eigen::MatrixXd linear_solution(const LinearCoefficients& coef, const TerminalCondition& xi,
                                const NoiseBatch& batch, const FeatureSet& features,
                                const RegressionSpec& spec);

/// Structural data of the dominating generator in the comparison theorem:
/// g2 acts on phi only through kappa-weighted clock averages.
struct ComparisonStructure {
    std::function<double(int scenario, int step, int slot)> kappa;
    double kappa_bound = 0.0;  // condition (iv) constant
};

struct ComparisonReport {
    int terminal_order_violations = 0;  // scenarios with xi1 > xi2
    int driver_order_violations = 0;    // cells with g1 > g2 along (Y1, phi1)
    int structure_violations = 0;       // kappa cells violating condition (iv)
    double violation_fraction = 0.0;    // share of (scenario, grid point) with Y1 > Y2 + eps
    double max_exceedance = -std::numeric_limits<double>::infinity();  // max of Y1 - Y2
    long cells_checked = 0;
};

/// Solves both equations and reports where the order Y1 <= Y2 fails beyond
/// eps_tol, together with every precondition violation found.
ComparisonReport comparison_harness(const Driver& g1, const TerminalCondition& xi1,
                                    const Driver& g2, const TerminalCondition& xi2,
                                    const ComparisonStructure& structure, const NoiseBatch& batch,
                                    const FeatureSet& features, const RegressionSpec& spec,
                                    const SolverOptions& options, double eps_tol);

}  // namespace tcbsde
