#pragma once

#include "tcbsde/driver.hpp"
#include "tcbsde/integrand.hpp"
#include "tcbsde/regression.hpp"

namespace tcbsde {

/// A full trajectory iterate (Y, phi): Y per (scenario, grid point), phi per
/// slot as an M x N matrix (slot 0 diffusion, then one per atom).
struct BsdeIterate {
    Eigen::MatrixXd y;                 // M x (N+1)
    std::vector<Eigen::MatrixXd> phi;  // (1+J) matrices, each M x N
};

struct BsdeSolution {
    Eigen::MatrixXd y;                 // M x (N+1); column N equals xi exactly
    std::vector<Eigen::MatrixXd> phi;  // per slot, M x N, predictable by construction
    Eigen::VectorXd y0;                // initial values, measurable in the intensity field
    std::vector<double> distance_trace;      // successive-iterate distances
    std::vector<double> condition_numbers;   // worst regression condition per iteration
    int iterations = 0;
};

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iterations = 25;
    int inner_iterations = 50;  // fixed-point solves of the implicit step
};

// Picard iteration on whole trajectories. One sweep maps the previous iterate
// (U, psi) to the next (Y, phi): backward from Y_N = xi, at each step the
// integrand is extracted from covariation regressions of Y_{i+1} against the
// noise increments, and Y_i solves
//     Y_i = E[Y_{i+1} | info_i] + g(t_i, lam_i, Y_i, psi_i) dt
// implicitly in Y_i (one-dimensional fixed point, contraction for K_g dt < 1).
// The generator consumes the previous iterate's integrand, so the sweep is the
// discrete analogue of the contraction map on trajectory space and the
// recorded successive distances are the contraction diagnostics. Slots whose
// clock increment vanishes carry integrand value zero; they are null for the
// I-norm.
BsdeSolution solve_backward(const Driver& g, const TerminalCondition& xi, const NoiseBatch& batch,
                            const FeatureSet& features, const RegressionSpec& spec,
                            const SolverOptions& options = {},
                            const BsdeIterate* initial = nullptr);

/// Distance between iterates in the trajectory metric: max over the grid of
/// the batch-mean squared Y-gap, plus the batch-mean clock-weighted squared
/// integrand gap.
double iterate_distance(const BsdeIterate& a, const BsdeIterate& b, const NoiseBatch& batch);

BsdeIterate make_initial_iterate(const TerminalCondition& xi, const NoiseBatch& batch,
                                 double y_fill = std::numeric_limits<double>::quiet_NaN(),
                                 double phi_fill = 0.0);

struct ContractionProbe {
    std::vector<double> distances_a, distances_b;  // successive-sweep distances per chain
    std::vector<double> ratios_a, ratios_b;
    double cross_distance_first = 0.0;  // distance between the two first images
    double final_y_rms_gap = 0.0;       // RMS gap of the two final Y trajectories
};

/// Applies the sweep repeatedly to two starting iterates and records the
/// distance diagnostics of both chains. A chain stops early once its
/// successive distance falls to stop_tolerance; past that point the iterates
/// sit at the fixed point up to rounding and ratios stop being meaningful.
ContractionProbe picard_contraction_probe(const Driver& g, const TerminalCondition& xi,
                                          const NoiseBatch& batch, const FeatureSet& features,
                                          const RegressionSpec& spec, const BsdeIterate& start_a,
                                          const BsdeIterate& start_b, int sweeps,
                                          const SolverOptions& options = {},
                                          double stop_tolerance = 0.0);

/// Solution export: scenario_id, t, Y, phi_0, phi_<z_j>... (phi rows exist for
/// steps only; the terminal row prints zeros).
void export_solution_csv(const BsdeSolution& solution, const NoiseBatch& batch, std::ostream& out);

}  // namespace tcbsde
