#pragma once

#include "tcbsde/bsde_solver.hpp"
#include "tcbsde/wealth.hpp"

namespace tcbsde {

/// State dynamics dX = b dt + kappa(0) dB + sum_j kappa(z_j) dHtilde and the
/// reward pair (running f, terminal l), with explicit x-derivatives. Slot 0 of
/// kappa is the diffusion loading, slot 1+j the loading on atom z_j. Market
/// data lives on grid points, so the callbacks receive the step index along
/// with its time.
struct ControlProblem {
    using Coefficient =
        std::function<double(int step, double t, double lam_b, double lam_h, double u, double x)>;
    using Loading = std::function<double(int step, int slot, double lam_b, double lam_h, double u,
                                         double x)>;
    Coefficient drift, drift_dx;
    Loading loading, loading_dx;
    Coefficient running_reward, running_reward_dx;
    std::function<double(double x, const NoiseScenario& s)> terminal_reward;
    std::function<double(double x, const NoiseScenario& s)> terminal_reward_dx;
    double control_min = -std::numeric_limits<double>::infinity();
    double control_max = std::numeric_limits<double>::infinity();
    double derivative_bound = 0.0;  // K_1 of the admissibility bounds
};

/// Wealth problem with terminal reward l(x) = -(x-k)^2/2.
ControlProblem mean_variance_problem(const MeanVarianceModel& model, const LevyMeasure& levy);

/// Wealth problem with a caller-supplied utility and derivative.
ControlProblem utility_problem(const MeanVarianceModel& model, const LevyMeasure& levy,
                               std::function<double(double)> utility,
                               std::function<double(double)> utility_dx);

/// Largest relative gap between the declared x-derivatives and central finite
/// differences over sampled states; the derivative callbacks must agree.
double derivative_cross_check(const ControlProblem& problem, const NoiseBatch& batch,
                              std::uint64_t seed = 0xD1FFULL, int samples = 256);

/// f + b y + kappa(0) phi(0) lamB + sum_j kappa(z_j) phi(z_j) w_j lamH.
double hamiltonian(const ControlProblem& problem, const LevyMeasure& levy, int step, double t,
                   double lam_b, double lam_h, double u, double x, double y, const PhiSlice& phi);

/// Euler simulation of the problem's state under a control rule.
Eigen::MatrixXd simulate_state(const ControlProblem& problem, const ControlRule& rule,
                               const NoiseBatch& batch, double x0,
                               Eigen::MatrixXd* control_out = nullptr);

// Adjoint equation along an admissible pair: generator d_x H with (u, x)
// frozen pathwise, terminal value d_x l(X_T). Solved by the backward solver on
// state-column features; the terminal values hold exactly per scenario.
BsdeSolution adjoint_solve(const ControlProblem& problem, const Eigen::MatrixXd& state,
                           const Eigen::MatrixXd& control, const NoiseBatch& batch,
                           const RegressionSpec& spec, const SolverOptions& options = {});

struct ChallengeResult {
    std::string name;
    double j_value = 0.0, j_se = 0.0;
    double gap = 0.0, gap_se = 0.0;  // J(candidate) - J(challenger), paired
    bool dominated = false;          // gap >= -3 se
};

struct MaxPrincipleReport {
    double first_order_rms = 0.0;   // RMS of the control coefficient of the Hamiltonian
    double first_order_scale = 0.0; // RMS of the adjoint Y
    double affine_rms = 0.0;        // RMS of Y - (A X + C)
    double affine_scale = 0.0;
    double phi_identity_rms = 0.0;  // RMS of phi(z) - A u psi(z) over used slots
    bool affine_in_state = true;
    std::string concavity_note;
    double j_candidate = 0.0, j_candidate_se = 0.0;
    double expected_terminal_wealth = 0.0;
    std::vector<ChallengeResult> challengers;
};

/// Verifies a candidate control for the mean-variance problem: first-order
/// condition of the (projected) Hamiltonian along the adjoint solution, the
/// affine identity of the adjoint, the automatic concavity of the affine
/// Hamiltonian, and performance dominance against a battery of challengers.
/// `which` selects the G- or F-feedback as candidate unless an explicit
/// candidate rule is supplied (e.g. to expose the residual of a non-optimal
/// control).
MaxPrincipleReport mv_maximum_principle_check(
    const MeanVarianceModel& model, const IntensityModel& intensity, const NoiseBatch& batch,
    const RegressionSpec& spec, Filtration which, int inner_paths, const SolverOptions& options,
    const std::vector<std::pair<std::string, ControlRule>>& extra_challengers = {},
    const ControlRule* candidate_override = nullptr);

/// The standard, reproducible challenger battery around a candidate rule:
/// no investment, a constant stake, +-10% perturbations, a time-shifted rule.
std::vector<std::pair<std::string, ControlRule>> standard_challenger_battery(
    const ControlRule& candidate, const NoiseBatch& batch, double x0);

struct FocResidual {
    double rms = 0.0;
    double scale = 0.0;  // RMS of the adjoint Y
};

/// First-order condition of the utility problem along a control: RMS over
/// (scenario, step) of the control coefficient of the Hamiltonian composed
/// with the adjoint solution,
///   (alpha-rho) Y + psi(0) phi(0) lamB + sum_j psi(z_j) phi(z_j) w_j lamH.
FocResidual utility_foc_residual(const MeanVarianceModel& model, const LevyMeasure& levy,
                                 std::function<double(double)> utility_dx, const ControlRule& rule,
                                 const NoiseBatch& batch, const RegressionSpec& spec,
                                 const SolverOptions& options = {});

}  // namespace tcbsde
