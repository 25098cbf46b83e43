#include "tcbsde/control.hpp"

#include <cmath>

#include "tcbsde/errors.hpp"
#include "tcbsde/parallel.hpp"

namespace tcbsde {

namespace {

ControlProblem wealth_problem_base(const MeanVarianceModel& model) {
    ControlProblem p;
    p.drift = [model](int step, double, double, double, double u, double x) {
        const auto i = static_cast<std::size_t>(step);
        return model.rate_riskless[i] * x + (model.rate_risky[i] - model.rate_riskless[i]) * u;
    };
    p.drift_dx = [model](int step, double, double, double, double, double) {
        return model.rate_riskless[static_cast<std::size_t>(step)];
    };
    p.loading = [model](int step, int slot, double, double, double u, double) {
        return slot == 0 ? u * model.loading_diffusion[static_cast<std::size_t>(step)]
                         : u * model.loading_jump(step, slot - 1);
    };
    p.loading_dx = [](int, int, double, double, double, double) { return 0.0; };
    p.running_reward = [](int, double, double, double, double, double) { return 0.0; };
    p.running_reward_dx = [](int, double, double, double, double, double) { return 0.0; };
    double k1 = 0.0;
    for (double rho : model.rate_riskless) k1 = std::max(k1, std::abs(rho));
    p.derivative_bound = k1;
    return p;
}

}  // namespace

ControlProblem mean_variance_problem(const MeanVarianceModel& model, const LevyMeasure&) {
    ControlProblem p = wealth_problem_base(model);
    const double k = model.target;
    p.terminal_reward = [k](double x, const NoiseScenario&) { return -0.5 * (x - k) * (x - k); };
    p.terminal_reward_dx = [k](double x, const NoiseScenario&) { return k - x; };
    return p;
}

ControlProblem utility_problem(const MeanVarianceModel& model, const LevyMeasure&,
                               std::function<double(double)> utility,
                               std::function<double(double)> utility_dx) {
    ControlProblem p = wealth_problem_base(model);
    p.terminal_reward = [fn = std::move(utility)](double x, const NoiseScenario&) { return fn(x); };
    p.terminal_reward_dx = [fn = std::move(utility_dx)](double x, const NoiseScenario&) {
        return fn(x);
    };
    return p;
}

double derivative_cross_check(const ControlProblem& problem, const NoiseBatch& batch,
                              std::uint64_t seed, int samples) {
    RngStream stream(seed, 0, StreamPurpose::validation);
    const double h = 1e-5;
    double worst = 0.0;
    for (int trial = 0; trial < samples; ++trial) {
        const int s = static_cast<int>(stream.bits64() % static_cast<std::uint64_t>(batch.size()));
        const int i = static_cast<int>(stream.bits64() % static_cast<std::uint64_t>(batch.steps()));
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        const double t = batch.grid->time(i);
        const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
        const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
        const double u = stream.gaussian();
        const double x = 1.0 + stream.gaussian();
        auto check = [&](double declared, double up, double down) {
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({1.0, std::abs(declared), std::abs(fd)});
            worst = std::max(worst, std::abs(declared - fd) / scale);
        };
        check(problem.drift_dx(i, t, lam_b, lam_h, u, x),
              problem.drift(i, t, lam_b, lam_h, u, x + h),
              problem.drift(i, t, lam_b, lam_h, u, x - h));
        check(problem.running_reward_dx(i, t, lam_b, lam_h, u, x),
              problem.running_reward(i, t, lam_b, lam_h, u, x + h),
              problem.running_reward(i, t, lam_b, lam_h, u, x - h));
        for (int slot = 0; slot <= batch.atom_count(); ++slot)
            check(problem.loading_dx(i, slot, lam_b, lam_h, u, x),
                  problem.loading(i, slot, lam_b, lam_h, u, x + h),
                  problem.loading(i, slot, lam_b, lam_h, u, x - h));
        check(problem.terminal_reward_dx(x, sc), problem.terminal_reward(x + h, sc),
              problem.terminal_reward(x - h, sc));
    }
    return worst;
}

double hamiltonian(const ControlProblem& problem, const LevyMeasure& levy, int step, double t,
                   double lam_b, double lam_h, double u, double x, double y, const PhiSlice& phi) {
    double value = problem.running_reward(step, t, lam_b, lam_h, u, x) +
                   problem.drift(step, t, lam_b, lam_h, u, x) * y +
                   problem.loading(step, 0, lam_b, lam_h, u, x) * phi.diffusion * lam_b;
    for (int j = 0; j < levy.atom_count(); ++j)
        value += problem.loading(step, 1 + j, lam_b, lam_h, u, x) *
                 phi.jump[static_cast<std::size_t>(j)] * levy.atoms[static_cast<std::size_t>(j)].w *
                 lam_h;
    return value;
}

Eigen::MatrixXd simulate_state(const ControlProblem& problem, const ControlRule& rule,
                               const NoiseBatch& batch, double x0, Eigen::MatrixXd* control_out) {
    const int m = batch.size();
    const int n = batch.steps();
    Eigen::MatrixXd state(m, n + 1);
    if (control_out) control_out->resize(m, n);
    parallel_blocks(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t sz = lo; sz < hi; ++sz) {
            const int s = static_cast<int>(sz);
            const NoiseScenario& sc = batch.scenarios[sz];
            double x = x0;
            state(s, 0) = x;
            for (int i = 0; i < n; ++i) {
                const double t = batch.grid->time(i);
                const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
                const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
                const double u =
                    std::clamp(rule(i, s, x), problem.control_min, problem.control_max);
                if (control_out) (*control_out)(s, i) = u;
                double dx = problem.drift(i, t, lam_b, lam_h, u, x) * batch.grid->dt(i) +
                            problem.loading(i, 0, lam_b, lam_h, u, x) * sc.d_brownian(i);
                for (int j = 0; j < batch.atom_count(); ++j)
                    dx += problem.loading(i, 1 + j, lam_b, lam_h, u, x) * sc.d_compensated(i, j);
                x += dx;
                if (!std::isfinite(x))
                    throw NumericalFailure("state became non-finite at step " + std::to_string(i),
                                           i);
                state(s, i + 1) = x;
            }
        }
    });
    return state;
}

BsdeSolution adjoint_solve(const ControlProblem& problem, const Eigen::MatrixXd& state,
                           const Eigen::MatrixXd& control, const NoiseBatch& batch,
                           const RegressionSpec& spec, const SolverOptions& options) {
    const int atoms = batch.atom_count();
    std::vector<double> weights;
    for (const auto& a : batch.levy->atoms) weights.push_back(a.w);

    Driver g;
    g.evaluate = [&problem, &state, &control, weights, atoms](int s, int i, double t, double lam_b,
                                                              double lam_h, double y,
                                                              const PhiSlice& phi) {
        const double u = control(s, i);
        const double x = state(s, i);
        double value = problem.running_reward_dx(i, t, lam_b, lam_h, u, x) +
                       problem.drift_dx(i, t, lam_b, lam_h, u, x) * y +
                       problem.loading_dx(i, 0, lam_b, lam_h, u, x) * phi.diffusion * lam_b;
        for (int j = 0; j < atoms; ++j)
            value += problem.loading_dx(i, 1 + j, lam_b, lam_h, u, x) *
                     phi.jump[static_cast<std::size_t>(j)] * weights[static_cast<std::size_t>(j)] *
                     lam_h;
        return value;
    };
    g.lipschitz_bound = problem.derivative_bound;
    g.description = "adjoint";

    TerminalCondition xi;
    // terminal reward derivative along the realized terminal state
    const int last = static_cast<int>(state.cols()) - 1;
    std::vector<double> terminal(static_cast<std::size_t>(batch.size()));
    for (int s = 0; s < batch.size(); ++s)
        terminal[static_cast<std::size_t>(s)] = problem.terminal_reward_dx(
            state(s, last), batch.scenarios[static_cast<std::size_t>(s)]);
    // scenarios are identified by their seed token within the batch
    xi.evaluate = [terminal, &batch](const NoiseScenario& sc) {
        const std::ptrdiff_t index = &sc - batch.scenarios.data();
        return terminal[static_cast<std::size_t>(index)];
    };
    xi.description = "terminal reward derivative";

    StateColumnFeatures features(state, batch, spec.filtration);
    return solve_backward(g, xi, batch, features, spec, options);
}

std::vector<std::pair<std::string, ControlRule>> standard_challenger_battery(
    const ControlRule& candidate, const NoiseBatch& batch, double x0) {
    std::vector<std::pair<std::string, ControlRule>> battery;
    battery.emplace_back("zero", [](int, int, double) { return 0.0; });
    // constant stake: the candidate's batch-mean initial stake
    double stake = 0.0;
    for (int s = 0; s < batch.size(); ++s) stake += candidate(0, s, x0);
    stake /= batch.size();
    battery.emplace_back("constant", [stake](int, int, double) { return stake; });
    battery.emplace_back("scaled_down_10",
                         [candidate](int i, int s, double x) { return 0.9 * candidate(i, s, x); });
    battery.emplace_back("scaled_up_10",
                         [candidate](int i, int s, double x) { return 1.1 * candidate(i, s, x); });
    const int shift = std::max(1, batch.steps() / 10);
    const int last = batch.steps() - 1;
    battery.emplace_back("time_shifted", [candidate, shift, last](int i, int s, double x) {
        return candidate(std::min(i + shift, last), s, x);
    });
    return battery;
}

MaxPrincipleReport mv_maximum_principle_check(
    const MeanVarianceModel& model, const IntensityModel& intensity, const NoiseBatch& batch,
    const RegressionSpec& spec, Filtration which, int inner_paths, const SolverOptions& options,
    const std::vector<std::pair<std::string, ControlRule>>& extra_challengers,
    const ControlRule* candidate_override) {
    const int m = batch.size();
    const int n = batch.steps();
    MaxPrincipleReport report;

    const MvCoefficients coef_g = mv_coefficients(model, batch);
    FProjectedCoefficients coef_f;
    ControlRule candidate;
    if (which == Filtration::G) {
        candidate = mv_control_G(model, coef_g, batch);
    } else {
        coef_f = f_projected_mv_coefficients(model, intensity, batch, inner_paths,
                                             batch.master_seed ^ 0xF0F0F0F0ULL);
        candidate = mv_control_F(model, coef_f, batch);
    }
    if (candidate_override) candidate = *candidate_override;

    const WealthPaths paths = simulate_wealth(model, candidate, batch);
    const ControlProblem problem = mean_variance_problem(model, *batch.levy);
    const BsdeSolution adjoint =
        adjoint_solve(problem, paths.wealth, paths.control, batch, spec, options);

    // (a) control coefficient of the Hamiltonian along the adjoint solution;
    //     under the F-candidate the adjoint pieces are projected on F first
    Eigen::MatrixXd y_used = adjoint.y.leftCols(n);
    std::vector<Eigen::MatrixXd> phi_used = adjoint.phi;
    if (which == Filtration::F) {
        StateColumnFeatures f_features(paths.wealth, batch, Filtration::F);
        RegressionSpec f_spec = spec;
        f_spec.filtration = Filtration::F;
        for (int i = 0; i < n; ++i) {
            StepRegression reg(f_features, i, f_spec, m);
            y_used.col(i) = reg.fit(y_used.col(i));
            for (auto& slot : phi_used) slot.col(i) = reg.fit(slot.col(i));
        }
    }
    double foc_sq = 0.0, y_sq = 0.0, affine_sq = 0.0, affine_ref_sq = 0.0, phi_id_sq = 0.0;
    long phi_id_count = 0;
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        for (int i = 0; i < n; ++i) {
            const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
            const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
            const double alpha = model.rate_risky[static_cast<std::size_t>(i)];
            const double rho = model.rate_riskless[static_cast<std::size_t>(i)];
            double residual = (alpha - rho) * y_used(s, i) +
                              model.loading_diffusion[static_cast<std::size_t>(i)] *
                                  phi_used[0](s, i) * lam_b;
            for (int j = 0; j < batch.atom_count(); ++j)
                residual += model.loading_jump(i, j) *
                            phi_used[static_cast<std::size_t>(1 + j)](s, i) *
                            batch.levy->atoms[static_cast<std::size_t>(j)].w * lam_h;
            foc_sq += residual * residual;
            y_sq += y_used(s, i) * y_used(s, i);

            const double a = which == Filtration::G ? coef_g.a(s, i) : coef_f.a(s, i);
            const double c = which == Filtration::G ? coef_g.c(s, i) : coef_f.c(s, i);
            const double affine = adjoint.y(s, i) - (a * paths.wealth(s, i) + c);
            affine_sq += affine * affine;
            affine_ref_sq += adjoint.y(s, i) * adjoint.y(s, i);

            // phi(z) = A u psi(z) on slots whose clock is active
            const double u = paths.control(s, i);
            if (lam_b > 0.0) {
                const double target =
                    a * u * model.loading_diffusion[static_cast<std::size_t>(i)];
                const double gap = adjoint.phi[0](s, i) - target;
                phi_id_sq += gap * gap;
                ++phi_id_count;
            }
            if (lam_h > 0.0) {
                for (int j = 0; j < batch.atom_count(); ++j) {
                    const double target = a * u * model.loading_jump(i, j);
                    const double gap = adjoint.phi[static_cast<std::size_t>(1 + j)](s, i) - target;
                    phi_id_sq += gap * gap;
                    ++phi_id_count;
                }
            }
        }
    }
    const double cells = static_cast<double>(m) * n;
    report.first_order_rms = std::sqrt(foc_sq / cells);
    report.first_order_scale = std::sqrt(y_sq / cells);
    report.affine_rms = std::sqrt(affine_sq / cells);
    report.affine_scale = std::sqrt(affine_ref_sq / cells);
    report.phi_identity_rms = phi_id_count > 0 ? std::sqrt(phi_id_sq / phi_id_count) : 0.0;
    report.affine_in_state = true;
    report.concavity_note =
        "Hamiltonian is affine in the state for this problem; concavity holds automatically";

    const PerformanceEstimate j_hat = mv_performance(model, paths.wealth);
    report.j_candidate = j_hat.value;
    report.j_candidate_se = j_hat.se;
    report.expected_terminal_wealth = paths.wealth.col(n).mean();

    auto battery = standard_challenger_battery(candidate, batch, model.initial_wealth);
    for (const auto& extra : extra_challengers) battery.push_back(extra);
    for (const auto& [name, rule] : battery) {
        const WealthPaths challenger_paths = simulate_wealth(model, rule, batch);
        const PerformanceEstimate j = mv_performance(model, challenger_paths.wealth);
        const PerformanceEstimate gap =
            mv_performance_gap(model, paths.wealth, challenger_paths.wealth);
        ChallengeResult result;
        result.name = name;
        result.j_value = j.value;
        result.j_se = j.se;
        result.gap = gap.value;
        result.gap_se = gap.se;
        result.dominated = gap.value >= -3.0 * gap.se;
        report.challengers.push_back(std::move(result));
    }
    return report;
}

FocResidual utility_foc_residual(const MeanVarianceModel& model, const LevyMeasure& levy,
                                 std::function<double(double)> utility_dx, const ControlRule& rule,
                                 const NoiseBatch& batch, const RegressionSpec& spec,
                                 const SolverOptions& options) {
    const int m = batch.size();
    const int n = batch.steps();
    ControlProblem problem =
        utility_problem(model, levy, [](double) { return 0.0; }, std::move(utility_dx));

    const WealthPaths paths = simulate_wealth(model, rule, batch);
    const BsdeSolution adjoint =
        adjoint_solve(problem, paths.wealth, paths.control, batch, spec, options);

    double foc_sq = 0.0, y_sq = 0.0;
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        for (int i = 0; i < n; ++i) {
            const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
            const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
            const double alpha = model.rate_risky[static_cast<std::size_t>(i)];
            const double rho = model.rate_riskless[static_cast<std::size_t>(i)];
            double residual =
                (alpha - rho) * adjoint.y(s, i) +
                model.loading_diffusion[static_cast<std::size_t>(i)] * adjoint.phi[0](s, i) * lam_b;
            for (int j = 0; j < batch.atom_count(); ++j)
                residual += model.loading_jump(i, j) *
                            adjoint.phi[static_cast<std::size_t>(1 + j)](s, i) *
                            batch.levy->atoms[static_cast<std::size_t>(j)].w * lam_h;
            foc_sq += residual * residual;
            y_sq += adjoint.y(s, i) * adjoint.y(s, i);
        }
    }
    FocResidual out;
    out.rms = std::sqrt(foc_sq / (static_cast<double>(m) * n));
    out.scale = std::sqrt(y_sq / (static_cast<double>(m) * n));
    return out;
}

}  // namespace tcbsde
