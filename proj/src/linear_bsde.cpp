#include "tcbsde/linear_bsde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tcbsde/parallel.hpp"

namespace tcbsde {

LinearCoefficients constant_linear_coefficients(double a, double c, double e0, double ez_slope,
                                                const LevyMeasure& levy) {
    LinearCoefficients coef;
    coef.drift_y = [a](int, int) { return a; };
    coef.inhomogeneity = [c](int, int) { return c; };
    std::vector<double> jump_values;
    for (const auto& atom : levy.atoms) jump_values.push_back(ez_slope * atom.z);
    coef.loading = [e0, jump_values](int, int, int slot) {
        return slot == 0 ? e0 : jump_values[static_cast<std::size_t>(slot - 1)];
    };
    double ez_sq = 0.0;
    for (std::size_t j = 0; j < levy.atoms.size(); ++j)
        ez_sq += jump_values[j] * jump_values[j] * levy.atoms[j].w;
    coef.bound_a = std::abs(a);
    coef.bound_e = std::max(std::abs(e0), std::abs(ez_slope));
    coef.lipschitz_bound = std::max({std::abs(a), std::abs(e0), std::sqrt(ez_sq)});
    return coef;
}

Driver linear_driver(const LinearCoefficients& coef, const LevyMeasure& levy) {
    const int atoms = levy.atom_count();
    std::vector<double> weights;
    for (const auto& a : levy.atoms) weights.push_back(a.w);
    Driver g;
    g.evaluate = [coef, weights, atoms](int scenario, int step, double, double lam_b, double lam_h,
                                        double y, const PhiSlice& phi) {
        double value = coef.drift_y(scenario, step) * y + coef.inhomogeneity(scenario, step) +
                       coef.loading(scenario, step, 0) * phi.diffusion * std::sqrt(lam_b);
        double jump = 0.0;
        for (int j = 0; j < atoms; ++j)
            jump += coef.loading(scenario, step, 1 + j) * phi.jump[static_cast<std::size_t>(j)] *
                    weights[static_cast<std::size_t>(j)];
        return value + jump * std::sqrt(lam_h);
    };
    // |dg| <= |A||dy| + |E(0)||dphi(0)|sqrt(lamB) + (sum E^2 w)^{1/2} (sum dphi^2 w)^{1/2} sqrt(lamH)
    g.lipschitz_bound =
        coef.lipschitz_bound >= 0.0
            ? coef.lipschitz_bound
            : std::max(coef.bound_a,
                       coef.bound_e * std::max(1.0, std::sqrt(levy_second_moment(levy))));
    g.description = "linear";
    return g;
}

Eigen::VectorXd gamma_process(const LinearCoefficients& coef, const NoiseScenario& s,
                              int scenario_index) {
    const int n = s.steps();
    const int atoms = s.atom_count();
    const IntensityPath& path = *s.intensity;
    Eigen::VectorXd gamma(n + 1);
    gamma(0) = 1.0;
    double exponent = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dt = s.grid().dt(i);
        const double lam_b = path.lam_b[static_cast<std::size_t>(i)];
        const double lam_h = path.lam_h[static_cast<std::size_t>(i)];
        const double a = coef.drift_y(scenario_index, i);
        const double e0 = coef.loading(scenario_index, i, 0);
        double term = a * dt;
        if (lam_b != 0.0) {
            term += -0.5 * e0 * e0 * dt + e0 / std::sqrt(lam_b) * s.d_brownian(i);
        }
        if (lam_h != 0.0) {
            const double dch = path.d_cum_h(i);
            for (int j = 0; j < atoms; ++j) {
                const double ez = coef.loading(scenario_index, i, 1 + j) / std::sqrt(lam_h);
                const double one_plus = 1.0 + ez;
                if (!(one_plus > 0.0))
                    throw std::domain_error(
                        "gamma_process: 1 + E/sqrt(lamH) not positive at step " +
                        std::to_string(i) + ", atom " + std::to_string(j));
                const double log_term = std::log(one_plus);
                const double w = s.levy->atoms[static_cast<std::size_t>(j)].w;
                term += (log_term - ez) * w * dch + log_term * s.d_compensated(i, j);
            }
        }
        exponent += term;
        gamma(i + 1) = std::exp(exponent);
    }
    return gamma;
}

Eigen::MatrixXd gamma_matrix(const LinearCoefficients& coef, const NoiseBatch& batch) {
    Eigen::MatrixXd gamma(batch.size(), batch.steps() + 1);
    parallel_blocks(static_cast<std::size_t>(batch.size()), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s)
            gamma.row(static_cast<Eigen::Index>(s)) =
                gamma_process(coef, batch.scenarios[s], static_cast<int>(s)).transpose();
    });
    return gamma;
}

Eigen::MatrixXd linear_solution(const LinearCoefficients& coef, const TerminalCondition& xi,
                                const NoiseBatch& batch, const FeatureSet& features,
                                const RegressionSpec& spec) {
    const int m = batch.size();
    const int n = batch.steps();
    const Eigen::MatrixXd gamma = gamma_matrix(coef, batch);

    // discounted target per (scenario, step), built backward:
    // target_i = xi Gamma_n/Gamma_i + sum_{l=i}^{n-1} (Gamma_l/Gamma_i) C_l dt
    Eigen::MatrixXd target(m, n + 1);
    for (int s = 0; s < m; ++s) {
        const double terminal = xi.evaluate(batch.scenarios[static_cast<std::size_t>(s)]);
        target(s, n) = terminal;
        double acc = terminal * gamma(s, n);  // running xi Gamma_n + sum Gamma_l C_l dt
        for (int i = n - 1; i >= 0; --i) {
            acc += gamma(s, i) * coef.inhomogeneity(s, i) * batch.grid->dt(i);
            target(s, i) = acc / gamma(s, i);
        }
    }

    Eigen::MatrixXd y(m, n + 1);
    y.col(n) = target.col(n);
    for (int i = 0; i < n; ++i) {
        StepRegression reg(features, i, spec, m);
        y.col(i) = reg.fit(target.col(i));
    }
    return y;
}

ComparisonReport comparison_harness(const Driver& g1, const TerminalCondition& xi1,
                                    const Driver& g2, const TerminalCondition& xi2,
                                    const ComparisonStructure& structure, const NoiseBatch& batch,
                                    const FeatureSet& features, const RegressionSpec& spec,
                                    const SolverOptions& options, double eps_tol) {
    const int m = batch.size();
    const int n = batch.steps();
    const int atoms = batch.atom_count();
    ComparisonReport report;

    for (const auto& sc : batch.scenarios)
        if (xi1.evaluate(sc) > xi2.evaluate(sc)) ++report.terminal_order_violations;

    // condition (iv) on kappa: |kappa(0)| < K and 0 <= kappa(z_j) < K z_j
    for (int s = 0; s < m; ++s) {
        for (int i = 0; i < n; ++i) {
            if (!(std::abs(structure.kappa(s, i, 0)) < structure.kappa_bound))
                ++report.structure_violations;
            for (int j = 0; j < atoms; ++j) {
                const double kz = structure.kappa(s, i, 1 + j);
                const double z = batch.levy->atoms[static_cast<std::size_t>(j)].z;
                if (!(kz >= 0.0 && kz < structure.kappa_bound * z)) ++report.structure_violations;
            }
        }
    }

    const BsdeSolution sol1 = solve_backward(g1, xi1, batch, features, spec, options);
    const BsdeSolution sol2 = solve_backward(g2, xi2, batch, features, spec, options);

    std::vector<double> jump_slice(static_cast<std::size_t>(atoms));
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < atoms; ++j)
                jump_slice[static_cast<std::size_t>(j)] = sol1.phi[static_cast<std::size_t>(1 + j)](s, i);
            const PhiSlice phi1{sol1.phi[0](s, i), jump_slice};
            const double t = batch.grid->time(i);
            const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
            const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
            const double y1 = sol1.y(s, i);
            const double lhs = g1.evaluate(s, i, t, lam_b, lam_h, y1, phi1);
            const double rhs = g2.evaluate(s, i, t, lam_b, lam_h, y1, phi1);
            if (lhs > rhs + 1e-12 * std::max(1.0, std::abs(rhs))) ++report.driver_order_violations;
        }
    }

    long violations = 0;
    for (int s = 0; s < m; ++s) {
        for (int i = 0; i <= n; ++i) {
            const double exceedance = sol1.y(s, i) - sol2.y(s, i);
            report.max_exceedance = std::max(report.max_exceedance, exceedance);
            if (exceedance > eps_tol) ++violations;
            ++report.cells_checked;
        }
    }
    report.violation_fraction =
        static_cast<double>(violations) / static_cast<double>(report.cells_checked);
    return report;
}

}  // namespace tcbsde
