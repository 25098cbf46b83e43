#include <doctest.h>

#include <cmath>

#include "tcbsde/bsde_solver.hpp"
#include "tcbsde/errors.hpp"
#include "tcbsde/integrand.hpp"
#include "tcbsde/linear_bsde.hpp"

using namespace tcbsde;

namespace {

NoiseBatch constant_batch(double lam_b, double lam_h, std::vector<JumpAtom> atoms, int m, int n,
                          std::uint64_t seed) {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, n));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure(std::move(atoms)));
    IntensityModel model{constant_intensity(lam_b), constant_intensity(lam_h)};
    return simulate_batch(model, grid, levy, m, seed);
}

TerminalCondition terminal_brownian() {
    TerminalCondition xi;
    xi.evaluate = [](const NoiseScenario& s) { return s.d_brownian.sum(); };
    xi.description = "B_T";
    return xi;
}

TerminalCondition terminal_constant(double c) {
    TerminalCondition xi;
    xi.evaluate = [c](const NoiseScenario&) { return c; };
    xi.description = "constant";
    return xi;
}

}  // namespace

TEST_CASE("standard-parameter validation") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 256, 8, 3);

    SUBCASE("zero parameters pass with a zero bound") {
        const ParameterReport report =
            validate_standard_parameters(zero_driver(), terminal_constant(0.0), batch);
        CHECK(report.max_lipschitz_ratio == 0.0);
        CHECK(report.terminal_second_moment == 0.0);
    }

    SUBCASE("a misdeclared slope is caught") {
        Driver g;
        g.evaluate = [](int, int, double, double, double, double y, const PhiSlice&) {
            return 2.0 * y;
        };
        g.lipschitz_bound = 1.0;
        g.description = "2y declared as 1";
        CHECK_THROWS_WITH_AS(validate_standard_parameters(g, terminal_constant(0.0), batch),
                             doctest::Contains("lipschitz"), ValidationFailure);
    }

    SUBCASE("the equality case of the metric passes") {
        Driver g;
        g.evaluate = [](int, int, double, double lam_b, double, double y, const PhiSlice& phi) {
            return y + phi.diffusion * std::sqrt(lam_b);
        };
        g.lipschitz_bound = 1.0;
        g.description = "y + phi(0) sqrt(lamB)";
        const ParameterReport report =
            validate_standard_parameters(g, terminal_constant(0.0), batch);
        CHECK(report.max_lipschitz_ratio <= 1.0 + 1e-9);
        CHECK(report.max_lipschitz_ratio > 0.8);
    }

    SUBCASE("a terminal budget violation is reported") {
        TerminalCondition xi = terminal_constant(10.0);
        xi.square_budget = 1.0;
        CHECK_THROWS_WITH_AS(validate_standard_parameters(zero_driver(), xi, batch),
                             doctest::Contains("budget"), ValidationFailure);
    }
}

TEST_CASE("zero generator with a constant terminal value is solved exactly") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 20000, 10, 5);
    NoiseStateFeatures features(batch, Filtration::G);
    const BsdeSolution sol = solve_backward(zero_driver(), terminal_constant(3.25), batch,
                                            features, RegressionSpec{});
    CHECK((sol.y.array() - 3.25).abs().maxCoeff() <= 1e-9);
    // the integrand of a constant is zero up to covariation-regression noise,
    // whose scale is sd(c dB) sqrt(p/M) / dLambda
    for (const auto& slot : sol.phi) {
        const double rms = std::sqrt(slot.squaredNorm() / static_cast<double>(slot.size()));
        CHECK(rms <= 0.5);
    }
    CHECK(sol.iterations <= 2);
}

TEST_CASE("martingale case recovers the conditional expectation and its integrand") {
    const int m = 20000, n = 25;
    const NoiseBatch batch = constant_batch(1.0, 0.0, {{1.0, 1.0}}, m, n, 7);
    NoiseStateFeatures features(batch, Filtration::G);
    const BsdeSolution sol =
        solve_backward(zero_driver(), terminal_brownian(), batch, features, RegressionSpec{});

    // Y_t = E[B_T | G_t] = B_t and phi(0) = 1
    double mse_y = 0.0, mse_phi = 0.0;
    for (int s = 0; s < m; ++s) {
        for (int i = 0; i <= n; ++i) {
            const double gap = sol.y(s, i) - batch.brownian_levels(s, i);
            mse_y += gap * gap;
        }
        for (int i = 0; i < n; ++i) {
            const double gap = sol.phi[0](s, i) - 1.0;
            mse_phi += gap * gap;
        }
    }
    mse_y /= static_cast<double>(m) * (n + 1);
    mse_phi /= static_cast<double>(m) * n;
    CHECK(mse_y <= 5e-3);
    CHECK(mse_phi <= 5e-2);

    // terminal exactness per scenario
    for (int s = 0; s < m; ++s)
        CHECK(sol.y(s, n) == batch.scenarios[static_cast<std::size_t>(s)].d_brownian.sum());

    // martingale-representation reconstruction: xi ~ Y0 + I(phi)
    double recon = 0.0;
    for (int s = 0; s < m; ++s) {
        Integrand phi = constant_integrand(batch.grid, batch.levy, 0.0, 0.0);
        for (int i = 0; i < n; ++i)
            for (std::size_t slot = 0; slot < sol.phi.size(); ++slot)
                phi.values(i, static_cast<int>(slot)) = sol.phi[slot](s, i);
        const double gap = sol.y(s, n) - sol.y0(s) -
                           integrate(phi, batch.scenarios[static_cast<std::size_t>(s)]);
        recon += gap * gap;
    }
    recon /= m;
    CHECK(recon <= 0.05);
}

TEST_CASE("Y0 is constant across scenarios under a deterministic clock") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 5000, 10, 9);
    NoiseStateFeatures features(batch, Filtration::G);
    const BsdeSolution sol =
        solve_backward(zero_driver(), terminal_brownian(), batch, features, RegressionSpec{});
    const double spread = sol.y0.maxCoeff() - sol.y0.minCoeff();
    CHECK(spread == 0.0);
}

TEST_CASE("Y0 is a functional of the random clock") {
    // xi = B_T^2 has conditional expectation given the intensity field equal
    // to the terminal Brownian clock, so Y0 must track the scenario's clock
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 16));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure({{1.0, 1.0}}));
    IntensityModel intensity{TwoStateIntensity{0.5, 2.0, 0.0, 0.0, 0.5}, constant_intensity(1.0)};
    const NoiseBatch batch = simulate_batch(intensity, grid, levy, 20000, 43);

    TerminalCondition xi;
    xi.evaluate = [](const NoiseScenario& s) {
        const double b = s.d_brownian.sum();
        return b * b;
    };
    xi.description = "B_T^2";
    NoiseStateFeatures features(batch, Filtration::G);
    const BsdeSolution sol = solve_backward(zero_driver(), xi, batch, features, RegressionSpec{});

    double mse = 0.0, var = 0.0;
    const double mean_clock = 1.25;  // equiprobable clocks 0.5 and 2.0
    for (int s = 0; s < batch.size(); ++s) {
        const double clock = batch.scenarios[static_cast<std::size_t>(s)].intensity->cum_b.back();
        mse += std::pow(sol.y0(s) - clock, 2);
        var += std::pow(clock - mean_clock, 2);
    }
    CHECK(sol.y0.maxCoeff() - sol.y0.minCoeff() > 0.5);  // genuinely random initial value
    CHECK(mse / var <= 0.05);                            // explained by the clock
}

TEST_CASE("the time-t value is orthogonal to the future integral of phi") {
    const int m = 50000, n = 20;
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, m, n, 11);
    NoiseStateFeatures features(batch, Filtration::G);
    const BsdeSolution sol =
        solve_backward(zero_driver(), terminal_brownian(), batch, features, RegressionSpec{});
    const int t = n / 2;
    // Y_t is a function of the step-t features and every later term of the
    // integral is a centered increment given that information
    Eigen::VectorXd prod(m);
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        double future_integral = 0.0;
        for (int i = t; i < n; ++i) {
            future_integral += sol.phi[0](s, i) * sc.d_brownian(i);
            for (int j = 0; j < batch.atom_count(); ++j)
                future_integral += sol.phi[static_cast<std::size_t>(1 + j)](s, i) *
                                   sc.d_compensated(i, j);
        }
        prod(s) = sol.y(s, t) * future_integral;
    }
    const double mean = prod.mean();
    const double se =
        std::sqrt((prod.array() - mean).matrix().squaredNorm() / (m - 1.0) / m);
    CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("too coarse a grid for the declared slope is rejected") {
    const NoiseBatch batch = constant_batch(1.0, 0.0, {{1.0, 1.0}}, 64, 2, 13);
    Driver g = zero_driver();
    g.lipschitz_bound = 2.5;  // K_g dt = 1.25
    NoiseStateFeatures features(batch, Filtration::G);
    CHECK_THROWS_AS(solve_backward(g, terminal_constant(0.0), batch, features, RegressionSpec{}),
                    std::invalid_argument);
}

TEST_CASE("non-convergence surfaces the distance trace") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 1000, 10, 17);
    const LinearCoefficients coef =
        constant_linear_coefficients(0.3, 0.1, 0.2, 0.4, *batch.levy);
    const Driver g = linear_driver(coef, *batch.levy);
    NoiseStateFeatures features(batch, Filtration::G);
    SolverOptions options;
    options.tolerance = 1e-14;
    options.max_iterations = 2;  // far too few
    try {
        solve_backward(g, terminal_brownian(), batch, features, RegressionSpec{}, options);
        FAIL("expected ConvergenceFailure");
    } catch (const ConvergenceFailure& e) {
        CHECK(e.distance_trace.size() == 2);
        CHECK(e.distance_trace[1] > 1e-14);
    }
}

TEST_CASE("contraction probe") {
    const int m = 4000, n = 20;
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, m, n, 19);
    NoiseStateFeatures features(batch, Filtration::G);
    const TerminalCondition xi = terminal_brownian();

    const BsdeIterate start_a = make_initial_iterate(xi, batch);
    BsdeIterate start_b = make_initial_iterate(xi, batch, 0.0, 1.0);

    SUBCASE("the zero generator maps any iterate to the same image at once") {
        const ContractionProbe probe = picard_contraction_probe(
            zero_driver(), xi, batch, features, RegressionSpec{}, start_a, start_b, 3);
        CHECK(probe.cross_distance_first == 0.0);
        CHECK(probe.distances_a[1] == 0.0);
        CHECK(probe.distances_b[1] == 0.0);
        CHECK(probe.final_y_rms_gap == 0.0);
    }

    SUBCASE("identical iterates stay identical") {
        const ContractionProbe probe = picard_contraction_probe(
            zero_driver(), xi, batch, features, RegressionSpec{}, start_a, start_a, 2);
        CHECK(probe.cross_distance_first == 0.0);
        CHECK(probe.final_y_rms_gap == 0.0);
    }

    SUBCASE("a linear generator contracts from the first sweep") {
        const LinearCoefficients coef =
            constant_linear_coefficients(0.25, 0.1, 0.15, 0.25, *batch.levy);
        const Driver g = linear_driver(coef, *batch.levy);
        const ContractionProbe probe =
            picard_contraction_probe(g, xi, batch, features, RegressionSpec{}, start_a, start_b,
                                     20, SolverOptions{}, 1e-14);
        for (double r : probe.ratios_a) CHECK(r < 1.0);
        for (double r : probe.ratios_b) CHECK(r < 1.0);
        CHECK(probe.distances_a.back() <= 1e-8);
        CHECK(probe.final_y_rms_gap <= 1e-6);
    }
}
