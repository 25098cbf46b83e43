#include <doctest.h>

#include <cmath>
#include <random>

#include "tcbsde/integrand.hpp"

using namespace tcbsde;

namespace {

NoiseBatch constant_batch(double lam_b, double lam_h, std::vector<JumpAtom> atoms, int m, int n,
                          std::uint64_t seed) {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, n));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure(std::move(atoms)));
    IntensityModel model{constant_intensity(lam_b), constant_intensity(lam_h)};
    return simulate_batch(model, grid, levy, m, seed);
}

}  // namespace

TEST_CASE("integrate reproduces the measure of simple sets") {
    const NoiseBatch batch = constant_batch(1.0, 2.0, {{1.0, 0.5}}, 32, 16, 3);
    for (const auto& sc : batch.scenarios) {
        const Integrand zero = constant_integrand(batch.grid, batch.levy, 0.0, 0.0);
        CHECK(integrate(zero, sc) == 0.0);

        const Integrand diffusion_one = constant_integrand(batch.grid, batch.levy, 1.0, 0.0);
        CHECK(integrate(diffusion_one, sc) == doctest::Approx(sc.d_brownian.sum()).epsilon(1e-14));

        const Integrand jump_one = constant_integrand(batch.grid, batch.levy, 0.0, 1.0);
        const double expected = sc.counts.sum() - 0.5 * sc.intensity->cum_h.back();
        CHECK(integrate(jump_one, sc) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("pathwise norm matches hand computations") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{2.0, 0.5}}, 4, 10, 5);
    const NoiseScenario& sc = batch.scenarios.front();

    const Integrand diffusion_one = constant_integrand(batch.grid, batch.levy, 1.0, 0.0);
    CHECK(i_norm_squared(diffusion_one, *sc.intensity) == doctest::Approx(1.0).epsilon(1e-14));

    // phi(z) = z on the atom (2, 0.5): 4 * 0.5 * cumH_T = 2
    Integrand linear_in_z = constant_integrand(batch.grid, batch.levy, 0.0, 2.0);
    CHECK(i_norm_squared(linear_in_z, *sc.intensity) == doctest::Approx(2.0).epsilon(1e-14));

    const Integrand zero = constant_integrand(batch.grid, batch.levy, 0.0, 0.0);
    CHECK(i_norm_squared(zero, *sc.intensity) == 0.0);
}

TEST_CASE("grid mismatch is rejected") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 2, 10, 7);
    auto other_grid = std::make_shared<TimeGrid>(make_grid(1.0, 5));
    const Integrand phi = constant_integrand(other_grid, batch.levy, 1.0, 0.0);
    CHECK_THROWS_AS(integrate(phi, batch.scenarios.front()), std::invalid_argument);
}

TEST_CASE("isometry holds for constant and path-dependent integrands") {
    const int m = 100000;

    SUBCASE("unit diffusion against a unit clock") {
        const NoiseBatch batch = constant_batch(1.0, 0.0, {{1.0, 1.0}}, m, 50, 11);
        const auto check = isometry_check(
            [&](const NoiseScenario&) { return constant_integrand(batch.grid, batch.levy, 1.0, 0.0); },
            batch);
        CHECK(std::abs(check.lhs - check.rhs) <= 3.0 * check.se);
        CHECK(check.rhs == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("unit jump loading against a doubled clock") {
        const NoiseBatch batch = constant_batch(0.0, 2.0, {{1.0, 1.0}}, m, 50, 13);
        const auto check = isometry_check(
            [&](const NoiseScenario&) { return constant_integrand(batch.grid, batch.levy, 0.0, 1.0); },
            batch);
        CHECK(std::abs(check.lhs - check.rhs) <= 3.0 * check.se);
        CHECK(check.rhs == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("path-dependent Brownian level: discrete Ito isometry is exact") {
        const int n = 50;
        const NoiseBatch batch = constant_batch(1.0, 0.0, {{1.0, 1.0}}, m, n, 17);
        const auto check = isometry_check(
            [](const NoiseScenario& s) {
                return build_integrand(s, [](const ScenarioView& view, std::span<double> row) {
                    row[0] = view.brownian_level();
                });
            },
            batch);
        CHECK(std::abs(check.lhs - check.rhs) <= 3.0 * check.se);
        // E of the discrete norm is sum_i t_i dt; the continuous limit is 1/2
        double expected = 0.0;
        for (int i = 0; i < n; ++i) expected += batch.grid->time(i) * batch.grid->dt(i);
        CHECK(expected == doctest::Approx(0.49).epsilon(1e-12));
        CHECK(std::abs(check.rhs - expected) <= 4.0 * check.se);
    }
}

TEST_CASE("intensity-measurable factors move through the integral exactly") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 10000, 20, 19);
    const IntegrandBuilder builder = [](const NoiseScenario& s) {
        return build_integrand(s, [](const ScenarioView& view, std::span<double> row) {
            row[0] = view.brownian_level();
            for (std::size_t j = 1; j < row.size(); ++j) row[j] = 1.0 + view.eta_level();
        });
    };

    const double unit = factor_check([](const IntensityPath&) { return 1.0; }, builder, batch);
    CHECK(unit == 0.0);

    const double clock =
        factor_check([](const IntensityPath& p) { return p.cum_h.back(); }, builder, batch);
    CHECK(clock <= 1e-12);

    const double indicator = factor_check(
        [](const IntensityPath& p) { return p.cum_b.back() > 1.0 ? 1.0 : 0.0; }, builder, batch);
    CHECK(indicator == 0.0);
}

TEST_CASE("integration is linear in the integrand") {
    const NoiseBatch batch = constant_batch(1.0, 1.5, {{1.0, 0.5}, {-0.5, 1.0}}, 64, 12, 23);
    std::mt19937_64 gen(99);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& sc : batch.scenarios) {
        Integrand phi = constant_integrand(batch.grid, batch.levy, 0.0, 0.0);
        Integrand psi = phi;
        for (int i = 0; i < phi.steps(); ++i)
            for (int k = 0; k < phi.slots(); ++k) {
                phi.values(i, k) = normal(gen);
                psi.values(i, k) = normal(gen);
            }
        const double a = normal(gen), b = normal(gen);
        Integrand combo = phi;
        combo.values = a * phi.values + b * psi.values;
        const double direct = integrate(combo, sc);
        const double split = a * integrate(phi, sc) + b * integrate(psi, sc);
        CHECK(direct == doctest::Approx(split).epsilon(1e-11));
    }
}

TEST_CASE("prefix view refuses to look into the future") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, 2, 8, 29);
    const ScenarioView view(batch.scenarios.front(), 3);
    CHECK_NOTHROW(view.d_brownian(2));
    CHECK_THROWS_AS(view.d_brownian(3), std::logic_error);
    CHECK_THROWS_AS(view.count(5, 0), std::logic_error);
}
