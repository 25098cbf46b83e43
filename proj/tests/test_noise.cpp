#include <doctest.h>

#include <cmath>
#include <complex>

#include "tcbsde/noise_batch.hpp"
#include "tcbsde/parallel.hpp"

using namespace tcbsde;

namespace {

NoiseBatch constant_batch(double lam_b, double lam_h, std::vector<JumpAtom> atoms, int m, int n,
                          std::uint64_t seed, double horizon = 1.0) {
    auto grid = std::make_shared<TimeGrid>(make_grid(horizon, n));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure(std::move(atoms)));
    IntensityModel model{constant_intensity(lam_b), constant_intensity(lam_h)};
    return simulate_batch(model, grid, levy, m, seed);
}

}  // namespace

TEST_CASE("zero clocks produce exactly zero noise") {
    const NoiseBatch batch = constant_batch(0.0, 0.0, {{1.0, 1.0}}, 50, 8, 11);
    for (const auto& sc : batch.scenarios) {
        CHECK(sc.d_brownian.cwiseAbs().maxCoeff() == 0.0);
        CHECK(sc.counts.cwiseAbs().maxCoeff() == 0.0);
        CHECK(sc.d_compensated.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("compensated increments satisfy their defining identity") {
    const NoiseBatch batch = constant_batch(1.0, 2.0, {{1.0, 0.5}, {-2.0, 0.25}}, 20, 10, 5);
    for (const auto& sc : batch.scenarios)
        for (int i = 0; i < sc.steps(); ++i)
            for (int j = 0; j < sc.atom_count(); ++j) {
                const double w = sc.levy->atoms[static_cast<std::size_t>(j)].w;
                CHECK(sc.d_compensated(i, j) ==
                      doctest::Approx(sc.counts(i, j) - w * sc.intensity->d_cum_h(i))
                          .epsilon(1e-14));
            }
}

TEST_CASE("total jump count has the Poisson mean") {
    const int m = 100000;
    const NoiseBatch batch = constant_batch(0.0, 2.0, {{1.0, 1.0}}, m, 10, 17);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& sc : batch.scenarios) {
        const double total = sc.counts.sum();
        sum += total;
        sum_sq += total * total;
    }
    const double mean = sum / m;
    const double se = std::sqrt((sum_sq / m - mean * mean) / m);
    CHECK(std::abs(mean - 2.0) <= 3.0 * se);
}

TEST_CASE("Brownian empirical characteristic function matches the corrected reference") {
    const int m = 100000;
    const NoiseBatch batch = constant_batch(1.0, 0.0, {{1.0, 1.0}}, m, 10, 23);
    const CharFunctionCheck check = empirical_char_function(batch, 1.0, 10, NoiseComponent::brownian);
    // Gaussian characteristic function at c=1, unit clock: exp(-1/2)
    CHECK(check.reference.real() == doctest::Approx(0.60653065971263342).epsilon(1e-12));
    CHECK(check.reference.imag() == doctest::Approx(0.0));
    CHECK(check.gap() <= std::max(0.01, 3.0 * check.se));

    const CharFunctionCheck zero = empirical_char_function(batch, 0.0, 10, NoiseComponent::brownian);
    CHECK(std::abs(zero.empirical - std::complex<double>(1.0, 0.0)) <= 1e-14);
}

TEST_CASE("jump empirical characteristic function matches the levy exponent") {
    const int m = 100000;
    const NoiseBatch batch = constant_batch(0.0, 1.0, {{1.0, 1.0}}, m, 10, 29);
    const double pi = std::acos(-1.0);
    const CharFunctionCheck check = empirical_char_function(batch, pi, 10, NoiseComponent::jump);

    // exponent (e^{i pi} - 1 - i pi) = -2 - i pi, so the reference is -e^{-2}
    CHECK(check.reference.real() == doctest::Approx(-std::exp(-2.0)).epsilon(1e-12));
    CHECK(check.reference.imag() == doctest::Approx(0.0).epsilon(1e-12));

    // brute-force expectation over Poisson(1) outcomes 0..30 of e^{i pi (k - 1)}
    std::complex<double> brute(0.0, 0.0);
    double p = std::exp(-1.0);
    for (int k = 0; k <= 30; ++k) {
        brute += p * std::exp(std::complex<double>(0.0, pi * (k - 1.0)));
        p /= (k + 1.0);
        p *= 1.0;
    }
    CHECK(std::abs(brute - check.reference) <= 1e-10);
    CHECK(check.gap() <= std::max(0.01, 3.0 * check.se));
}

TEST_CASE("doubly stochastic moments obey the law of total variance") {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 10));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure({{1.0, 1.0}}));
    const int m = 100000;

    SUBCASE("plain Poisson for a deterministic clock") {
        IntensityModel model{constant_intensity(0.0), constant_intensity(2.0)};
        const NoiseBatch batch = simulate_batch(model, grid, levy, m, 31);
        const MomentCheck check = doubly_stochastic_moments(batch, 0, 10, 0);
        CHECK(check.ref_mean == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(check.ref_variance == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(std::abs(check.mean - 2.0) <= 3.0 * check.se_mean);
        CHECK(std::abs(check.variance - 2.0) <= 3.0 * check.se_variance);
    }

    SUBCASE("random two-state clock adds the clock variance") {
        IntensityModel model{constant_intensity(0.0), TwoStateIntensity{1.0, 3.0, 0.0, 0.0, 0.5}};
        const NoiseBatch batch = simulate_batch(model, grid, levy, m, 37);
        const MomentCheck check = doubly_stochastic_moments(batch, 0, 10, 0);
        // exact mixture: mean 2, variance E[Lambda] + Var[Lambda] = 2 + 1
        CHECK(std::abs(check.mean - 2.0) <= 3.0 * check.se_mean);
        CHECK(std::abs(check.variance - 3.0) <= 3.0 * check.se_variance);
    }

    SUBCASE("empty range is exactly degenerate") {
        IntensityModel model{constant_intensity(0.0), constant_intensity(2.0)};
        const NoiseBatch batch = simulate_batch(model, grid, levy, 100, 41);
        const MomentCheck check = doubly_stochastic_moments(batch, 3, 3, 0);
        CHECK(check.mean == 0.0);
        CHECK(check.variance == 0.0);
    }
}

TEST_CASE("disjoint cells are empirically orthogonal and centered") {
    const int m = 100000;
    const NoiseBatch batch = constant_batch(1.0, 1.0, {{1.0, 1.0}}, m, 10, 43);
    const MeanCheck orth =
        orthogonality_check(batch, NoiseCell{0, 5, -1}, NoiseCell{5, 10, -1});
    CHECK(std::abs(orth.mean) <= 3.0 * orth.se);
    const MeanCheck orth_mixed =
        orthogonality_check(batch, NoiseCell{0, 10, -1}, NoiseCell{0, 10, 0});
    CHECK(std::abs(orth_mixed.mean) <= 3.0 * orth_mixed.se);

    const MeanCheck mart = martingale_check(batch, NoiseCell{5, 10, 0});
    CHECK(std::abs(mart.mean) <= 3.0 * mart.se);
    const MeanCheck mart_cond =
        martingale_check(batch, NoiseCell{5, 10, -1},
                         [](const ScenarioView& v) { return v.brownian_level() > 0.0; });
    CHECK(std::abs(mart_cond.mean) <= 3.0 * mart_cond.se);
}

TEST_CASE("batches are bit-identical across thread counts and runs") {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 12));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure({{1.0, 0.5}}));
    IntensityModel model{TwoStateIntensity{0.5, 1.5, 1.0, 1.0, 0.5}, constant_intensity(2.0)};

    set_worker_threads(1);
    const NoiseBatch a = simulate_batch(model, grid, levy, 4096, 47);
    set_worker_threads(4);
    const NoiseBatch b = simulate_batch(model, grid, levy, 4096, 47);
    set_worker_threads(1);

    REQUIRE(a.size() == b.size());
    for (int s = 0; s < a.size(); ++s) {
        const auto& sa = a.scenarios[static_cast<std::size_t>(s)];
        const auto& sb = b.scenarios[static_cast<std::size_t>(s)];
        CHECK((sa.d_brownian.array() == sb.d_brownian.array()).all());
        CHECK((sa.counts.array() == sb.counts.array()).all());
        CHECK(sa.intensity->lam_b == sb.intensity->lam_b);
        CHECK(sa.seed == sb.seed);
    }
    // distinct seed tokens per scenario
    for (int s = 1; s < a.size(); ++s)
        CHECK(a.scenarios[static_cast<std::size_t>(s)].seed !=
              a.scenarios[static_cast<std::size_t>(s - 1)].seed);
}
