#include <doctest.h>

#include <cmath>
#include <random>

#include "tcbsde/intensity.hpp"
#include "tcbsde/levy_measure.hpp"
#include "tcbsde/parallel.hpp"
#include "tcbsde/time_grid.hpp"

using namespace tcbsde;

TEST_CASE("make_grid produces the uniform partition") {
    const TimeGrid grid = make_grid(1.0, 4);
    REQUIRE(grid.steps() == 4);
    CHECK(grid.points == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

    const TimeGrid single = make_grid(2.0, 1);
    CHECK(single.points == std::vector<double>{0.0, 2.0});

    CHECK_THROWS_AS(make_grid(0.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(-1.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 0), std::invalid_argument);
}

TEST_CASE("levy second moment is the exact finite sum") {
    CHECK(levy_second_moment(make_levy_measure({{1.0, 1.0}})) == 1.0);
    CHECK(levy_second_moment(make_levy_measure({{1.0, 2.0}, {-0.5, 4.0}})) == 3.0);
    CHECK(levy_second_moment(make_levy_measure({})) == 0.0);

    CHECK_THROWS_AS(make_levy_measure({{0.0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_levy_measure({{1.0, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(make_levy_measure({{1.0, 1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("deterministic intensity integrates exactly under the left rule") {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 4));
    RngStream stream(1, 0, StreamPurpose::intensity);

    IntensityModel model{constant_intensity(1.0), constant_intensity(2.0)};
    const IntensityPath path = simulate_intensity(model, grid, stream);
    CHECK(path.cum_b == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(path.cum_h == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});

    // two-state chain with zero switch rates is stuck at its initial level
    IntensityModel stuck{TwoStateIntensity{3.0, 7.0, 0.0, 0.0, 0.0}, constant_intensity(0.0)};
    const IntensityPath frozen = simulate_intensity(stuck, grid, stream);
    for (double v : frozen.lam_b) CHECK(v == 3.0);
    CHECK(frozen.cum_b.back() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("piecewise-constant knots on the grid integrate exactly") {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 4));
    RngStream stream(1, 0, StreamPurpose::intensity);
    IntensityModel model{PiecewiseConstantIntensity{{0.0, 0.5}, {1.0, 3.0}},
                         constant_intensity(0.0)};
    const IntensityPath path = simulate_intensity(model, grid, stream);
    CHECK(path.lam_b == std::vector<double>{1.0, 1.0, 3.0, 3.0, 3.0});
    CHECK(path.cum_b.back() == doctest::Approx(0.5 * 1.0 + 0.5 * 3.0));
}

TEST_CASE("grid and clock monotonicity hold for random models") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.1, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 40);
        auto grid = std::make_shared<TimeGrid>(make_grid(unif(gen), n));
        for (int i = 0; i < grid->steps(); ++i) CHECK(grid->dt(i) > 0.0);

        IntensityModel model{CirIntensity{unif(gen), unif(gen), unif(gen), unif(gen)},
                             TwoStateIntensity{unif(gen), unif(gen), unif(gen), unif(gen), 0.5}};
        RngStream stream(trial, 0, StreamPurpose::intensity);
        const IntensityPath path = simulate_intensity(model, grid, stream);
        for (int i = 0; i < grid->steps(); ++i) {
            CHECK(path.lam_b[static_cast<std::size_t>(i)] >= 0.0);
            CHECK(path.cum_b[static_cast<std::size_t>(i) + 1] >=
                  path.cum_b[static_cast<std::size_t>(i)]);
            CHECK(path.cum_h[static_cast<std::size_t>(i) + 1] >=
                  path.cum_h[static_cast<std::size_t>(i)]);
        }
        CHECK(path.cum_b.front() == 0.0);
        CHECK(path.cum_h.front() == 0.0);
    }
}

TEST_CASE("intensity simulation is bit-identical across runs") {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, 16));
    IntensityModel model{CirIntensity{1.0, 2.0, 0.5, 2.0},
                         TwoStateIntensity{1.0, 3.0, 0.7, 0.7, 0.5}};
    RngStream s1(42, 3, StreamPurpose::intensity);
    RngStream s2(42, 3, StreamPurpose::intensity);
    const IntensityPath a = simulate_intensity(model, grid, s1);
    const IntensityPath b = simulate_intensity(model, grid, s2);
    CHECK(a.lam_b == b.lam_b);
    CHECK(a.lam_h == b.lam_h);
    CHECK(a.cum_b == b.cum_b);
}

// stationary mean of the square-root diffusion started at its level, checked
// against an independent Euler simulation written from scratch here
TEST_CASE("CIR sample mean matches the independent oracle") {
    const double kappa = 2.0, theta = 1.5, vol = 0.6;
    const int paths = 100000;
    const int n = 32;
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, n));
    IntensityModel model{CirIntensity{kappa, theta, vol, theta}, constant_intensity(0.0)};

    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < paths; ++p) {
        RngStream stream(99, static_cast<std::uint64_t>(p), StreamPurpose::intensity);
        const IntensityPath path = simulate_intensity(model, grid, stream);
        const double v = path.lam_b.back();
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / paths;
    const double se = std::sqrt((sum_sq / paths - mean * mean) / paths);

    std::mt19937_64 gen(2024);
    std::normal_distribution<double> normal(0.0, 1.0);
    double oracle_sum = 0.0, oracle_sq = 0.0;
    const double dt = 1.0 / n;
    for (int p = 0; p < paths; ++p) {
        double x = theta;
        for (int i = 0; i < n; ++i) {
            x += kappa * (theta - x) * dt + vol * std::sqrt(std::max(x, 0.0) * dt) * normal(gen);
            x = std::max(x, 0.0);
        }
        oracle_sum += x;
        oracle_sq += x * x;
    }
    const double oracle_mean = oracle_sum / paths;
    const double oracle_se = std::sqrt((oracle_sq / paths - oracle_mean * oracle_mean) / paths);

    CHECK(std::abs(mean - theta) <= 3.0 * se);
    CHECK(std::abs(mean - oracle_mean) <= 3.0 * std::sqrt(se * se + oracle_se * oracle_se));
}
