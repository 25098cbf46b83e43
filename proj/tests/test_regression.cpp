#include <doctest.h>

#include <cmath>

#include "tcbsde/errors.hpp"
#include "tcbsde/regression.hpp"

using namespace tcbsde;

namespace {

NoiseBatch constant_batch(double lam_b, double lam_h, int m, int n, std::uint64_t seed) {
    auto grid = std::make_shared<TimeGrid>(make_grid(1.0, n));
    auto levy = std::make_shared<LevyMeasure>(make_levy_measure({{1.0, 1.0}}));
    IntensityModel model{constant_intensity(lam_b), constant_intensity(lam_h)};
    return simulate_batch(model, grid, levy, m, seed);
}

}  // namespace

TEST_CASE("projection of a constant is exact for any basis with an intercept") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, 500, 10, 3);
    NoiseStateFeatures features(batch, Filtration::G);
    RegressionSpec spec;  // default degree 2, ridge 1e-8
    const Eigen::VectorXd values = Eigen::VectorXd::Constant(batch.size(), 7.0);
    const Eigen::VectorXd fitted = conditional_expectation(values, features, 5, spec);
    CHECK((fitted.array() - 7.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("in-span targets are reproduced exactly without ridge") {
    const NoiseBatch batch = constant_batch(1.0, 1.0, 500, 10, 5);
    NoiseStateFeatures features(batch, Filtration::G);
    RegressionSpec spec;
    spec.ridge = 0.0;
    Eigen::VectorXd values(batch.size());
    for (int s = 0; s < batch.size(); ++s) values(s) = batch.brownian_levels(s, 5);
    const Eigen::VectorXd fitted = conditional_expectation(values, features, 5, spec);
    CHECK((fitted - values).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("conditional expectation of the terminal Brownian level is the current level") {
    RegressionSpec spec;
    double previous_mse = 0.0;
    int trial = 0;
    for (int m : {2000, 32000}) {
        const NoiseBatch batch = constant_batch(1.0, 0.0, m, 10, 7);
        NoiseStateFeatures features(batch, Filtration::G);
        Eigen::VectorXd terminal(batch.size());
        for (int s = 0; s < batch.size(); ++s) terminal(s) = batch.brownian_levels(s, 10);
        const Eigen::VectorXd fitted = conditional_expectation(terminal, features, 5, spec);
        double mse = 0.0;
        for (int s = 0; s < batch.size(); ++s) {
            const double gap = fitted(s) - batch.brownian_levels(s, 5);
            mse += gap * gap;
        }
        mse /= batch.size();
        CHECK(mse <= 0.05);
        if (trial > 0) CHECK(mse < previous_mse);
        previous_mse = mse;
        ++trial;
    }
}

TEST_CASE("constant features are dropped and the intercept survives") {
    // deterministic clock: lamB, lamH and both remaining-clock features are
    // constant at every step, so the basis collapses without becoming singular
    const NoiseBatch batch = constant_batch(1.0, 1.0, 200, 10, 9);
    NoiseStateFeatures features(batch, Filtration::G);
    RegressionSpec spec;
    spec.ridge = 0.0;
    StepRegression reg(features, 0, spec, batch.size());
    CHECK(reg.basis_size() == 1);  // at step 0 every feature is constant
    const Eigen::VectorXd fitted =
        reg.fit(Eigen::VectorXd::LinSpaced(batch.size(), 0.0, 1.0));
    CHECK(fitted(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("rank deficiency without ridge raises a numerical failure naming the step") {
    // duplicated state column makes the expanded basis collinear
    const NoiseBatch batch = constant_batch(1.0, 0.0, 100, 6, 11);
    struct Duplicated : FeatureSet {
        const NoiseBatch* batch;
        int count() const override { return 2; }
        std::string name(int k) const override { return k == 0 ? "B" : "B_again"; }
        double value(int s, int i, int) const override { return batch->brownian_levels(s, i); }
    } features;
    features.batch = &batch;
    RegressionSpec spec;
    spec.ridge = 0.0;
    try {
        StepRegression reg(features, 3, spec, batch.size());
        FAIL("expected NumericalFailure");
    } catch (const NumericalFailure& e) {
        CHECK(e.step == 3);
        CHECK(std::string(e.what()).find("step 3") != std::string::npos);
    }
    // ridge regularization rescues the same basis
    spec.ridge = 1e-8;
    CHECK_NOTHROW(StepRegression(features, 3, spec, batch.size()));
}
