#include "tcbsde/regression.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "tcbsde/errors.hpp"

namespace tcbsde {

NoiseStateFeatures::NoiseStateFeatures(const NoiseBatch& batch, Filtration filtration)
    : batch_(&batch), filtration_(filtration) {}

int NoiseStateFeatures::count() const { return filtration_ == Filtration::G ? 6 : 4; }

std::string NoiseStateFeatures::name(int k) const {
    static const char* names[] = {"B_t", "eta_t", "lamB_t", "lamH_t", "tailB_t", "tailH_t"};
    return names[k];
}

double NoiseStateFeatures::value(int scenario, int step, int k) const {
    const NoiseScenario& sc = batch_->scenarios[static_cast<std::size_t>(scenario)];
    switch (k) {
        case 0: return batch_->brownian_levels(scenario, step);
        case 1: return batch_->eta_levels(scenario, step);
        case 2: return sc.intensity->lam_b[static_cast<std::size_t>(step)];
        case 3: return sc.intensity->lam_h[static_cast<std::size_t>(step)];
        case 4: return sc.intensity->tail_b(step);
        default: return sc.intensity->tail_h(step);
    }
}

StateColumnFeatures::StateColumnFeatures(const Eigen::MatrixXd& state, const NoiseBatch& batch,
                                         Filtration filtration)
    : state_(&state), batch_(&batch), filtration_(filtration) {}

int StateColumnFeatures::count() const { return filtration_ == Filtration::G ? 5 : 3; }

std::string StateColumnFeatures::name(int k) const {
    static const char* names[] = {"X_t", "lamB_t", "lamH_t", "tailB_t", "tailH_t"};
    return names[k];
}

double StateColumnFeatures::value(int scenario, int step, int k) const {
    const NoiseScenario& sc = batch_->scenarios[static_cast<std::size_t>(scenario)];
    switch (k) {
        case 0: return (*state_)(scenario, step);
        case 1: return sc.intensity->lam_b[static_cast<std::size_t>(step)];
        case 2: return sc.intensity->lam_h[static_cast<std::size_t>(step)];
        case 3: return sc.intensity->tail_b(step);
        default: return sc.intensity->tail_h(step);
    }
}

namespace {

// Exponent vectors of all monomials in `vars` variables with total degree <= degree.
std::vector<std::vector<int>> monomial_exponents(int vars, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> current(static_cast<std::size_t>(vars), 0);
    std::function<void(int, int)> rec = [&](int var, int remaining) {
        if (var == vars) {
            out.push_back(current);
            return;
        }
        for (int d = 0; d <= remaining; ++d) {
            current[static_cast<std::size_t>(var)] = d;
            rec(var + 1, remaining - d);
        }
        current[static_cast<std::size_t>(var)] = 0;
    };
    rec(0, degree);
    return out;
}

}  // namespace

StepRegression::StepRegression(const FeatureSet& features, int step, const RegressionSpec& spec,
                               int scenario_count) {
    const int m = scenario_count;
    const int k = features.count();
    Eigen::MatrixXd raw(m, k);
    for (int s = 0; s < m; ++s)
        for (int f = 0; f < k; ++f) raw(s, f) = features.value(s, step, f);

    // keep non-degenerate columns, standardized
    std::vector<int> kept;
    Eigen::MatrixXd cols(m, k);
    for (int f = 0; f < k; ++f) {
        const double lo = raw.col(f).minCoeff();
        const double hi = raw.col(f).maxCoeff();
        const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
        if (hi - lo <= 1e-12 * scale) continue;
        const double mean = raw.col(f).mean();
        const double sd = std::sqrt((raw.col(f).array() - mean).matrix().squaredNorm() / (m - 1.0));
        cols.col(static_cast<int>(kept.size())) = (raw.col(f).array() - mean) / sd;
        kept.push_back(f);
    }

    const auto exponents = monomial_exponents(static_cast<int>(kept.size()), spec.degree);
    const int p = static_cast<int>(exponents.size());
    design_.resize(m, p);
    for (int c = 0; c < p; ++c) {
        Eigen::VectorXd col = Eigen::VectorXd::Ones(m);
        for (std::size_t v = 0; v < kept.size(); ++v)
            for (int d = 0; d < exponents[static_cast<std::size_t>(c)][v]; ++d)
                col = col.cwiseProduct(cols.col(static_cast<int>(v)));
        design_.col(c) = col;
    }

    // the intercept (exponent vector zero, always column 0) stays unpenalized
    penalty_rows_ = spec.ridge > 0.0 ? p - 1 : 0;
    Eigen::MatrixXd augmented(m + penalty_rows_, p);
    augmented.topRows(m) = design_;
    if (penalty_rows_ > 0) {
        augmented.bottomRows(penalty_rows_).setZero();
        const double scale = std::sqrt(spec.ridge);
        for (int c = 1; c < p; ++c) augmented(m + c - 1, c) = scale;
    }
    qr_.compute(augmented);
    const Eigen::VectorXd r_diag = qr_.matrixR().diagonal().head(p).cwiseAbs();
    condition_ = r_diag.minCoeff() > 0.0
                     ? r_diag.maxCoeff() / r_diag.minCoeff()
                     : std::numeric_limits<double>::infinity();
    if (qr_.rank() < p) {
        if (spec.ridge <= 0.0)
            throw NumericalFailure("regression basis is rank deficient at step " +
                                       std::to_string(step) + " (add ridge or drop features)",
                                   step);
        throw NumericalFailure("regularized design is singular at step " + std::to_string(step),
                               step);
    }
}

Eigen::VectorXd StepRegression::fit(const Eigen::VectorXd& target) const {
    Eigen::VectorXd rhs(target.size() + penalty_rows_);
    rhs.head(target.size()) = target;
    rhs.tail(penalty_rows_).setZero();
    const Eigen::VectorXd beta = qr_.solve(rhs);
    return design_ * beta;
}

Eigen::VectorXd conditional_expectation(const Eigen::VectorXd& values, const FeatureSet& features,
                                        int step, const RegressionSpec& spec) {
    StepRegression reg(features, step, spec, static_cast<int>(values.size()));
    return reg.fit(values);
}

}  // namespace tcbsde
