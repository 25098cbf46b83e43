#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tcbsde/noise_batch.hpp"

namespace tcbsde {

/// Conditioning information for the estimators. G knows the whole intensity
/// trajectory at time 0 (so remaining-clock features are admissible); F knows
/// only the noise prefix, which includes the intensity prefix.
enum class Filtration { G, F };

struct RegressionSpec {
    Filtration filtration = Filtration::G;
    int degree = 2;        // total polynomial degree of the basis
    double ridge = 1e-8;   // Tikhonov weight on non-intercept coefficients
};

/// Raw state features per (scenario, step); the regression basis is the set of
/// monomials in these up to the spec's degree.
class FeatureSet {
  public:
    virtual ~FeatureSet() = default;
    virtual int count() const = 0;
    virtual std::string name(int k) const = 0;
    virtual double value(int scenario, int step, int k) const = 0;
};

/// B_t, eta_t, lambda^B_t, lambda^H_t, plus remaining-clock integrals under G.
class NoiseStateFeatures : public FeatureSet {
  public:
    NoiseStateFeatures(const NoiseBatch& batch, Filtration filtration);
    int count() const override;
    std::string name(int k) const override;
    double value(int scenario, int step, int k) const override;

  private:
    const NoiseBatch* batch_;
    Filtration filtration_;
};

/// X_t (a caller-supplied state column, e.g. wealth), lambda^B_t, lambda^H_t,
/// plus remaining-clock integrals under G.
class StateColumnFeatures : public FeatureSet {
  public:
    StateColumnFeatures(const Eigen::MatrixXd& state, const NoiseBatch& batch,
                        Filtration filtration);
    int count() const override;
    std::string name(int k) const override;
    double value(int scenario, int step, int k) const override;

  private:
    const Eigen::MatrixXd* state_;  // M x (N+1)
    const NoiseBatch* batch_;
    Filtration filtration_;
};

// Least-squares projection onto the polynomial basis at one step. Features
// that are constant across the batch at that step are dropped (they are
// absorbed by the intercept; remaining-clock features under deterministic
// intensity are the canonical case). The ridge acts on non-intercept
// coefficients through penalty rows appended to the design, and the solve is
// a column-pivoted QR: collinear bases (a near-two-valued count feature and
// its square) stay accurate. The factorization is reused across all targets
// fitted at the step.
class StepRegression {
  public:
    StepRegression(const FeatureSet& features, int step, const RegressionSpec& spec,
                   int scenario_count);

    /// Fitted values of the projection of `target`; throws NumericalFailure on
    /// rank deficiency when ridge is zero.
    Eigen::VectorXd fit(const Eigen::VectorXd& target) const;

    double condition_number() const { return condition_; }
    int basis_size() const { return static_cast<int>(design_.cols()); }

  private:
    Eigen::MatrixXd design_;  // M x p
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;  // of the penalty-augmented design
    int penalty_rows_ = 0;
    double condition_ = 0.0;
};

/// One-off conditional-expectation estimate of per-scenario values given the
/// step's features.
Eigen::VectorXd conditional_expectation(const Eigen::VectorXd& values, const FeatureSet& features,
                                        int step, const RegressionSpec& spec);

}  // namespace tcbsde
