#include "tcbsde/integrand.hpp"

#include <cmath>
#include <stdexcept>

namespace tcbsde {

namespace {
void require_same_frame(const Integrand& phi, const NoiseScenario& s) {
    if (phi.steps() != s.steps() || phi.slots() != 1 + s.atom_count())
        throw std::invalid_argument("integrand and scenario disagree on grid or jump measure");
}
}  // namespace

Integrand build_integrand(const NoiseScenario& s, const IntegrandRow& row_fn) {
    Integrand phi;
    phi.grid = s.intensity->grid;
    phi.levy = s.levy;
    phi.values.setZero(s.steps(), 1 + s.atom_count());
    std::vector<double> row(static_cast<std::size_t>(1 + s.atom_count()));
    for (int i = 0; i < s.steps(); ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        row_fn(ScenarioView(s, i), row);
        for (int k = 0; k < phi.slots(); ++k) phi.values(i, k) = row[static_cast<std::size_t>(k)];
    }
    return phi;
}

Integrand constant_integrand(std::shared_ptr<const TimeGrid> grid,
                             std::shared_ptr<const LevyMeasure> levy, double diffusion,
                             double jump_value) {
    Integrand phi;
    phi.values.resize(grid->steps(), 1 + levy->atom_count());
    phi.values.col(0).setConstant(diffusion);
    for (int j = 0; j < levy->atom_count(); ++j) phi.values.col(1 + j).setConstant(jump_value);
    phi.grid = std::move(grid);
    phi.levy = std::move(levy);
    return phi;
}

double integrate(const Integrand& phi, const NoiseScenario& s) {
    require_same_frame(phi, s);
    double sum = 0.0;
    for (int i = 0; i < s.steps(); ++i) {
        sum += phi.values(i, 0) * s.d_brownian(i);
        for (int j = 0; j < s.atom_count(); ++j) sum += phi.values(i, 1 + j) * s.d_compensated(i, j);
    }
    return sum;
}

double i_norm_squared(const Integrand& phi, const IntensityPath& path) {
    double sum = 0.0;
    for (int i = 0; i < phi.steps(); ++i) {
        sum += phi.values(i, 0) * phi.values(i, 0) * path.d_cum_b(i);
        const double dch = path.d_cum_h(i);
        for (int j = 0; j + 1 < phi.slots(); ++j) {
            const double w = phi.levy->atoms[static_cast<std::size_t>(j)].w;
            sum += phi.values(i, 1 + j) * phi.values(i, 1 + j) * w * dch;
        }
    }
    return sum;
}

IsometryCheck isometry_check(const IntegrandBuilder& builder, const NoiseBatch& batch) {
    const int m = batch.size();
    Eigen::VectorXd diff(m);
    double sum_lhs = 0, sum_rhs = 0;
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        const Integrand phi = builder(sc);
        const double integral = integrate(phi, sc);
        const double lhs = integral * integral;
        const double rhs = i_norm_squared(phi, *sc.intensity);
        sum_lhs += lhs;
        sum_rhs += rhs;
        diff(s) = lhs - rhs;
    }
    IsometryCheck out;
    out.lhs = sum_lhs / m;
    out.rhs = sum_rhs / m;
    const double mean_diff = diff.mean();
    out.se = std::sqrt((diff.array() - mean_diff).matrix().squaredNorm() / (m - 1.0) / m);
    return out;
}

double factor_check(const std::function<double(const IntensityPath&)>& xi,
                    const IntegrandBuilder& builder, const NoiseBatch& batch) {
    double worst = 0.0;
    for (const auto& sc : batch.scenarios) {
        const Integrand phi = builder(sc);
        const double factor = xi(*sc.intensity);
        Integrand scaled = phi;
        scaled.values *= factor;
        const double lhs = factor * integrate(phi, sc);
        const double rhs = integrate(scaled, sc);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

}  // namespace tcbsde
