#include "tcbsde/driver.hpp"

#include <cmath>
#include <sstream>

#include "tcbsde/errors.hpp"

namespace tcbsde {

ParameterReport validate_standard_parameters(const Driver& g, const TerminalCondition& xi,
                                             const NoiseBatch& batch, std::uint64_t probe_seed,
                                             int probe_count, double ratio_tolerance) {
    ParameterReport report;
    report.declared_bound = g.lipschitz_bound;
    report.terminal_budget = xi.square_budget;

    const int m = batch.size();
    const int n = batch.steps();
    const int atoms = batch.atom_count();

    // Lipschitz ratio in the clock-weighted metric, sampled at random states.
    RngStream probe(probe_seed, 0, StreamPurpose::validation);
    std::vector<double> base(static_cast<std::size_t>(1 + atoms));
    std::vector<double> bumped(static_cast<std::size_t>(1 + atoms));
    for (int trial = 0; trial < probe_count; ++trial) {
        const int s = static_cast<int>(probe.bits64() % static_cast<std::uint64_t>(m));
        const int i = static_cast<int>(probe.bits64() % static_cast<std::uint64_t>(n));
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
        const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
        const double y1 = 2.0 * probe.gaussian();
        const double dy = probe.gaussian();
        for (auto& v : base) v = probe.gaussian();
        double jump_metric_sq = 0.0;
        for (int j = 0; j < atoms; ++j) {
            const double bump = probe.gaussian();
            bumped[static_cast<std::size_t>(1 + j)] = base[static_cast<std::size_t>(1 + j)] + bump;
            jump_metric_sq += bump * bump * batch.levy->atoms[static_cast<std::size_t>(j)].w;
        }
        const double dphi0 = probe.gaussian();
        bumped[0] = base[0] + dphi0;
        const double metric = std::abs(dy) + std::abs(dphi0) * std::sqrt(lam_b) +
                              std::sqrt(jump_metric_sq) * std::sqrt(lam_h);
        const double t = batch.grid->time(i);
        const PhiSlice phi1{base[0], std::span<const double>(base.data() + 1,
                                                             static_cast<std::size_t>(atoms))};
        const PhiSlice phi2{bumped[0], std::span<const double>(bumped.data() + 1,
                                                               static_cast<std::size_t>(atoms))};
        const double g1 = g.evaluate(s, i, t, lam_b, lam_h, y1, phi1);
        const double g2 = g.evaluate(s, i, t, lam_b, lam_h, y1 + dy, phi2);
        if (!std::isfinite(g1) || !std::isfinite(g2)) {
            report.violations.push_back("generator returned a non-finite value on finite inputs");
            break;
        }
        const double gap = std::abs(g2 - g1);
        if (metric > 0.0) {
            report.max_lipschitz_ratio = std::max(report.max_lipschitz_ratio, gap / metric);
        } else if (gap > 1e-14) {
            report.max_lipschitz_ratio = std::numeric_limits<double>::infinity();
        }
    }
    if (report.max_lipschitz_ratio > g.lipschitz_bound * (1.0 + ratio_tolerance)) {
        std::ostringstream msg;
        msg << "lipschitz: sampled ratio " << report.max_lipschitz_ratio
            << " exceeds the declared bound " << g.lipschitz_bound;
        report.violations.push_back(msg.str());
    }

    // E[ integral of g(lambda,0,0)^2 dt ] over the batch
    std::vector<double> zero_jumps(static_cast<std::size_t>(atoms), 0.0);
    const PhiSlice zero_phi{0.0, zero_jumps};
    double g00 = 0.0;
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        for (int i = 0; i < n; ++i) {
            const double v = g.evaluate(s, i, batch.grid->time(i),
                                        sc.intensity->lam_b[static_cast<std::size_t>(i)],
                                        sc.intensity->lam_h[static_cast<std::size_t>(i)], 0.0,
                                        zero_phi);
            g00 += v * v * batch.grid->dt(i);
        }
    }
    report.generator_at_zero_l2 = g00 / m;
    if (!std::isfinite(report.generator_at_zero_l2))
        report.violations.push_back("generator at (y,phi)=(0,0) is not square integrable");

    double xi2 = 0.0;
    for (const auto& sc : batch.scenarios) {
        const double v = xi.evaluate(sc);
        xi2 += v * v;
    }
    report.terminal_second_moment = xi2 / m;
    if (!std::isfinite(report.terminal_second_moment))
        report.violations.push_back("terminal condition is not square integrable");
    else if (report.terminal_second_moment > xi.square_budget) {
        std::ostringstream msg;
        msg << "terminal second moment " << report.terminal_second_moment << " exceeds the budget "
            << xi.square_budget;
        report.violations.push_back(msg.str());
    }

    if (!report.ok()) {
        std::string joined = "standard-parameter validation failed:";
        for (const auto& v : report.violations) joined += "\n  - " + v;
        throw ValidationFailure(joined);
    }
    return report;
}

}  // namespace tcbsde
