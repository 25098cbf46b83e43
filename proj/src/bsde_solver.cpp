#include "tcbsde/bsde_solver.hpp"

#include <cmath>
#include <ostream>

#include "tcbsde/csv.hpp"
#include "tcbsde/errors.hpp"
#include "tcbsde/parallel.hpp"

namespace tcbsde {

namespace {

struct SweepWorkspace {
    std::vector<StepRegression> regressions;  // one per step, reused across sweeps
    double max_condition = 0.0;
};

void run_sweep(const Driver& g, const NoiseBatch& batch, const FeatureSet& features,
               const RegressionSpec& spec, const SolverOptions& options,
               const BsdeIterate& previous, BsdeIterate& next, SweepWorkspace& ws) {
    const int m = batch.size();
    const int n = batch.steps();
    const int atoms = batch.atom_count();

    if (ws.regressions.empty()) {
        ws.regressions.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) ws.regressions.emplace_back(features, i, spec, m);
        for (const auto& r : ws.regressions)
            ws.max_condition = std::max(ws.max_condition, r.condition_number());
    }

    Eigen::VectorXd d_brownian(m), target(m);
    for (int i = n - 1; i >= 0; --i) {
        const StepRegression& reg = ws.regressions[static_cast<std::size_t>(i)];
        const Eigen::VectorXd y_next = next.y.col(i + 1);
        const Eigen::VectorXd mean_next = reg.fit(y_next);

        // covariation regressions use the martingale increment of Y as the
        // regressand; the centering term is measurable at the step, so the
        // estimand is unchanged while the regression variance stays bounded
        // as the grid refines
        const Eigen::VectorXd increment = y_next - mean_next;
        for (int s = 0; s < m; ++s)
            d_brownian(s) = batch.scenarios[static_cast<std::size_t>(s)].d_brownian(i);
        target = increment.cwiseProduct(d_brownian);
        const Eigen::VectorXd cov_b = reg.fit(target);
        for (int s = 0; s < m; ++s) {
            const double dcb = batch.scenarios[static_cast<std::size_t>(s)].intensity->d_cum_b(i);
            next.phi[0](s, i) = dcb > 0.0 ? cov_b(s) / dcb : 0.0;
        }
        for (int j = 0; j < atoms; ++j) {
            const double w = batch.levy->atoms[static_cast<std::size_t>(j)].w;
            for (int s = 0; s < m; ++s)
                target(s) =
                    increment(s) * batch.scenarios[static_cast<std::size_t>(s)].d_compensated(i, j);
            const Eigen::VectorXd cov_j = reg.fit(target);
            for (int s = 0; s < m; ++s) {
                const double dch =
                    batch.scenarios[static_cast<std::size_t>(s)].intensity->d_cum_h(i);
                next.phi[1 + j](s, i) = dch > 0.0 ? cov_j(s) / (w * dch) : 0.0;
            }
        }

        const double t = batch.grid->time(i);
        const double dt = batch.grid->dt(i);
        const double inner_tol = options.tolerance / 10.0;
        parallel_blocks(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
            std::vector<double> jump_slice(static_cast<std::size_t>(atoms));
            for (std::size_t s = lo; s < hi; ++s) {
                const NoiseScenario& sc = batch.scenarios[s];
                const double lam_b = sc.intensity->lam_b[static_cast<std::size_t>(i)];
                const double lam_h = sc.intensity->lam_h[static_cast<std::size_t>(i)];
                for (int j = 0; j < atoms; ++j)
                    jump_slice[static_cast<std::size_t>(j)] =
                        previous.phi[static_cast<std::size_t>(1 + j)](static_cast<int>(s), i);
                const PhiSlice slice{previous.phi[0](static_cast<int>(s), i), jump_slice};
                double y = mean_next(static_cast<int>(s));
                for (int it = 0; it < options.inner_iterations; ++it) {
                    const double y_new =
                        mean_next(static_cast<int>(s)) +
                        g.evaluate(static_cast<int>(s), i, t, lam_b, lam_h, y, slice) * dt;
                    const bool done = std::abs(y_new - y) <= inner_tol;
                    y = y_new;
                    if (done) break;
                }
                if (!std::isfinite(y))
                    throw NumericalFailure("implicit step produced a non-finite value at step " +
                                               std::to_string(i),
                                           i);
                next.y(static_cast<int>(s), i) = y;
            }
        });
    }
}

}  // namespace

double iterate_distance(const BsdeIterate& a, const BsdeIterate& b, const NoiseBatch& batch) {
    const int m = batch.size();
    const int n = batch.steps();
    double worst_y = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double msq = (a.y.col(i) - b.y.col(i)).squaredNorm() / m;
        worst_y = std::max(worst_y, msq);
    }
    double phi_gap = 0.0;
    for (int s = 0; s < m; ++s) {
        const IntensityPath& path = *batch.scenarios[static_cast<std::size_t>(s)].intensity;
        for (int i = 0; i < n; ++i) {
            const double d0 = a.phi[0](s, i) - b.phi[0](s, i);
            phi_gap += d0 * d0 * path.d_cum_b(i);
            const double dch = path.d_cum_h(i);
            for (int j = 0; j + 1 < static_cast<int>(a.phi.size()); ++j) {
                const double dj = a.phi[static_cast<std::size_t>(1 + j)](s, i) -
                                  b.phi[static_cast<std::size_t>(1 + j)](s, i);
                phi_gap += dj * dj * batch.levy->atoms[static_cast<std::size_t>(j)].w * dch;
            }
        }
    }
    return worst_y + phi_gap / m;
}

BsdeIterate make_initial_iterate(const TerminalCondition& xi, const NoiseBatch& batch,
                                 double y_fill, double phi_fill) {
    const int m = batch.size();
    const int n = batch.steps();
    BsdeIterate it;
    it.y.resize(m, n + 1);
    for (int s = 0; s < m; ++s) {
        const double terminal = xi.evaluate(batch.scenarios[static_cast<std::size_t>(s)]);
        it.y(s, n) = terminal;
        const double fill = std::isnan(y_fill) ? terminal : y_fill;
        for (int i = 0; i < n; ++i) it.y(s, i) = fill;
    }
    it.phi.assign(static_cast<std::size_t>(1 + batch.atom_count()),
                  Eigen::MatrixXd::Constant(m, n, phi_fill));
    return it;
}

BsdeSolution solve_backward(const Driver& g, const TerminalCondition& xi, const NoiseBatch& batch,
                            const FeatureSet& features, const RegressionSpec& spec,
                            const SolverOptions& options, const BsdeIterate* initial) {
    const int n = batch.steps();
    for (int i = 0; i < n; ++i)
        if (g.lipschitz_bound * batch.grid->dt(i) >= 1.0)
            throw std::invalid_argument(
                "solve_backward: K_g * dt >= 1, refine the grid for the implicit step");
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("solve_backward: tolerance must be positive");

    BsdeIterate current = initial ? *initial : make_initial_iterate(xi, batch);
    BsdeIterate next = current;
    // terminal values are pinned once; every sweep keeps column N untouched
    for (int s = 0; s < batch.size(); ++s)
        next.y(s, n) = xi.evaluate(batch.scenarios[static_cast<std::size_t>(s)]);
    current.y.col(n) = next.y.col(n);

    SweepWorkspace ws;
    BsdeSolution out;
    bool converged = false;
    for (int k = 0; k < options.max_iterations; ++k) {
        run_sweep(g, batch, features, spec, options, current, next, ws);
        const double dist = iterate_distance(next, current, batch);
        out.distance_trace.push_back(dist);
        out.condition_numbers.push_back(ws.max_condition);
        current = next;
        ++out.iterations;
        if (dist <= options.tolerance) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceFailure("solve_backward: Picard loop did not reach tolerance " +
                                     std::to_string(options.tolerance) + " in " +
                                     std::to_string(options.max_iterations) + " iterations",
                                 out.distance_trace);
    out.y = std::move(current.y);
    out.phi = std::move(current.phi);
    out.y0 = out.y.col(0);
    return out;
}

ContractionProbe picard_contraction_probe(const Driver& g, const TerminalCondition& xi,
                                          const NoiseBatch& batch, const FeatureSet& features,
                                          const RegressionSpec& spec, const BsdeIterate& start_a,
                                          const BsdeIterate& start_b, int sweeps,
                                          const SolverOptions& options, double stop_tolerance) {
    const int n = batch.steps();
    auto run_chain = [&](const BsdeIterate& start, std::vector<double>& distances,
                         std::vector<BsdeIterate>& images) {
        BsdeIterate current = start;
        for (int s = 0; s < batch.size(); ++s)
            current.y(s, n) = xi.evaluate(batch.scenarios[static_cast<std::size_t>(s)]);
        BsdeIterate next = current;
        SweepWorkspace ws;
        for (int k = 0; k < sweeps; ++k) {
            run_sweep(g, batch, features, spec, options, current, next, ws);
            distances.push_back(iterate_distance(next, current, batch));
            current = next;
            if (static_cast<int>(images.size()) < 1) images.push_back(current);
            if (distances.back() <= stop_tolerance) break;
        }
        images.push_back(current);
    };

    ContractionProbe probe;
    std::vector<BsdeIterate> images_a, images_b;
    run_chain(start_a, probe.distances_a, images_a);
    run_chain(start_b, probe.distances_b, images_b);
    auto ratios = [](const std::vector<double>& d) {
        std::vector<double> r;
        for (std::size_t k = 1; k < d.size(); ++k)
            r.push_back(d[k - 1] > 0.0 ? d[k] / d[k - 1] : 0.0);
        return r;
    };
    probe.ratios_a = ratios(probe.distances_a);
    probe.ratios_b = ratios(probe.distances_b);
    probe.cross_distance_first = iterate_distance(images_a.front(), images_b.front(), batch);
    const Eigen::MatrixXd gap = images_a.back().y - images_b.back().y;
    probe.final_y_rms_gap = std::sqrt(gap.squaredNorm() / static_cast<double>(gap.size()));
    return probe;
}

void export_solution_csv(const BsdeSolution& solution, const NoiseBatch& batch,
                         std::ostream& out) {
    CsvWriter csv(out);
    csv.raw("scenario_id,t,Y,phi_0");
    for (const auto& a : batch.levy->atoms) csv.raw_field("phi_" + format_double(a.z));
    csv.end_row();
    const int n = batch.steps();
    for (int s = 0; s < batch.size(); ++s) {
        for (int i = 0; i <= n; ++i) {
            csv.field(static_cast<long long>(s));
            csv.field(batch.grid->time(i));
            csv.field(solution.y(s, i));
            for (std::size_t slot = 0; slot < solution.phi.size(); ++slot)
                csv.field(i < n ? solution.phi[slot](s, i) : 0.0);
            csv.end_row();
        }
    }
}

}  // namespace tcbsde
