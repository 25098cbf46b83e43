#include "tcbsde/wealth.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "tcbsde/errors.hpp"
#include "tcbsde/parallel.hpp"

namespace tcbsde {

MeanVarianceModel make_constant_mv_model(double rho, double alpha, double psi0,
                                         double psi_jump_slope, const LevyMeasure& levy,
                                         const TimeGrid& grid, double target, double x0) {
    const int n1 = grid.steps() + 1;
    MeanVarianceModel model;
    model.rate_riskless.assign(static_cast<std::size_t>(n1), rho);
    model.rate_risky.assign(static_cast<std::size_t>(n1), alpha);
    model.loading_diffusion.assign(static_cast<std::size_t>(n1), psi0);
    model.loading_jump.resize(n1, levy.atom_count());
    for (int j = 0; j < levy.atom_count(); ++j)
        model.loading_jump.col(j).setConstant(psi_jump_slope * levy.atoms[static_cast<std::size_t>(j)].z);
    model.target = target;
    model.initial_wealth = x0;
    return model;
}

void validate_mv_model(const MeanVarianceModel& model, const TimeGrid& grid) {
    const std::size_t n1 = grid.points.size();
    if (model.rate_riskless.size() != n1 || model.rate_risky.size() != n1 ||
        model.loading_diffusion.size() != n1 ||
        model.loading_jump.rows() != static_cast<Eigen::Index>(n1))
        throw std::invalid_argument("mean-variance model: coefficient arrays must match the grid");
    for (std::size_t i = 0; i + 1 < n1; ++i)
        if (!(model.rate_risky[i] > model.rate_riskless[i]))
            throw std::invalid_argument("mean-variance model: alpha > rho is required");
}

WealthPaths simulate_wealth(const MeanVarianceModel& model, const ControlRule& rule,
                            const NoiseBatch& batch) {
    const int m = batch.size();
    const int n = batch.steps();
    const int atoms = batch.atom_count();
    WealthPaths out;
    out.wealth.resize(m, n + 1);
    out.wealth_ou.resize(m, n + 1);
    out.control.resize(m, n);

    parallel_blocks(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t sz = lo; sz < hi; ++sz) {
            const int s = static_cast<int>(sz);
            const NoiseScenario& sc = batch.scenarios[sz];
            double x = model.initial_wealth;
            double discount_exponent = 0.0;  // int_0^{t_i} rho ds, left rule
            double ou_acc = model.initial_wealth;  // x0 + discounted drift and noise terms
            out.wealth(s, 0) = x;
            out.wealth_ou(s, 0) = model.initial_wealth;
            for (int i = 0; i < n; ++i) {
                const double dt = batch.grid->dt(i);
                const double rho = model.rate_riskless[static_cast<std::size_t>(i)];
                const double alpha = model.rate_risky[static_cast<std::size_t>(i)];
                const double u = rule(i, s, x);
                out.control(s, i) = u;
                double noise = model.loading_diffusion[static_cast<std::size_t>(i)] * sc.d_brownian(i);
                for (int j = 0; j < atoms; ++j)
                    noise += model.loading_jump(i, j) * sc.d_compensated(i, j);
                x += (rho * x + (alpha - rho) * u) * dt + u * noise;
                if (!std::isfinite(x))
                    throw NumericalFailure("wealth became non-finite at step " + std::to_string(i),
                                           i);
                out.wealth(s, i + 1) = x;
                const double df = std::exp(-discount_exponent);
                ou_acc += df * ((alpha - rho) * u * dt + u * noise);
                discount_exponent += rho * dt;
                out.wealth_ou(s, i + 1) = std::exp(discount_exponent) * ou_acc;
            }
        }
    });
    return out;
}

double mv_denominator(const MeanVarianceModel& model, const LevyMeasure& levy,
                      const IntensityPath& path, int step) {
    const double psi0 = model.loading_diffusion[static_cast<std::size_t>(step)];
    double d = psi0 * psi0 * path.lam_b[static_cast<std::size_t>(step)];
    for (int j = 0; j < model.atom_count(); ++j) {
        const double psi = model.loading_jump(step, j);
        d += psi * psi * levy.atoms[static_cast<std::size_t>(j)].w *
             path.lam_h[static_cast<std::size_t>(step)];
    }
    return d;
}

namespace {

// exponent rates of A and C at a step: (alpha-rho)^2 / denominator - 2 rho (A)
// and the same with a single rho (C)
void coefficient_path(const MeanVarianceModel& model, const LevyMeasure& levy,
                      const IntensityPath& path, double* a_out, double* c_out) {
    const int n = path.grid->steps();
    a_out[n] = -1.0;
    c_out[n] = model.target;
    double int_a = 0.0, int_c = 0.0;  // int_t^T accumulated backward
    for (int i = n - 1; i >= 0; --i) {
        const double dt = path.grid->dt(i);
        const double rho = model.rate_riskless[static_cast<std::size_t>(i)];
        const double alpha = model.rate_risky[static_cast<std::size_t>(i)];
        const double denom = mv_denominator(model, levy, path, i);
        if (!(denom > 0.0))
            throw std::domain_error("mv_coefficients: zero risk loading at step " +
                                    std::to_string(i));
        const double ratio = (alpha - rho) * (alpha - rho) / denom;
        int_a += (ratio - 2.0 * rho) * dt;
        int_c += (ratio - rho) * dt;
        a_out[i] = -std::exp(-int_a);
        c_out[i] = model.target * std::exp(-int_c);
    }
}

}  // namespace

MvCoefficients mv_coefficients(const MeanVarianceModel& model, const NoiseBatch& batch) {
    const int m = batch.size();
    const int n = batch.steps();
    MvCoefficients coef;
    coef.a.resize(m, n + 1);
    coef.c.resize(m, n + 1);
    parallel_blocks(static_cast<std::size_t>(m), [&](std::size_t lo, std::size_t hi) {
        std::vector<double> a(static_cast<std::size_t>(n) + 1), c(static_cast<std::size_t>(n) + 1);
        for (std::size_t s = lo; s < hi; ++s) {
            coefficient_path(model, *batch.levy, *batch.scenarios[s].intensity, a.data(), c.data());
            for (int i = 0; i <= n; ++i) {
                coef.a(static_cast<Eigen::Index>(s), i) = a[static_cast<std::size_t>(i)];
                coef.c(static_cast<Eigen::Index>(s), i) = c[static_cast<std::size_t>(i)];
            }
        }
    });
    return coef;
}

double mv_feedback(const MeanVarianceModel& model, const LevyMeasure& levy,
                   const IntensityPath& path, int step, double a, double c, double x) {
    const double denom = mv_denominator(model, levy, path, step);
    if (!(denom > 0.0))
        throw std::domain_error("mv_feedback: zero risk loading at step " + std::to_string(step));
    const double alpha = model.rate_risky[static_cast<std::size_t>(step)];
    const double rho = model.rate_riskless[static_cast<std::size_t>(step)];
    return -(alpha - rho) * (a * x + c) / (a * denom);
}

ControlRule mv_control_G(const MeanVarianceModel& model, const MvCoefficients& coef,
                         const NoiseBatch& batch) {
    return [&model, &coef, &batch](int step, int scenario, double x) {
        const IntensityPath& path = *batch.scenarios[static_cast<std::size_t>(scenario)].intensity;
        return mv_feedback(model, *batch.levy, path, step, coef.a(scenario, step),
                           coef.c(scenario, step), x);
    };
}

namespace {

struct TwoStatePair {
    const TwoStateIntensity* brownian = nullptr;
    const TwoStateIntensity* jump = nullptr;
};

bool both_components_two_state_or_deterministic(const IntensityModel& m, TwoStatePair& out) {
    bool ok = true;
    if (const auto* ts = std::get_if<TwoStateIntensity>(&m.brownian))
        out.brownian = ts;
    else if (!component_is_deterministic(m.brownian))
        ok = false;
    if (const auto* ts = std::get_if<TwoStateIntensity>(&m.jump))
        out.jump = ts;
    else if (!component_is_deterministic(m.jump))
        ok = false;
    return ok;
}

// Continues one component from (step, state) to the end of the grid and
// overwrites the tail of lam/cum in the working path.
void continue_two_state(const TwoStateIntensity& ts, bool state_high, const TimeGrid& grid,
                        int step, RngStream& stream, std::vector<double>& lam) {
    const int n = grid.steps();
    bool high = state_high;
    double t = grid.time(step);
    int i = step;
    for (;;) {
        const double rate = high ? ts.rate_down : ts.rate_up;
        double hold = std::numeric_limits<double>::infinity();
        if (rate > 0.0) hold = -std::log(stream.uniform()) / rate;
        const double t_next = t + hold;
        while (i <= n && grid.time(i) < t_next) {
            lam[static_cast<std::size_t>(i)] = high ? ts.high : ts.low;
            ++i;
        }
        if (i > n) return;
        high = !high;
        t = t_next;
    }
}

}  // namespace

FProjectedCoefficients f_projected_mv_coefficients(const MeanVarianceModel& model,
                                                   const IntensityModel& intensity,
                                                   const NoiseBatch& batch, int inner_paths,
                                                   std::uint64_t seed) {
    const int m = batch.size();
    const int n = batch.steps();
    FProjectedCoefficients out;
    out.a.resize(m, n + 1);
    out.c.resize(m, n + 1);
    out.inner_paths = inner_paths;
    if (inner_paths < 32 && !is_deterministic(intensity))
        out.accuracy_warning = "fewer than 32 inner paths; projected coefficients are noisy";

    if (is_deterministic(intensity)) {
        // conditioning on constants: the projection is the identity
        const MvCoefficients coef = mv_coefficients(model, batch);
        out.a = coef.a;
        out.c = coef.c;
        return out;
    }

    TwoStatePair pair;
    const bool memoizable = both_components_two_state_or_deterministic(intensity, pair);

    // Inner expectation of (A_t, C_t) given the intensity state at t. For
    // two-state chains the state is the pair of current levels, so the answer
    // can be memoized per (step, state); otherwise it is nested Monte Carlo
    // per (scenario, step).
    IntensityPath work;
    work.grid = batch.grid;
    work.lam_b.resize(static_cast<std::size_t>(n) + 1);
    work.lam_h.resize(static_cast<std::size_t>(n) + 1);
    work.cum_b.assign(static_cast<std::size_t>(n) + 1, 0.0);
    work.cum_h.assign(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> a_buf(static_cast<std::size_t>(n) + 1), c_buf(static_cast<std::size_t>(n) + 1);

    auto inner_mean = [&](int step, const IntensityPath& scenario_path,
                          std::uint64_t stream_id) -> std::pair<double, double> {
        double sum_a = 0.0, sum_c = 0.0;
        for (int ip = 0; ip < inner_paths; ++ip) {
            RngStream stream(seed, stream_id * 65536ULL + static_cast<std::uint64_t>(ip),
                             StreamPurpose::inner);
            // prefix is irrelevant to A_t, C_t (they read the future only)
            for (int i = 0; i <= n; ++i) {
                work.lam_b[static_cast<std::size_t>(i)] =
                    scenario_path.lam_b[static_cast<std::size_t>(i)];
                work.lam_h[static_cast<std::size_t>(i)] =
                    scenario_path.lam_h[static_cast<std::size_t>(i)];
            }
            if (pair.brownian) {
                const bool high = scenario_path.lam_b[static_cast<std::size_t>(step)] ==
                                  pair.brownian->high;
                continue_two_state(*pair.brownian, high, *batch.grid, step, stream, work.lam_b);
            }
            if (pair.jump) {
                const bool high =
                    scenario_path.lam_h[static_cast<std::size_t>(step)] == pair.jump->high;
                continue_two_state(*pair.jump, high, *batch.grid, step, stream, work.lam_h);
            }
            coefficient_path(model, *batch.levy, work, a_buf.data(), c_buf.data());
            sum_a += a_buf[static_cast<std::size_t>(step)];
            sum_c += c_buf[static_cast<std::size_t>(step)];
        }
        return {sum_a / inner_paths, sum_c / inner_paths};
    };

    if (memoizable) {
        std::map<std::pair<int, std::pair<int, int>>, std::pair<double, double>> memo;
        for (int s = 0; s < m; ++s) {
            const IntensityPath& path = *batch.scenarios[static_cast<std::size_t>(s)].intensity;
            for (int i = 0; i <= n; ++i) {
                int state_b = 0, state_h = 0;
                if (pair.brownian)
                    state_b = path.lam_b[static_cast<std::size_t>(i)] == pair.brownian->high;
                if (pair.jump)
                    state_h = path.lam_h[static_cast<std::size_t>(i)] == pair.jump->high;
                const auto key = std::make_pair(i, std::make_pair(state_b, state_h));
                auto found = memo.find(key);
                if (found == memo.end()) {
                    const std::uint64_t stream_id =
                        static_cast<std::uint64_t>(i) * 4ULL +
                        static_cast<std::uint64_t>(state_b * 2 + state_h);
                    found = memo.emplace(key, inner_mean(i, path, stream_id)).first;
                }
                out.a(s, i) = found->second.first;
                out.c(s, i) = found->second.second;
            }
        }
    } else {
        for (int s = 0; s < m; ++s) {
            const IntensityPath& path = *batch.scenarios[static_cast<std::size_t>(s)].intensity;
            for (int i = 0; i <= n; ++i) {
                const std::uint64_t stream_id =
                    (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(n + 1) +
                     static_cast<std::uint64_t>(i));
                const auto mean = inner_mean(i, path, stream_id);
                out.a(s, i) = mean.first;
                out.c(s, i) = mean.second;
            }
        }
    }
    return out;
}

ControlRule mv_control_F(const MeanVarianceModel& model, const FProjectedCoefficients& coef,
                         const NoiseBatch& batch) {
    return [&model, &coef, &batch](int step, int scenario, double x) {
        const IntensityPath& path = *batch.scenarios[static_cast<std::size_t>(scenario)].intensity;
        return mv_feedback(model, *batch.levy, path, step, coef.a(scenario, step),
                           coef.c(scenario, step), x);
    };
}

PerformanceEstimate mv_performance(const MeanVarianceModel& model, const Eigen::MatrixXd& wealth) {
    const int m = static_cast<int>(wealth.rows());
    const Eigen::VectorXd terminal = wealth.col(wealth.cols() - 1);
    Eigen::VectorXd reward(m);
    for (int s = 0; s < m; ++s) {
        const double gap = terminal(s) - model.target;
        reward(s) = -0.5 * gap * gap;
    }
    PerformanceEstimate est;
    est.value = reward.mean();
    est.se = std::sqrt((reward.array() - est.value).matrix().squaredNorm() / (m - 1.0) / m);
    return est;
}

PerformanceEstimate mv_performance_gap(const MeanVarianceModel& model,
                                       const Eigen::MatrixXd& wealth_candidate,
                                       const Eigen::MatrixXd& wealth_challenger) {
    const int m = static_cast<int>(wealth_candidate.rows());
    Eigen::VectorXd gap(m);
    for (int s = 0; s < m; ++s) {
        const double a = wealth_candidate(s, wealth_candidate.cols() - 1) - model.target;
        const double b = wealth_challenger(s, wealth_challenger.cols() - 1) - model.target;
        gap(s) = -0.5 * a * a + 0.5 * b * b;
    }
    PerformanceEstimate est;
    est.value = gap.mean();
    est.se = std::sqrt((gap.array() - est.value).matrix().squaredNorm() / (m - 1.0) / m);
    return est;
}

}  // namespace tcbsde
