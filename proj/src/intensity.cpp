#include "tcbsde/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tcbsde {

bool component_is_deterministic(const IntensityComponent& c) {
    if (std::holds_alternative<PiecewiseConstantIntensity>(c)) return true;
    if (const auto* ts = std::get_if<TwoStateIntensity>(&c)) {
        // Degenerate chains with one reachable level are deterministic too,
        // but only the trivially frozen case matters for path sharing.
        return ts->low == ts->high ||
               (ts->rate_up == 0.0 && ts->rate_down == 0.0 &&
                (ts->p_start_high == 0.0 || ts->p_start_high == 1.0));
    }
    if (const auto* cir = std::get_if<CirIntensity>(&c)) return cir->vol == 0.0;
    return false;
}

bool is_deterministic(const IntensityModel& m) {
    return component_is_deterministic(m.brownian) && component_is_deterministic(m.jump);
}

void validate_component(const IntensityComponent& c) {
    if (const auto* pc = std::get_if<PiecewiseConstantIntensity>(&c)) {
        if (pc->times.empty() || pc->times.size() != pc->values.size())
            throw std::invalid_argument("intensity: knot times and values must match and be nonempty");
        if (pc->times.front() != 0.0)
            throw std::invalid_argument("intensity: first knot must be at time 0");
        for (std::size_t k = 0; k < pc->times.size(); ++k) {
            if (k > 0 && !(pc->times[k] > pc->times[k - 1]))
                throw std::invalid_argument("intensity: knot times must increase");
            if (!(pc->values[k] >= 0.0) || !std::isfinite(pc->values[k]))
                throw std::invalid_argument("intensity: values must be nonnegative and finite");
        }
    } else if (const auto* ts = std::get_if<TwoStateIntensity>(&c)) {
        if (!(ts->low >= 0.0) || !(ts->high >= 0.0))
            throw std::invalid_argument("intensity: two-state levels must be nonnegative");
        if (!(ts->rate_up >= 0.0) || !(ts->rate_down >= 0.0))
            throw std::invalid_argument("intensity: switch rates must be nonnegative");
        if (!(ts->p_start_high >= 0.0 && ts->p_start_high <= 1.0))
            throw std::invalid_argument("intensity: p_start_high must lie in [0,1]");
    } else if (const auto* cir = std::get_if<CirIntensity>(&c)) {
        if (!(cir->mean_reversion >= 0.0) || !(cir->level >= 0.0) || !(cir->vol >= 0.0) ||
            !(cir->x0 >= 0.0))
            throw std::invalid_argument("intensity: CIR parameters must be nonnegative");
    }
}

namespace {

void fill_piecewise(const PiecewiseConstantIntensity& pc, const TimeGrid& grid,
                    std::vector<double>& out) {
    const int n = grid.steps();
    for (int i = 0; i <= n; ++i) {
        const double t = grid.time(i);
        std::size_t k = pc.times.size() - 1;
        while (k > 0 && pc.times[k] > t) --k;
        out[static_cast<std::size_t>(i)] = pc.values[k];
    }
}

void fill_two_state(const TwoStateIntensity& ts, const TimeGrid& grid, RngStream& stream,
                    std::vector<double>& out) {
    const int n = grid.steps();
    bool high = stream.uniform() < ts.p_start_high;
    double t = 0.0;
    int i = 0;
    for (;;) {
        const double rate = high ? ts.rate_down : ts.rate_up;
        double hold = std::numeric_limits<double>::infinity();
        if (rate > 0.0) hold = -std::log(stream.uniform()) / rate;
        const double t_next = t + hold;
        while (i <= n && grid.time(i) < t_next) {
            out[static_cast<std::size_t>(i)] = high ? ts.high : ts.low;
            ++i;
        }
        if (i > n) return;
        high = !high;
        t = t_next;
    }
}

void fill_cir(const CirIntensity& cir, const TimeGrid& grid, RngStream& stream,
              std::vector<double>& out) {
    const int n = grid.steps();
    double x = cir.x0;
    out[0] = x;
    for (int i = 0; i < n; ++i) {
        const double dt = grid.dt(i);
        const double z = stream.gaussian();
        x += cir.mean_reversion * (cir.level - x) * dt + cir.vol * std::sqrt(x * dt) * z;
        x = std::max(x, 0.0);  // clip after each Euler step
        out[static_cast<std::size_t>(i) + 1] = x;
    }
}

void fill_component(const IntensityComponent& c, const TimeGrid& grid, RngStream& stream,
                    std::vector<double>& out) {
    if (const auto* pc = std::get_if<PiecewiseConstantIntensity>(&c)) {
        fill_piecewise(*pc, grid, out);
    } else if (const auto* ts = std::get_if<TwoStateIntensity>(&c)) {
        fill_two_state(*ts, grid, stream, out);
    } else {
        fill_cir(std::get<CirIntensity>(c), grid, stream, out);
    }
}

void accumulate_left_rule(const TimeGrid& grid, const std::vector<double>& lam,
                          std::vector<double>& cum) {
    cum[0] = 0.0;
    for (int i = 0; i < grid.steps(); ++i)
        cum[static_cast<std::size_t>(i) + 1] =
            cum[static_cast<std::size_t>(i)] + lam[static_cast<std::size_t>(i)] * grid.dt(i);
}

}  // namespace

IntensityPath simulate_intensity(const IntensityModel& model,
                                 std::shared_ptr<const TimeGrid> grid, RngStream& stream) {
    validate_component(model.brownian);
    validate_component(model.jump);
    IntensityPath path;
    path.grid = std::move(grid);
    const std::size_t n1 = path.grid->points.size();
    path.lam_b.resize(n1);
    path.lam_h.resize(n1);
    path.cum_b.resize(n1);
    path.cum_h.resize(n1);
    fill_component(model.brownian, *path.grid, stream, path.lam_b);
    fill_component(model.jump, *path.grid, stream, path.lam_h);
    accumulate_left_rule(*path.grid, path.lam_b, path.cum_b);
    accumulate_left_rule(*path.grid, path.lam_h, path.cum_h);
    return path;
}

}  // namespace tcbsde
