#include "tcbsde/noise_batch.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "tcbsde/csv.hpp"
#include "tcbsde/parallel.hpp"

namespace tcbsde {

NoiseScenario simulate_noise(std::shared_ptr<const IntensityPath> intensity,
                             std::shared_ptr<const LevyMeasure> levy, RngStream& brownian,
                             RngStream& jumps, std::uint64_t seed_token) {
    NoiseScenario s;
    s.intensity = std::move(intensity);
    s.levy = std::move(levy);
    s.seed = seed_token;
    const int n = s.intensity->grid->steps();
    const int atoms = s.levy->atom_count();
    s.d_brownian.resize(n);
    s.counts.resize(n, atoms);
    s.d_compensated.resize(n, atoms);
    for (int i = 0; i < n; ++i) {
        const double var = std::max(s.intensity->d_cum_b(i), 0.0);
        s.d_brownian(i) = std::sqrt(var) * brownian.gaussian();
    }
    for (int i = 0; i < n; ++i) {
        const double dch = std::max(s.intensity->d_cum_h(i), 0.0);
        for (int j = 0; j < atoms; ++j) {
            const double mean = s.levy->atoms[static_cast<std::size_t>(j)].w * dch;
            const double k = static_cast<double>(jumps.poisson(mean));
            s.counts(i, j) = k;
            s.d_compensated(i, j) = k - mean;
        }
    }
    return s;
}

NoiseBatch simulate_batch(const IntensityModel& model, std::shared_ptr<const TimeGrid> grid,
                          std::shared_ptr<const LevyMeasure> levy, int count,
                          std::uint64_t master_seed) {
    if (count < 1) throw std::invalid_argument("simulate_batch: need at least one scenario");
    NoiseBatch batch;
    batch.grid = grid;
    batch.levy = levy;
    batch.master_seed = master_seed;
    batch.scenarios.resize(static_cast<std::size_t>(count));

    std::shared_ptr<const IntensityPath> shared_path;
    if (is_deterministic(model)) {
        RngStream stream(master_seed, 0, StreamPurpose::intensity);
        shared_path = std::make_shared<IntensityPath>(simulate_intensity(model, grid, stream));
    } else {
        validate_component(model.brownian);
        validate_component(model.jump);
    }

    parallel_blocks(static_cast<std::size_t>(count), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            std::shared_ptr<const IntensityPath> path = shared_path;
            if (!path) {
                RngStream stream(master_seed, s, StreamPurpose::intensity);
                path = std::make_shared<IntensityPath>(simulate_intensity(model, grid, stream));
            }
            RngStream brownian(master_seed, s, StreamPurpose::brownian);
            RngStream jumps(master_seed, s, StreamPurpose::jumps);
            batch.scenarios[s] = simulate_noise(std::move(path), levy, brownian, jumps,
                                                scenario_seed_token(master_seed, s));
        }
    });

    const int n = grid->steps();
    batch.brownian_levels.resize(count, n + 1);
    batch.eta_levels.resize(count, n + 1);
    parallel_blocks(static_cast<std::size_t>(count), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            const NoiseScenario& sc = batch.scenarios[s];
            double b = 0.0, eta = 0.0;
            batch.brownian_levels(static_cast<Eigen::Index>(s), 0) = 0.0;
            batch.eta_levels(static_cast<Eigen::Index>(s), 0) = 0.0;
            for (int i = 0; i < n; ++i) {
                b += sc.d_brownian(i);
                for (int j = 0; j < sc.atom_count(); ++j)
                    eta += levy->atoms[static_cast<std::size_t>(j)].z * sc.d_compensated(i, j);
                batch.brownian_levels(static_cast<Eigen::Index>(s), i + 1) = b;
                batch.eta_levels(static_cast<Eigen::Index>(s), i + 1) = eta;
            }
        }
    });
    return batch;
}

CharFunctionCheck empirical_char_function(const NoiseBatch& batch, double c, int step,
                                          NoiseComponent which) {
    if (step < 0 || step > batch.steps())
        throw std::invalid_argument("empirical_char_function: time is not a grid point");
    const int m = batch.size();
    const std::complex<double> iu(0.0, 1.0);
    std::complex<double> sum_emp(0, 0), sum_ref(0, 0);
    double sum_re2 = 0, sum_im2 = 0;
    std::complex<double> sum_diff(0, 0);
    std::vector<std::complex<double>> diffs(static_cast<std::size_t>(m));
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        std::complex<double> emp, ref;
        if (which == NoiseComponent::brownian) {
            emp = std::exp(iu * c * batch.brownian_levels(s, step));
            ref = std::exp(-0.5 * c * c * sc.intensity->cum_b[static_cast<std::size_t>(step)]);
        } else {
            emp = std::exp(iu * c * batch.eta_levels(s, step));
            std::complex<double> psi(0, 0);
            for (const auto& a : batch.levy->atoms)
                psi += (std::exp(iu * c * a.z) - 1.0 - iu * c * a.z) * a.w;
            ref = std::exp(psi * sc.intensity->cum_h[static_cast<std::size_t>(step)]);
        }
        sum_emp += emp;
        sum_ref += ref;
        diffs[static_cast<std::size_t>(s)] = emp - ref;
        sum_diff += emp - ref;
    }
    const std::complex<double> mean_diff = sum_diff / static_cast<double>(m);
    for (const auto& d : diffs) {
        sum_re2 += (d.real() - mean_diff.real()) * (d.real() - mean_diff.real());
        sum_im2 += (d.imag() - mean_diff.imag()) * (d.imag() - mean_diff.imag());
    }
    CharFunctionCheck out;
    out.empirical = sum_emp / static_cast<double>(m);
    out.reference = sum_ref / static_cast<double>(m);
    out.se = std::sqrt((sum_re2 + sum_im2) / (static_cast<double>(m) - 1.0) /
                       static_cast<double>(m));
    return out;
}

MomentCheck doubly_stochastic_moments(const NoiseBatch& batch, int step_begin, int step_end,
                                      int atom) {
    if (step_begin < 0 || step_end > batch.steps() || step_begin > step_end || atom < 0 ||
        atom >= batch.atom_count())
        throw std::invalid_argument("doubly_stochastic_moments: invalid cell");
    const int m = batch.size();
    const double w = batch.levy->atoms[static_cast<std::size_t>(atom)].w;
    Eigen::VectorXd k(m), clock(m);
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        double total = 0.0;
        for (int i = step_begin; i < step_end; ++i) total += sc.counts(i, atom);
        k(s) = total;
        clock(s) = w * (sc.intensity->cum_h[static_cast<std::size_t>(step_end)] -
                        sc.intensity->cum_h[static_cast<std::size_t>(step_begin)]);
    }
    MomentCheck out;
    out.mean = k.mean();
    const Eigen::VectorXd dk = k.array() - out.mean;
    out.variance = dk.squaredNorm() / (m - 1.0);
    out.ref_mean = clock.mean();
    const double clock_var = (clock.array() - out.ref_mean).matrix().squaredNorm() / (m - 1.0);
    out.ref_variance = out.ref_mean + clock_var;
    out.se_mean = std::sqrt(out.variance / m);
    // asymptotic standard error of the sample variance
    const double m4 = dk.array().pow(4).mean();
    out.se_variance = std::sqrt(std::max(m4 - out.variance * out.variance, 0.0) / m);
    return out;
}

double mu_of_cell(const NoiseScenario& s, const NoiseCell& cell) {
    double sum = 0.0;
    if (cell.slot < 0) {
        for (int i = cell.step_begin; i < cell.step_end; ++i) sum += s.d_brownian(i);
    } else {
        for (int i = cell.step_begin; i < cell.step_end; ++i) sum += s.d_compensated(i, cell.slot);
    }
    return sum;
}

MeanCheck orthogonality_check(const NoiseBatch& batch, const NoiseCell& a, const NoiseCell& b) {
    const int m = batch.size();
    Eigen::VectorXd prod(m);
    for (int s = 0; s < m; ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        prod(s) = mu_of_cell(sc, a) * mu_of_cell(sc, b);
    }
    MeanCheck out;
    out.mean = prod.mean();
    out.se = std::sqrt((prod.array() - out.mean).matrix().squaredNorm() / (m - 1.0) / m);
    return out;
}

MeanCheck martingale_check(const NoiseBatch& batch, const NoiseCell& cell,
                           const std::function<bool(const ScenarioView&)>& selector) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(batch.size()));
    for (const auto& sc : batch.scenarios) {
        if (selector && !selector(ScenarioView(sc, cell.step_begin))) continue;
        values.push_back(mu_of_cell(sc, cell));
    }
    MeanCheck out;
    if (values.size() < 2) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (static_cast<double>(values.size()) - 1.0) /
                       static_cast<double>(values.size()));
    return out;
}

void export_batch_csv(const NoiseBatch& batch, std::ostream& out) {
    CsvWriter csv(out);
    csv.raw("scenario_id,t,lamB,lamH,dB");
    for (const auto& a : batch.levy->atoms) csv.raw_field("count_" + format_double(a.z));
    csv.end_row();
    for (int s = 0; s < batch.size(); ++s) {
        const NoiseScenario& sc = batch.scenarios[static_cast<std::size_t>(s)];
        for (int i = 0; i < batch.steps(); ++i) {
            csv.field(static_cast<long long>(s));
            csv.field(batch.grid->time(i));
            csv.field(sc.intensity->lam_b[static_cast<std::size_t>(i)]);
            csv.field(sc.intensity->lam_h[static_cast<std::size_t>(i)]);
            csv.field(sc.d_brownian(i));
            for (int j = 0; j < batch.atom_count(); ++j) csv.field(sc.counts(i, j));
            csv.end_row();
        }
    }
}

}  // namespace tcbsde
