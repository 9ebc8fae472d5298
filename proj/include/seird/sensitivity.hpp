#pragma once

#include "seird/common.hpp"
#include "seird/kernel.hpp"
#include "seird/params.hpp"
#include "seird/policy.hpp"
#include "seird/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace seird {

/// Draws a noisy copy of the five transition probabilities in log-odds
/// space: l_j = logit(p_j), l~_j ~ Normal(l_j, |l_j|/3 * noise_scale),
/// p~_j = logistic(l~_j). Sets violating the outflow constraints are
/// redrawn whole, never clamped. noise_scale 0 returns the input unchanged.
inline ModelParams perturb_params(const ModelParams& p_hat, RngStream& rng,
                                  double noise_scale = 1.0) {
    if (noise_scale < 0.0) throw ValidationError("noise scale must be non-negative");
    if (noise_scale == 0.0) return p_hat;
    const std::array<double, 5> base = p_hat.probs().as_array();
    for (double p : base)
        if (!(p > 0.0 && p < 1.0))
            throw ValidationError("log-odds perturbation requires probabilities strictly inside (0,1)");

    constexpr int max_attempts = 10000;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::array<double, 5> drawn{};
        for (std::size_t j = 0; j < 5; ++j) {
            const double logit = std::log(base[j] / (1.0 - base[j]));
            const double noisy = rng.normal(logit, noise_scale * std::abs(logit) / 3.0);
            drawn[j] = 1.0 / (1.0 + std::exp(-noisy));
        }
        try {
            return p_hat.with_probs(TransitionProbs{drawn[0], drawn[1], drawn[2], drawn[3], drawn[4]});
        } catch (const ValidationError&) {
            continue; // outflow sum exceeded 1, redraw the whole set
        }
    }
    throw ValidationError("could not draw a valid perturbed parameter set");
}

/// Pointwise band of one tracked series. `curves` keeps the O mean curves
/// (rows) the percentiles were taken over.
struct BandChannel {
    std::vector<double> lower;
    std::vector<double> mean;
    std::vector<double> upper;
    std::vector<std::vector<double>> curves;
};

struct BandResult {
    int first_day = 1;
    BandChannel infected; ///< population i_m + i_s
    BandChannel deaths;   ///< population cumulative d
    BandChannel severe;   ///< population i_s
};

/// Nearest-rank percentile of an unsorted sample, q in (0,1).
inline double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

/// Uncertainty band around the test-period forecast: `outer` perturbed
/// parameter sets, each averaged over `inner` trajectories under the fixed
/// optimal policy, then per-day 5th/95th nearest-rank percentiles across the
/// outer mean curves plus their grand mean.
inline BandResult sensitivity_band(const ModelParams& p_hat, const CoupledState& start,
                                   const PolicyThresholds& thr, Action prev_action,
                                   const TestingSchedule& schedule, int outer, int inner,
                                   int horizon, const RngStream& base, double noise_scale = 1.0) {
    if (outer < 2) throw ValidationError("band needs at least 2 outer iterations");
    if (inner < 1) throw ValidationError("band needs at least 1 inner iteration");
    const std::size_t n_days = static_cast<std::size_t>(horizon - start.pop.day) + 1;
    const CostConfig no_cost{}; // rewards are not tracked here

    BandResult band;
    band.first_day = start.pop.day;
    for (BandChannel* ch : {&band.infected, &band.deaths, &band.severe})
        ch->curves.assign(static_cast<std::size_t>(outer), std::vector<double>(n_days, 0.0));

    // The I inner streams are shared by every outer iteration, so the spread
    // of the O mean curves reflects the parameter perturbation alone; with
    // zero noise all curves coincide.
    const RngStream inner_base = base.sub(2);
    for (int o = 0; o < outer; ++o) {
        RngStream perturb_rng = base.sub(1).sub(static_cast<std::uint64_t>(o));
        const ModelParams params = perturb_params(p_hat, perturb_rng, noise_scale);
        auto& infected_row = band.infected.curves[static_cast<std::size_t>(o)];
        auto& deaths_row = band.deaths.curves[static_cast<std::size_t>(o)];
        auto& severe_row = band.severe.curves[static_cast<std::size_t>(o)];
        for (int i = 0; i < inner; ++i) {
            const PolicyRollout roll =
                rollout_policy(thr, params, no_cost, start, prev_action, schedule, horizon,
                               inner_base.sub(static_cast<std::uint64_t>(i)));
            for (std::size_t k = 0; k < n_days; ++k) {
                infected_row[k] += static_cast<double>(roll.path[k].pop.infected());
                deaths_row[k] += static_cast<double>(roll.path[k].pop.d);
                severe_row[k] += static_cast<double>(roll.path[k].pop.i_s);
            }
        }
        for (std::size_t k = 0; k < n_days; ++k) {
            infected_row[k] /= inner;
            deaths_row[k] /= inner;
            severe_row[k] /= inner;
        }
    }

    for (BandChannel* ch : {&band.infected, &band.deaths, &band.severe}) {
        ch->lower.resize(n_days);
        ch->mean.resize(n_days);
        ch->upper.resize(n_days);
        std::vector<double> column(static_cast<std::size_t>(outer));
        for (std::size_t k = 0; k < n_days; ++k) {
            double sum = 0.0;
            for (std::size_t o = 0; o < static_cast<std::size_t>(outer); ++o) {
                column[o] = ch->curves[o][k];
                sum += column[o];
            }
            ch->lower[k] = nearest_rank_percentile(column, 0.05);
            ch->upper[k] = nearest_rank_percentile(column, 0.95);
            ch->mean[k] = sum / static_cast<double>(outer);
        }
    }
    return band;
}

} // namespace seird
