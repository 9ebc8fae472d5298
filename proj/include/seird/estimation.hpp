#pragma once

#include "seird/common.hpp"
#include "seird/compartments.hpp"
#include "seird/kernel.hpp"
#include "seird/params.hpp"
#include "seird/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace seird {

/// One row of reported data. new_cases is the day's count, active_cases a
/// point-in-time quantity, deaths and recoveries cumulative.
struct DayRecord {
    std::string date;
    count_t new_cases = 0;
    count_t active_cases = 0;
    count_t cumulative_deaths = 0;
    std::optional<count_t> cumulative_recoveries;
};

/// Reported series for contiguous days t = 1..T.
struct RealDataSeries {
    std::vector<DayRecord> days;

    int size() const { return static_cast<int>(days.size()); }
    /// 1-based day accessor matching the process convention.
    const DayRecord& day(int t) const { return days.at(static_cast<std::size_t>(t) - 1); }

    std::vector<count_t> cumulative_deaths() const {
        std::vector<count_t> out;
        out.reserve(days.size());
        for (const auto& d : days) out.push_back(d.cumulative_deaths);
        return out;
    }
};

/// Daily testing probabilities, defined from day 2 onward (day 1 is fixed by
/// data, so no import happens there).
class TestingSchedule {
public:
    static constexpr int first_day = 2;

    void append(double mild, double severe) {
        mild_.push_back(mild);
        severe_.push_back(severe);
    }

    int size() const { return static_cast<int>(mild_.size()); }
    bool empty() const { return mild_.empty(); }
    /// Last covered day; first_day - 1 when empty.
    int last_day() const { return first_day - 1 + size(); }

    double mild_at(int day) const { return at(mild_, day); }
    double severe_at(int day) const { return at(severe_, day); }

    const std::vector<double>& mild() const { return mild_; }
    const std::vector<double>& severe() const { return severe_; }

private:
    double at(const std::vector<double>& v, int day) const {
        const int idx = day - first_day;
        if (idx < 0 || idx >= static_cast<int>(v.size()))
            throw ValidationError("testing schedule has no entry for day " + std::to_string(day));
        return v[static_cast<std::size_t>(idx)];
    }

    std::vector<double> mild_;
    std::vector<double> severe_;
};

/// How the day-1 states are seeded from the first data row: the observed
/// active cases split into severe/mild by p_severe, the hidden process an
/// inflated copy, latents a fraction of the hidden mild count.
struct InitializationSpec {
    double p_severe = 0.07;      ///< share of active cases that are severe
    double inflation = 10.0;     ///< hidden counts per observed count (phi)
    double latent_fraction = 0.5;
    count_t initial_active = 0;
    count_t initial_deaths = 0;
    count_t initial_recoveries = 0;
};

/// Splits a daily new-case total into (mild, severe). The severe share is
/// rounded half-up; mild takes the remainder so the total is preserved.
inline std::pair<count_t, count_t> split_new_cases(count_t total, double p_severe) {
    if (total < 0) throw ValidationError("new-case total must be non-negative");
    const count_t severe = static_cast<count_t>(std::floor(p_severe * static_cast<double>(total) + 0.5));
    return {total - severe, severe};
}

/// Builds the day-1 population and observed states for a closed population
/// of size n. Throws if the inflated compartments leave no susceptibles.
inline std::pair<PopulationState, ObservedState> initialize_states(const InitializationSpec& spec,
                                                                   count_t n) {
    if (!(spec.p_severe >= 0.0 && spec.p_severe <= 1.0))
        throw ValidationError("p_severe must lie in [0,1]");
    if (!(spec.inflation >= 1.0))
        throw ValidationError("inflation factor must be >= 1");
    if (spec.latent_fraction < 0.0)
        throw ValidationError("latent_fraction must be non-negative");
    if (spec.initial_active < 0 || spec.initial_deaths < 0 || spec.initial_recoveries < 0)
        throw ValidationError("initial observed counts must be non-negative");

    ObservedState obs;
    auto [mild, severe] = split_new_cases(spec.initial_active, spec.p_severe);
    obs.i_m_o = mild;
    obs.i_s_o = severe;
    obs.d_o = spec.initial_deaths;
    obs.r_o = spec.initial_recoveries;
    obs.day = 1;

    auto inflate = [&](count_t c) {
        return static_cast<count_t>(std::llround(spec.inflation * static_cast<double>(c)));
    };
    PopulationState pop;
    pop.i_m = inflate(obs.i_m_o);
    pop.i_s = inflate(obs.i_s_o);
    pop.r = inflate(obs.r_o);
    pop.d = inflate(obs.d_o);
    pop.l = static_cast<count_t>(std::llround(spec.latent_fraction * static_cast<double>(pop.i_m)));
    pop.s = n - (pop.l + pop.i_m + pop.i_s + pop.r + pop.d);
    pop.day = 1;
    if (pop.s < 0)
        throw ValidationError("inflated initial states exceed the population size");
    return {pop, obs};
}

/// Testing probability for one day: imports over the undocumented pool.
/// No imports -> 0; an exhausted or inverted pool, or a ratio above 1,
/// clamps to 1.
inline double testing_prob_ratio(count_t imports, count_t pool) {
    if (imports == 0) return 0.0;
    if (pool <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(imports) / static_cast<double>(pool));
}

/// Estimates the per-day testing probabilities for days 2..T by simulating
/// the population process and the data-anchored observed process under the
/// training-period action, and taking the ratio of each day's reported
/// imports to the previous day's undocumented pool.
inline TestingSchedule estimate_testing_probs(const ModelParams& params, const RealDataSeries& data,
                                              const InitializationSpec& spec, count_t population,
                                              Action training_action, RngStream rng) {
    auto [pop, obs] = initialize_states(spec, population);
    TestingSchedule schedule;
    const int horizon = data.size();
    for (int t = 2; t <= horizon; ++t) {
        auto [new_mild, new_severe] = split_new_cases(data.day(t).new_cases, spec.p_severe);
        schedule.append(testing_prob_ratio(new_mild, pop.i_m - obs.i_m_o),
                        testing_prob_ratio(new_severe, pop.i_s - obs.i_s_o));
        const count_t severe_load = pop.i_s;
        pop = step_population(pop, params, training_action, rng);
        obs = step_observed_anchored(obs, params, new_mild, new_severe, severe_load, rng);
    }
    return schedule;
}

/// Seven-day moving average of daily deaths, (C[t+3] - C[t-4]) / 7 on the
/// cumulative series, defined where the window fits.
struct SmoothedSeries {
    static constexpr int first_day = 5;
    std::vector<double> values; ///< values[i] is day first_day + i

    int last_day() const { return first_day + static_cast<int>(values.size()) - 1; }
    double at(int day) const {
        const int idx = day - first_day;
        if (idx < 0 || idx >= static_cast<int>(values.size()))
            throw ValidationError("smoothed series has no entry for day " + std::to_string(day));
        return values[static_cast<std::size_t>(idx)];
    }
};

inline SmoothedSeries smooth_daily_deaths(const std::vector<count_t>& cumulative) {
    const int n = static_cast<int>(cumulative.size());
    if (n < 8)
        throw ValidationError("smoothing needs at least 8 days of cumulative deaths, got " +
                              std::to_string(n));
    SmoothedSeries out;
    out.values.reserve(static_cast<std::size_t>(n - 7));
    // 1-based day t maps to cumulative[t-1]; window is days t-4 .. t+3.
    for (int t = SmoothedSeries::first_day; t <= n - 3; ++t) {
        const double hi = static_cast<double>(cumulative[static_cast<std::size_t>(t + 2)]);
        const double lo = static_cast<double>(cumulative[static_cast<std::size_t>(t - 5)]);
        out.values.push_back((hi - lo) / 7.0);
    }
    return out;
}

/// Discrepancy between one simulated coupled run and the reported series:
/// the sum over days where the smoothing window fits of the squared relative
/// errors of smoothed daily deaths and of active cases. A term with a zero
/// reported denominator is left out; a day where both are degenerate
/// contributes nothing.
inline std::vector<double> simulation_loss_runs(const ModelParams& params,
                                                const InitializationSpec& spec, count_t population,
                                                const RealDataSeries& data,
                                                const TestingSchedule& schedule,
                                                Action training_action, int n_runs,
                                                const RngStream& base) {
    const int horizon = data.size();
    if (n_runs < 1) throw ValidationError("n_runs must be >= 1");
    if (schedule.last_day() < horizon)
        throw ValidationError("testing schedule does not cover the training horizon");
    const SmoothedSeries real_smooth = smooth_daily_deaths(data.cumulative_deaths());

    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(n_runs));
    for (int run = 0; run < n_runs; ++run) {
        RngStream rng = base.sub(static_cast<std::uint64_t>(run));
        auto [pop, obs] = initialize_states(spec, population);
        CoupledState state{pop, obs};
        std::vector<count_t> sim_active{state.obs.active()};
        std::vector<count_t> sim_deaths{state.obs.d_o};
        for (int t = 2; t <= horizon; ++t) {
            state = step_coupled(state, params, training_action, schedule.mild_at(t),
                                 schedule.severe_at(t), rng);
            sim_active.push_back(state.obs.active());
            sim_deaths.push_back(state.obs.d_o);
        }
        const SmoothedSeries sim_smooth = smooth_daily_deaths(sim_deaths);

        double loss = 0.0;
        for (int t = SmoothedSeries::first_day; t <= real_smooth.last_day(); ++t) {
            const double real_d = real_smooth.at(t);
            if (real_d != 0.0) {
                const double ratio = sim_smooth.at(t) / real_d;
                loss += (ratio - 1.0) * (ratio - 1.0);
            }
            const double real_active = static_cast<double>(data.day(t).active_cases);
            if (real_active != 0.0) {
                const double ratio = static_cast<double>(sim_active[static_cast<std::size_t>(t - 1)]) / real_active;
                loss += (ratio - 1.0) * (ratio - 1.0);
            }
        }
        losses.push_back(loss);
    }
    return losses;
}

inline double simulation_loss(const ModelParams& params, const InitializationSpec& spec,
                              count_t population, const RealDataSeries& data,
                              const TestingSchedule& schedule, Action training_action, int n_runs,
                              const RngStream& base) {
    const auto losses =
        simulation_loss_runs(params, spec, population, data, schedule, training_action, n_runs, base);
    double sum = 0.0;
    for (double v : losses) sum += v;
    return sum / static_cast<double>(losses.size());
}

/// Candidate transition probabilities: per-parameter multiplicative factors
/// around the initial estimate. Searched one coordinate at a time by
/// default; `cartesian` enumerates the full product instead.
struct ParameterGrid {
    std::vector<double> factors{0.5, 0.75, 1.0, 1.5, 2.0};
    bool cartesian = false;
};

struct FitResult {
    ModelParams params;
    TestingSchedule schedule;
    std::vector<double> iteration_losses; ///< minimized loss per iteration, 1-based k
    int k_min = 1;                        ///< iteration with the smallest loss (ties: smallest k)
};

namespace detail {

inline double set_coordinate(TransitionProbs& probs, int j, double value) {
    switch (j) {
        case 0: return std::exchange(probs.l_to_im, value);
        case 1: return std::exchange(probs.im_to_is, value);
        case 2: return std::exchange(probs.im_to_r, value);
        case 3: return std::exchange(probs.is_to_r, value);
        case 4: return std::exchange(probs.is_to_d1, value);
    }
    throw ValidationError("transition probability index out of range");
}

inline double get_coordinate(const TransitionProbs& probs, int j) {
    return probs.as_array()[static_cast<std::size_t>(j)];
}

} // namespace detail

/// Joint estimation of transition and testing probabilities. Each iteration
/// re-estimates the testing schedule under the current parameters, then
/// grid-searches the probability vector against the simulated loss; the
/// returned estimate is the iteration with the smallest minimized loss.
/// All candidates within an iteration share one replicate seed-set, so loss
/// comparisons are free of sampling noise between candidates.
inline FitResult fit(const RealDataSeries& data, const InitializationSpec& spec, count_t population,
                     const ModelParams& init_params, const ParameterGrid& grid,
                     Action training_action, int k_iters, int n_runs, const RngStream& base) {
    if (k_iters < 1) throw ValidationError("k_iters must be >= 1");
    if (grid.factors.empty()) throw ValidationError("parameter grid must be non-empty");

    const RngStream loss_base = base.sub(2);
    const TransitionProbs center = init_params.probs();
    ModelParams current = init_params;

    auto loss_of = [&](const ModelParams& candidate, const TestingSchedule& schedule) {
        return simulation_loss(candidate, spec, population, data, schedule, training_action, n_runs,
                               loss_base);
    };

    std::vector<double> iteration_losses;
    std::optional<FitResult> best;
    double best_overall = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= k_iters; ++k) {
        const TestingSchedule schedule = estimate_testing_probs(
            current, data, spec, population, training_action, base.sub(1).sub(static_cast<std::uint64_t>(k)));

        double best_loss = loss_of(current, schedule);
        if (grid.cartesian) {
            TransitionProbs probs;
            for (double f0 : grid.factors) {
                probs.l_to_im = f0 * center.l_to_im;
                for (double f1 : grid.factors) {
                    probs.im_to_is = f1 * center.im_to_is;
                    for (double f2 : grid.factors) {
                        probs.im_to_r = f2 * center.im_to_r;
                        for (double f3 : grid.factors) {
                            probs.is_to_r = f3 * center.is_to_r;
                            for (double f4 : grid.factors) {
                                probs.is_to_d1 = f4 * center.is_to_d1;
                                std::optional<ModelParams> candidate;
                                try {
                                    candidate = current.with_probs(probs);
                                } catch (const ValidationError&) {
                                    continue; // outflow constraint violated at this corner
                                }
                                const double loss = loss_of(*candidate, schedule);
                                if (loss < best_loss) {
                                    best_loss = loss;
                                    current = *candidate;
                                }
                            }
                        }
                    }
                }
            }
        } else {
            for (int j = 0; j < 5; ++j) {
                for (double f : grid.factors) {
                    TransitionProbs probs = current.probs();
                    const double value = f * detail::get_coordinate(center, j);
                    if (value == detail::get_coordinate(probs, j)) continue;
                    detail::set_coordinate(probs, j, value);
                    std::optional<ModelParams> candidate;
                    try {
                        candidate = current.with_probs(probs);
                    } catch (const ValidationError&) {
                        continue;
                    }
                    const double loss = loss_of(*candidate, schedule);
                    if (loss < best_loss) {
                        best_loss = loss;
                        current = *candidate;
                    }
                }
            }
        }

        iteration_losses.push_back(best_loss);
        if (best_loss < best_overall) {
            best_overall = best_loss;
            best = FitResult{current, schedule, {}, k};
        }
    }
    best->iteration_losses = std::move(iteration_losses);
    return *best;
}

} // namespace seird
