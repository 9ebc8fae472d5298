#pragma once

#include "seird/common.hpp"
#include "seird/compartments.hpp"
#include "seird/estimation.hpp"
#include "seird/kernel.hpp"
#include "seird/params.hpp"
#include "seird/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace seird {

/// Days between lockdown decisions.
inline constexpr int decision_period = 14;

/// Bang-bang policy: a weighted per-capita signal of the observed infected
/// counts is compared against three ordered thresholds every decision day.
class PolicyThresholds {
public:
    PolicyThresholds(double l, double u1, double u2, double theta)
        : l_(l), u1_(u1), u2_(u2), theta_(theta) {
        if (!(0.0 < l && l < u1 && u1 < u2 && u2 < 1.0))
            throw ValidationError("policy thresholds must satisfy 0 < l < u1 < u2 < 1");
        if (!(theta >= 0.0 && theta <= 1.0))
            throw ValidationError("theta must lie in [0,1]");
    }

    double l() const { return l_; }
    double u1() const { return u1_; }
    double u2() const { return u2_; }
    double theta() const { return theta_; }

    friend bool operator==(const PolicyThresholds& a, const PolicyThresholds& b) {
        return a.l_ == b.l_ && a.u1_ == b.u1_ && a.u2_ == b.u2_ && a.theta_ == b.theta_;
    }

private:
    double l_, u1_, u2_, theta_;
};

/// Daily cost structure of the reward. Currency amounts are whole dollars.
struct CostConfig {
    std::int64_t economic_day_cost = 0; ///< C_E: full-lockdown cost per day
    std::int64_t life_cost = 0;         ///< C_L: cost per death
    double over_capacity_fraction = 0.25; ///< rho: per-person-day penalty share above capacity
    count_t cap = 0;                    ///< beds available for these patients
};

inline void check_cost(const CostConfig& cost) {
    if (cost.economic_day_cost < 0 || cost.life_cost < 0)
        throw ValidationError("costs must be non-negative");
    if (!(cost.over_capacity_fraction < 1.0) || cost.over_capacity_fraction < 0.0)
        throw ValidationError("over-capacity fraction must lie in [0,1)");
    if (cost.cap < 0) throw ValidationError("cap must be non-negative");
}

/// Scales the national daily lockdown cost by the state's GDP share; when a
/// raw bed count is given, capacity is the 40% share that can be devoted to
/// these patients.
inline CostConfig state_cost_config(double gdp_fraction, std::int64_t us_daily_cost,
                                    std::int64_t life_cost, double rho, count_t raw_beds) {
    if (gdp_fraction < 0.0) throw ValidationError("GDP fraction must be non-negative");
    CostConfig cost;
    cost.economic_day_cost = static_cast<std::int64_t>(
        std::llround(gdp_fraction * static_cast<double>(us_daily_cost)));
    cost.life_cost = life_cost;
    cost.over_capacity_fraction = rho;
    cost.cap = static_cast<count_t>(std::llround(0.40 * static_cast<double>(raw_beds)));
    check_cost(cost);
    return cost;
}

/// w = (theta * Im_obs + (1 - theta) * Is_obs) / N.
inline double policy_signal(const ObservedState& obs, double theta, count_t n) {
    if (n <= 0) throw ValidationError("population size must be positive");
    return (theta * static_cast<double>(obs.i_m_o) + (1.0 - theta) * static_cast<double>(obs.i_s_o)) /
           static_cast<double>(n);
}

/// Decision rule. Off-cadence days keep the previous action; on days
/// divisible by the decision period the signal picks the level, with the
/// status quo kept strictly between l and u1.
inline Action policy_action(int day, double w, Action prev, const PolicyThresholds& thr) {
    if (day % decision_period != 0) return prev;
    if (w >= thr.u2()) return Action::full;
    if (w >= thr.u1()) return Action::partial;
    if (w <= thr.l()) return Action::release;
    return prev;
}

/// Reward observed for one transition: the negative of the death cost, the
/// level-scaled economic cost and the over-capacity penalty.
inline double immediate_reward(const PopulationState& prev, const PopulationState& next,
                               Action action, const CostConfig& cost) {
    const double deaths = static_cast<double>(next.d - prev.d);
    const double econ = (static_cast<double>(action_level(action)) / 2.0) *
                        static_cast<double>(cost.economic_day_cost);
    const double overflow = static_cast<double>(std::max<count_t>(next.i_s - cost.cap, 0));
    return -(static_cast<double>(cost.life_cost) * deaths + econ +
             cost.over_capacity_fraction * static_cast<double>(cost.life_cost) * overflow);
}

namespace detail {

/// OLS trend test on (day, value) pairs: returns the extrapolation constant,
/// the series mean without a monotone trend and the last value with one
/// (slope t-statistic above 2 in magnitude).
inline double extrapolation_value(const std::vector<double>& values, int first_day) {
    const int n = static_cast<int>(values.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (int i = 0; i < n; ++i) {
        mean_x += first_day + i;
        mean_y += values[static_cast<std::size_t>(i)];
    }
    mean_x /= n;
    mean_y /= n;
    if (n < 3) return mean_y;

    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double dx = (first_day + i) - mean_x;
        sxx += dx * dx;
        sxy += dx * (values[static_cast<std::size_t>(i)] - mean_y);
    }
    const double slope = sxy / sxx;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double fitted = mean_y + slope * ((first_day + i) - mean_x);
        const double res = values[static_cast<std::size_t>(i)] - fitted;
        sse += res * res;
    }
    const double se = std::sqrt(sse / (n - 2) / sxx);
    const bool trending = se == 0.0 ? slope != 0.0 : std::abs(slope / se) > 2.0;
    return trending ? values.back() : mean_y;
}

} // namespace detail

/// Extends a training-period schedule through `horizon` days: each series
/// continues at its day-T value when it shows a monotone trend, at its
/// training mean otherwise. Existing entries are preserved.
inline TestingSchedule extrapolate_testing_probs(const TestingSchedule& schedule, int horizon) {
    if (schedule.empty()) throw ValidationError("cannot extrapolate an empty testing schedule");
    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    const double mild_ext = clamp01(detail::extrapolation_value(schedule.mild(), TestingSchedule::first_day));
    const double severe_ext = clamp01(detail::extrapolation_value(schedule.severe(), TestingSchedule::first_day));

    TestingSchedule out = schedule;
    for (int day = schedule.last_day() + 1; day <= horizon; ++day) out.append(mild_ext, severe_ext);
    return out;
}

/// Candidate sets for each threshold and for theta; the discretized policy
/// class is every (l, u1, u2, theta) combination that satisfies the
/// ordering constraint.
struct PolicyGrid {
    std::vector<double> l_values{1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
    std::vector<double> u1_values{1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
    std::vector<double> u2_values{1e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2};
    std::vector<double> thetas{0.0, 0.25, 0.5, 0.75, 1.0};

    /// Applies one candidate pool to all three thresholds.
    void set_levels(const std::vector<double>& levels) {
        l_values = levels;
        u1_values = levels;
        u2_values = levels;
    }

    /// Members in lexicographic (l, u1, u2, theta) order.
    std::vector<PolicyThresholds> enumerate() const {
        auto cleaned = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            return v;
        };
        const std::vector<double> ls = cleaned(l_values);
        const std::vector<double> u1s = cleaned(u1_values);
        const std::vector<double> u2s = cleaned(u2_values);
        const std::vector<double> ths = cleaned(thetas);
        std::vector<PolicyThresholds> out;
        for (double l : ls)
            for (double u1 : u1s)
                for (double u2 : u2s) {
                    if (!(l < u1 && u1 < u2)) continue;
                    for (double theta : ths) out.emplace_back(l, u1, u2, theta);
                }
        return out;
    }
};

/// One simulated test-period path under a fixed policy.
struct PolicyRollout {
    double reward = 0.0;               ///< summed immediate rewards, t = T .. horizon-1
    std::vector<CoupledState> path;    ///< states for days T .. horizon
    std::vector<Action> actions;       ///< a_t for t = T .. horizon
};

/// Simulates one replicate from the end-of-training state through `horizon`.
/// The action for day t+1 is decided at the end of day t from the observed
/// signal; `prev_action` seeds the status quo at day T.
inline PolicyRollout rollout_policy(const PolicyThresholds& thr, const ModelParams& params,
                                    const CostConfig& cost, const CoupledState& start,
                                    Action prev_action, const TestingSchedule& schedule, int horizon,
                                    RngStream rng) {
    if (horizon <= start.pop.day)
        throw ValidationError("policy horizon must exceed the start day");
    if (schedule.last_day() < horizon)
        throw ValidationError("testing schedule does not cover the policy horizon");
    const count_t n = start.pop.total();

    PolicyRollout out;
    out.path.reserve(static_cast<std::size_t>(horizon - start.pop.day) + 1);
    out.path.push_back(start);
    CoupledState state = start;
    Action prev = prev_action;
    for (int t = start.pop.day; t < horizon; ++t) {
        const Action action = policy_action(t, policy_signal(state.obs, thr.theta(), n), prev, thr);
        out.actions.push_back(action);
        prev = action;
        CoupledState next =
            step_coupled(state, params, action, schedule.mild_at(t + 1), schedule.severe_at(t + 1), rng);
        out.reward += immediate_reward(state.pop, next.pop, action, cost);
        state = next;
        out.path.push_back(state);
    }
    out.actions.push_back(policy_action(horizon, policy_signal(state.obs, thr.theta(), n), prev, thr));
    return out;
}

/// Mean reward over `replicates` independent rollouts. Replicate j always
/// uses stream base.sub(j), so evaluations of different policies against the
/// same base share common random numbers.
inline double evaluate_policy(const PolicyThresholds& thr, const ModelParams& params,
                              const CostConfig& cost, const CoupledState& start, Action prev_action,
                              const TestingSchedule& schedule, int horizon, int replicates,
                              const RngStream& base) {
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    double total = 0.0;
    for (int j = 0; j < replicates; ++j) {
        total += rollout_policy(thr, params, cost, start, prev_action, schedule, horizon,
                                base.sub(static_cast<std::uint64_t>(j)))
                     .reward;
    }
    return total / static_cast<double>(replicates);
}

struct OptimalPolicy {
    PolicyThresholds thresholds;
    double expected_reward;
};

/// Exhaustive search over the grid with common random numbers. Ties keep the
/// lexicographically smallest (l, u1, u2, theta).
inline OptimalPolicy optimize_policy(const PolicyGrid& grid, const ModelParams& params,
                                     const CostConfig& cost, const CoupledState& start,
                                     Action prev_action, const TestingSchedule& schedule, int horizon,
                                     int replicates, const RngStream& base) {
    const std::vector<PolicyThresholds> members = grid.enumerate();
    if (members.empty()) throw ValidationError("policy grid is empty");
    std::optional<OptimalPolicy> best;
    for (const PolicyThresholds& thr : members) {
        const double reward =
            evaluate_policy(thr, params, cost, start, prev_action, schedule, horizon, replicates, base);
        if (!best || reward > best->expected_reward) best = OptimalPolicy{thr, reward};
    }
    return *best;
}

/// Per-day average of the coupled trajectory over replicates, with the
/// per-day modal action (ties resolved toward the lower level).
struct MeanTrajectoryPoint {
    int day = 0;
    Action action = Action::release;
    double s = 0, l = 0, i_m = 0, i_s = 0, r = 0, d = 0;
    double i_m_o = 0, i_s_o = 0, r_o = 0, d_o = 0;
};

inline std::vector<MeanTrajectoryPoint> simulate_policy_mean(
    const PolicyThresholds& thr, const ModelParams& params, const CostConfig& cost,
    const CoupledState& start, Action prev_action, const TestingSchedule& schedule, int horizon,
    int replicates, const RngStream& base) {
    if (replicates < 1) throw ValidationError("replicates must be >= 1");
    const std::size_t n_days = static_cast<std::size_t>(horizon - start.pop.day) + 1;
    std::vector<MeanTrajectoryPoint> mean(n_days);
    std::vector<std::array<int, 3>> action_votes(n_days, {0, 0, 0});

    for (int j = 0; j < replicates; ++j) {
        const PolicyRollout roll = rollout_policy(thr, params, cost, start, prev_action, schedule,
                                                  horizon, base.sub(static_cast<std::uint64_t>(j)));
        for (std::size_t i = 0; i < n_days; ++i) {
            const CoupledState& st = roll.path[i];
            MeanTrajectoryPoint& m = mean[i];
            m.s += st.pop.s;
            m.l += st.pop.l;
            m.i_m += st.pop.i_m;
            m.i_s += st.pop.i_s;
            m.r += st.pop.r;
            m.d += st.pop.d;
            m.i_m_o += st.obs.i_m_o;
            m.i_s_o += st.obs.i_s_o;
            m.r_o += st.obs.r_o;
            m.d_o += st.obs.d_o;
            action_votes[i][static_cast<std::size_t>(action_level(roll.actions[i]))] += 1;
        }
    }
    for (std::size_t i = 0; i < n_days; ++i) {
        MeanTrajectoryPoint& m = mean[i];
        m.day = start.pop.day + static_cast<int>(i);
        const double denom = static_cast<double>(replicates);
        m.s /= denom;
        m.l /= denom;
        m.i_m /= denom;
        m.i_s /= denom;
        m.r /= denom;
        m.d /= denom;
        m.i_m_o /= denom;
        m.i_s_o /= denom;
        m.r_o /= denom;
        m.d_o /= denom;
        int mode = 0;
        for (int level = 1; level < 3; ++level)
            if (action_votes[i][static_cast<std::size_t>(level)] > action_votes[i][static_cast<std::size_t>(mode)])
                mode = level;
        m.action = action_from_level(mode);
    }
    return mean;
}

} // namespace seird
