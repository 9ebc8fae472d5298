#pragma once

#include "seird/common.hpp"
#include "seird/compartments.hpp"
#include "seird/params.hpp"
#include "seird/rng.hpp"

#include <cmath>
#include <string>

namespace seird {

/// Reproduction number in force under the given lockdown level.
inline double effective_r0(const ModelParams& params, Action action) {
    switch (action) {
        case Action::full: return params.r0_base();
        case Action::partial: return params.r0_base() + params.r1();
        case Action::release: return params.r0_base() + params.r2();
    }
    throw ValidationError("invalid action");
}

/// Daily S -> L transition probability,
///   1 - exp(-R0_eff * (p_im_is + p_im_r) * i_m / n).
/// Monotone increasing in i_m and in the effective reproduction number,
/// and always < 1.
inline double s_to_l_prob(const ModelParams& params, Action action, count_t i_m, count_t n) {
    if (n <= 0) throw ValidationError("population size must be positive");
    const double rate = effective_r0(params, action) * params.mild_outflow() *
                        (static_cast<double>(i_m) / static_cast<double>(n));
    return -std::expm1(-rate);
}

/// Daily Is -> D probability. Dichotomous in hospital load: the base value
/// while the previous day's severe count is within capacity (boundary
/// inclusive), the multiplied value above it.
inline double is_to_d_prob(const ModelParams& params, count_t prev_severe) {
    return prev_severe <= params.cap() ? params.p_is_d1()
                                       : params.death_multiplier() * params.p_is_d1();
}

/// One day of inter-compartment movement in the population process.
struct PopulationFlows {
    count_t s_to_l = 0;
    count_t l_to_im = 0;
    count_t im_to_is = 0;
    count_t im_to_r = 0;
    count_t is_to_r = 0;
    count_t is_to_d = 0;
};

/// Draws the day's flows:
///   Y1 ~ Bin(S, P_{S->L}), Y2 ~ Bin(L, p_l_im),
///   (Y3, Y4) ~ Mult(Im; p_im_is, p_im_r),
///   (Y5, Y6) ~ Mult(Is; p_is_r, p_is_d) with p_is_d keyed on the previous
///   day's severe count.
inline PopulationFlows draw_population_flows(const PopulationState& x, const ModelParams& params,
                                             Action action, RngStream& rng) {
    PopulationFlows f;
    f.s_to_l = rng.binomial(x.s, s_to_l_prob(params, action, x.i_m, x.total()));
    f.l_to_im = rng.binomial(x.l, params.p_l_im());
    auto [y3, y4] = rng.multinomial2(x.i_m, params.p_im_is(), params.p_im_r());
    f.im_to_is = y3;
    f.im_to_r = y4;
    auto [y5, y6] = rng.multinomial2(x.i_s, params.p_is_r(), is_to_d_prob(params, x.i_s));
    f.is_to_r = y5;
    f.is_to_d = y6;
    return f;
}

inline PopulationState apply_flows(const PopulationState& x, const PopulationFlows& f) {
    PopulationState next;
    next.s = x.s - f.s_to_l;
    next.l = x.l + f.s_to_l - f.l_to_im;
    next.i_m = x.i_m + f.l_to_im - f.im_to_is - f.im_to_r;
    next.i_s = x.i_s + f.im_to_is - f.is_to_r - f.is_to_d;
    next.r = x.r + f.im_to_r + f.is_to_r;
    next.d = x.d + f.is_to_d;
    next.day = x.day + 1;
    check_state(next);
    return next;
}

/// Advances the population process by one day under the given action.
/// The compartment sum is conserved exactly; R and D never decrease.
inline PopulationState step_population(const PopulationState& x, const ModelParams& params,
                                       Action action, RngStream& rng) {
    return apply_flows(x, draw_population_flows(x, params, action, rng));
}

/// One day of movement in the observed process: internal transitions among
/// documented compartments plus testing imports from the undocumented pools.
struct ObservedFlows {
    count_t im_to_is = 0;
    count_t im_to_r = 0;
    count_t is_to_r = 0;
    count_t is_to_d = 0;
    count_t import_mild = 0;
    count_t import_severe = 0;
};

inline ObservedState apply_observed_flows(const ObservedState& o, const ObservedFlows& f) {
    ObservedState next;
    next.i_m_o = o.i_m_o - f.im_to_is - f.im_to_r + f.import_mild;
    next.i_s_o = o.i_s_o - f.is_to_r - f.is_to_d + f.im_to_is + f.import_severe;
    next.r_o = o.r_o + f.im_to_r + f.is_to_r;
    next.d_o = o.d_o + f.is_to_d;
    next.day = o.day + 1;
    check_state(next);
    return next;
}

/// Draws one day of the observed process. `pop_prev` is the population state
/// of the same day as `obs`; it supplies the undocumented testing pools and
/// the hospital load for the severe death probability. Throws if either pool
/// is negative (the pair is no longer a valid coupling).
inline ObservedFlows draw_observed_flows(const PopulationState& pop_prev, const ObservedState& obs,
                                         const ModelParams& params, double test_mild,
                                         double test_severe, RngStream& rng) {
    const count_t pool_mild = pop_prev.i_m - obs.i_m_o;
    const count_t pool_severe = pop_prev.i_s - obs.i_s_o;
    if (pool_mild < 0 || pool_severe < 0)
        throw ValidationError("coupling violation at day " + std::to_string(obs.day) +
                              ": observed count exceeds population count");
    ObservedFlows f;
    auto [z1, z2] = rng.multinomial2(obs.i_m_o, params.p_im_is(), params.p_im_r());
    f.im_to_is = z1;
    f.im_to_r = z2;
    auto [z3, z4] = rng.multinomial2(obs.i_s_o, params.p_is_r(), is_to_d_prob(params, pop_prev.i_s));
    f.is_to_r = z3;
    f.is_to_d = z4;
    f.import_mild = rng.binomial(pool_mild, test_mild);
    f.import_severe = rng.binomial(pool_severe, test_severe);
    return f;
}

inline ObservedState step_observed(const PopulationState& pop_prev, const ObservedState& obs,
                                   const ModelParams& params, double test_mild, double test_severe,
                                   RngStream& rng) {
    return apply_observed_flows(obs, draw_observed_flows(pop_prev, obs, params, test_mild, test_severe, rng));
}

/// Observed process anchored to real data: internal transitions are drawn as
/// in step_observed but the testing imports are replaced by the reported
/// daily new mild/severe cases. `severe_load` is the previous day's
/// population severe count, which keys the death probability.
inline ObservedState step_observed_anchored(const ObservedState& obs, const ModelParams& params,
                                            count_t new_mild, count_t new_severe,
                                            count_t severe_load, RngStream& rng) {
    if (new_mild < 0 || new_severe < 0)
        throw ValidationError("reported new-case imports must be non-negative");
    ObservedFlows f;
    auto [z1, z2] = rng.multinomial2(obs.i_m_o, params.p_im_is(), params.p_im_r());
    f.im_to_is = z1;
    f.im_to_r = z2;
    auto [z3, z4] = rng.multinomial2(obs.i_s_o, params.p_is_r(), is_to_d_prob(params, severe_load));
    f.is_to_r = z3;
    f.is_to_d = z4;
    f.import_mild = new_mild;
    f.import_severe = new_severe;
    return apply_observed_flows(obs, f);
}

/// Population and observed processes evolving together, same day.
struct CoupledState {
    PopulationState pop;
    ObservedState obs;
};

/// Advances a coupled pair by one day. The documented and undocumented
/// cohorts of each infected compartment are transitioned separately and the
/// population flow is their sum, which leaves the population process with
/// exactly the step_population distribution (binomial counts on partitioned
/// cohorts sum to the binomial on the whole). Testing imports are drawn from
/// the post-transition undocumented pools, so every observed compartment
/// stays <= its population counterpart on every path.
inline CoupledState step_coupled(const CoupledState& state, const ModelParams& params,
                                 Action action, double test_mild, double test_severe,
                                 RngStream& rng) {
    const PopulationState& x = state.pop;
    const ObservedState& o = state.obs;
    const count_t pool_mild = x.i_m - o.i_m_o;
    const count_t pool_severe = x.i_s - o.i_s_o;
    if (pool_mild < 0 || pool_severe < 0)
        throw ValidationError("coupling violation at day " + std::to_string(o.day) +
                              ": observed count exceeds population count");

    PopulationFlows pf;
    pf.s_to_l = rng.binomial(x.s, s_to_l_prob(params, action, x.i_m, x.total()));
    pf.l_to_im = rng.binomial(x.l, params.p_l_im());

    const double p_d = is_to_d_prob(params, x.i_s);
    ObservedFlows of;
    auto [z1, z2] = rng.multinomial2(o.i_m_o, params.p_im_is(), params.p_im_r());
    auto [u1, u2] = rng.multinomial2(pool_mild, params.p_im_is(), params.p_im_r());
    auto [z3, z4] = rng.multinomial2(o.i_s_o, params.p_is_r(), p_d);
    auto [u3, u4] = rng.multinomial2(pool_severe, params.p_is_r(), p_d);
    of.im_to_is = z1;
    of.im_to_r = z2;
    of.is_to_r = z3;
    of.is_to_d = z4;
    pf.im_to_is = z1 + u1;
    pf.im_to_r = z2 + u2;
    pf.is_to_r = z3 + u3;
    pf.is_to_d = z4 + u4;

    of.import_mild = rng.binomial(pool_mild - u1 - u2, test_mild);
    of.import_severe = rng.binomial(pool_severe - u3 - u4, test_severe);

    return CoupledState{apply_flows(x, pf), apply_observed_flows(o, of)};
}

} // namespace seird
