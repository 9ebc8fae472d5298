#pragma once

#include "seird/common.hpp"

#include <string>

namespace seird {

/// Lockdown level in force for a day. Encoded 0/1/2 in files and formulas.
enum class Action : int {
    release = 0, ///< no lockdown
    partial = 1, ///< partial lockdown
    full    = 2, ///< full lockdown
};

inline int action_level(Action a) { return static_cast<int>(a); }

inline Action action_from_level(int level) {
    if (level < 0 || level > 2)
        throw ValidationError("action level must be 0, 1 or 2, got " + std::to_string(level));
    return static_cast<Action>(level);
}

/// Hidden (population) compartment counts at the end of one day.
/// The compartment sum is conserved by every transition.
struct PopulationState {
    count_t s = 0;   ///< susceptible
    count_t l = 0;   ///< latent: infected, not yet infectious
    count_t i_m = 0; ///< mildly infected
    count_t i_s = 0; ///< severely infected
    count_t r = 0;   ///< recovered (terminal)
    count_t d = 0;   ///< deceased (terminal)
    int day = 1;

    count_t total() const { return s + l + i_m + i_s + r + d; }
    count_t infected() const { return i_m + i_s; }
};

/// Documented counts: the subset of the population process that has been
/// confirmed by testing. Fed by imports from the undocumented pools.
struct ObservedState {
    count_t i_m_o = 0;
    count_t i_s_o = 0;
    count_t r_o = 0;
    count_t d_o = 0;
    int day = 1;

    count_t active() const { return i_m_o + i_s_o; }
};

inline void check_state(const PopulationState& x) {
    if (x.s < 0 || x.l < 0 || x.i_m < 0 || x.i_s < 0 || x.r < 0 || x.d < 0)
        throw ValidationError("population state has a negative compartment at day " +
                              std::to_string(x.day));
}

inline void check_state(const ObservedState& x) {
    if (x.i_m_o < 0 || x.i_s_o < 0 || x.r_o < 0 || x.d_o < 0)
        throw ValidationError("observed state has a negative compartment at day " +
                              std::to_string(x.day));
}

} // namespace seird
