#pragma once

#include "seird/common.hpp"

#include <array>
#include <cmath>
#include <string>

namespace seird {

/// The five inter-compartment transition probabilities (the calibrated
/// vector). Order matches the fit/serialization layout throughout.
struct TransitionProbs {
    double l_to_im = 0.0;  ///< L -> Im, daily
    double im_to_is = 0.0; ///< Im -> Is, daily
    double im_to_r = 0.0;  ///< Im -> R, daily
    double is_to_r = 0.0;  ///< Is -> R, daily
    double is_to_d1 = 0.0; ///< Is -> D, daily, under-capacity value

    std::array<double, 5> as_array() const { return {l_to_im, im_to_is, im_to_r, is_to_r, is_to_d1}; }
};

/// Initial estimates matched to reported incubation/progression durations
/// (mean latent-to-mild delay of 5 days gives 0.2, and so on).
inline TransitionProbs default_initial_probs() {
    return TransitionProbs{0.2, 0.017, 0.024, 0.012, 0.009};
}

/// Validated model parameters: transition probabilities plus the reproduction
/// numbers per lockdown level, hospital capacity, and the over-capacity death
/// multiplier. Construction rejects any configuration whose multinomial
/// outflows could exceed 1, including in the over-capacity regime; invalid
/// values are an error, never clamped.
class ModelParams {
public:
    ModelParams(const TransitionProbs& probs, double r0_base, double r1, double r2,
                double death_multiplier, count_t cap)
        : probs_(probs), r0_base_(r0_base), r1_(r1), r2_(r2),
          death_multiplier_(death_multiplier), cap_(cap) {
        validate();
    }

    double p_l_im() const { return probs_.l_to_im; }
    double p_im_is() const { return probs_.im_to_is; }
    double p_im_r() const { return probs_.im_to_r; }
    double p_is_r() const { return probs_.is_to_r; }
    double p_is_d1() const { return probs_.is_to_d1; }
    const TransitionProbs& probs() const { return probs_; }

    double r0_base() const { return r0_base_; }
    double r1() const { return r1_; }
    double r2() const { return r2_; }
    double death_multiplier() const { return death_multiplier_; }
    count_t cap() const { return cap_; }

    /// Daily chance of leaving the mild compartment; its reciprocal is the
    /// mean dwell time in Im.
    double mild_outflow() const { return probs_.im_to_is + probs_.im_to_r; }

    /// Same reproduction/capacity configuration, different probability vector.
    ModelParams with_probs(const TransitionProbs& probs) const {
        return ModelParams(probs, r0_base_, r1_, r2_, death_multiplier_, cap_);
    }

private:
    void validate() const {
        auto probability = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError(std::string(name) + " must lie in [0,1], got " + std::to_string(p));
        };
        probability(probs_.l_to_im, "p_l_im");
        probability(probs_.im_to_is, "p_im_is");
        probability(probs_.im_to_r, "p_im_r");
        probability(probs_.is_to_r, "p_is_r");
        probability(probs_.is_to_d1, "p_is_d1");
        if (probs_.im_to_is + probs_.im_to_r > 1.0)
            throw ValidationError("mild outflow p_im_is + p_im_r exceeds 1");
        if (!(death_multiplier_ >= 1.0))
            throw ValidationError("death_multiplier must be >= 1, got " + std::to_string(death_multiplier_));
        // The severe outflow must stay a valid multinomial even when the
        // over-capacity death probability is in force.
        if (probs_.is_to_r + death_multiplier_ * probs_.is_to_d1 > 1.0)
            throw ValidationError("severe outflow p_is_r + death_multiplier*p_is_d1 exceeds 1");
        if (!(r0_base_ >= 0.0) || !std::isfinite(r0_base_))
            throw ValidationError("r0_base must be a finite non-negative number");
        if (!(r1_ > 0.0) || !(r2_ > r1_))
            throw ValidationError("reproduction increments must satisfy 0 < r1 < r2");
        if (cap_ < 0)
            throw ValidationError("cap must be non-negative");
    }

    TransitionProbs probs_;
    double r0_base_;
    double r1_;
    double r2_;
    double death_multiplier_;
    count_t cap_;
};

} // namespace seird
