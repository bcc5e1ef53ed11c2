#ifndef ETAD_FORWARDING_HPP
#define ETAD_FORWARDING_HPP

#include <optional>
#include <string>
#include <vector>

#include "etad/distmodel.hpp"

namespace etad {

// Probability that the token sits at distance i from the true source at
// step t; probs has length t and sums to 1.
struct TargetState {
    int t = 0;
    std::vector<double> probs;
};

// Per-distance pass probabilities p_t(h), h in 0..t-1. Fully determines the
// bidiagonal column-stochastic step matrix: mass at h either stays or moves
// to h+1.
struct TransitionMatrix {
    int t = 0;
    std::vector<double> p;
};

// One unsatisfiable step: moving the prefix mass through index i at step t
// would need pass probability `required` outside [0, 1].
struct Violation {
    int t = 0;
    int i = 0;
    double required = 0.0;
};

struct ForwardingSchedule {
    int T = 0;
    std::vector<std::vector<double>> per_step; // index t-1 holds p_t, t = 1..T-1
    std::vector<double> combined;              // index t-1 holds scalar p_t
    bool smoothed = false;
    double deviation = 0.0; // total variation between achieved and ideal final state

    std::string to_json() const;
    static ForwardingSchedule from_json(std::string_view text);
};

// Renormalizes the first t masses of f. pre: 1 <= t <= f.support().
TargetState target_state(const DiscreteDistribution& f, int t);

// Indices where the exact solution leaves [0, 1] for the step t -> t+1.
// States beyond f's support are padded with zero mass.
std::vector<Violation> check_feasibility(const DiscreteDistribution& f, int t);
std::vector<Violation> check_feasibility_all(const DiscreteDistribution& f, int T);

struct ScheduleOutcome {
    std::optional<ForwardingSchedule> schedule; // set iff violations empty
    std::vector<Violation> violations;
};

// Exact pass probabilities mapping each target state onto the next.
// pre: T >= 2.
ScheduleOutcome ideal_probabilities(const DiscreteDistribution& f, int T);

// Backward correction of unreachable target states. The final state is never
// modified; earlier states get the minimum mass increases required, then are
// renormalized and projected back onto the reachable region. A feasible input
// comes back unchanged.
std::vector<TargetState> smooth_targets(const DiscreteDistribution& f, int T);

// Same pass over an explicit state sequence (states[t-1] has length t);
// idempotent, and the identity on feasible sequences.
std::vector<std::vector<double>> smooth_state_sequence(std::vector<std::vector<double>> states);

// Schedule through the smoothed states; `smoothed` flags whether any state
// actually changed.
ForwardingSchedule smoothed_probabilities(const DiscreteDistribution& f, int T);

// Single forwarding probability: the state-weighted mean of the per-distance
// probabilities.
double combined_probability(const TargetState& state, const TransitionMatrix& m);

// One Markov step; output has length t+1 and sums to 1.
TargetState evolve(const TargetState& state, const TransitionMatrix& m);

// Pass probability of the original tree-based protocol.
// pre: degree >= 2, t >= 1, 1 <= h <= ceil(t/2).
double eq2_baseline(int degree, int t, int h);

// Internals shared with tests: states derived pairwise.
std::vector<Violation> pair_violations(const std::vector<double>& cur,
                                       const std::vector<double>& next, int t);
std::vector<double> pair_probabilities(const std::vector<double>& cur,
                                       const std::vector<double>& next);

} // namespace etad

#endif
