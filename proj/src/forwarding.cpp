#include "etad/forwarding.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "etad/errors.hpp"
#include "etad/stats.hpp"

namespace etad {

using nlohmann::json;

namespace {

constexpr double kFeasTol = 1e-12; // violations below this are float noise

// Padded mass lookup: distances beyond the support carry zero mass.
double mass_at(const DiscreteDistribution& f, size_t i) {
    return i < f.mass.size() ? f.mass[i] : 0.0;
}

// First t masses renormalized; t may exceed the support (zero padding).
std::vector<double> padded_state(const DiscreteDistribution& f, int t) {
    std::vector<double> probs(static_cast<size_t>(t), 0.0);
    double sum = 0.0;
    for (int i = 0; i < t; ++i) sum += mass_at(f, static_cast<size_t>(i));
    if (!(sum > 0.0)) throw parameter_error("target state: no mass in the first steps");
    for (int i = 0; i < t; ++i) probs[static_cast<size_t>(i)] = mass_at(f, static_cast<size_t>(i)) / sum;
    return probs;
}

} // namespace

TargetState target_state(const DiscreteDistribution& f, int t) {
    if (t < 1 || static_cast<size_t>(t) > f.support())
        throw parameter_error("target_state: t outside the distribution support");
    return {t, padded_state(f, t)};
}

std::vector<double> pair_probabilities(const std::vector<double>& cur,
                                       const std::vector<double>& next) {
    assert(next.size() == cur.size() + 1);
    std::vector<double> p(cur.size(), 0.0);
    double prefix = 0.0;
    for (size_t i = 0; i < cur.size(); ++i) {
        prefix += cur[i] - next[i];
        if (cur[i] <= kFeasTol) {
            p[i] = 0.0; // no mass to move through this distance
            continue;
        }
        p[i] = std::clamp(prefix / cur[i], 0.0, 1.0);
    }
    return p;
}

std::vector<Violation> pair_violations(const std::vector<double>& cur,
                                       const std::vector<double>& next, int t) {
    std::vector<Violation> out;
    double prefix = 0.0;
    for (size_t i = 0; i < cur.size(); ++i) {
        prefix += cur[i] - next[i];
        if (cur[i] <= kFeasTol) {
            if (std::fabs(prefix) > kFeasTol)
                out.push_back({t, static_cast<int>(i), std::numeric_limits<double>::infinity()});
            continue;
        }
        double required = prefix / cur[i];
        if (required < -kFeasTol || required > 1.0 + kFeasTol)
            out.push_back({t, static_cast<int>(i), required});
    }
    return out;
}

std::vector<Violation> check_feasibility(const DiscreteDistribution& f, int t) {
    if (t < 2) throw parameter_error("check_feasibility: t must be >= 2");
    // The step t maps the state of length t onto length t+1. The ratio
    // condition at distance 0 holds by construction for prefix-renormalized
    // states; it is covered by the same prefix bound below.
    std::vector<double> cur = padded_state(f, t);
    std::vector<double> next = padded_state(f, t + 1);
    return pair_violations(cur, next, t);
}

std::vector<Violation> check_feasibility_all(const DiscreteDistribution& f, int T) {
    if (T < 2) throw parameter_error("check_feasibility_all: T must be >= 2");
    std::vector<Violation> all;
    for (int t = 2; t < T; ++t) {
        auto v = check_feasibility(f, t);
        all.insert(all.end(), v.begin(), v.end());
    }
    return all;
}

namespace {

ForwardingSchedule schedule_from_states(const std::vector<std::vector<double>>& states, int T,
                                        bool smoothed, const std::vector<double>& ideal_final) {
    ForwardingSchedule s;
    s.T = T;
    s.smoothed = smoothed;
    for (int t = 1; t < T; ++t) {
        auto p = pair_probabilities(states[static_cast<size_t>(t - 1)],
                                    states[static_cast<size_t>(t)]);
        TargetState st{t, states[static_cast<size_t>(t - 1)]};
        TransitionMatrix m{t, p};
        s.combined.push_back(combined_probability(st, m));
        s.per_step.push_back(std::move(p));
    }
    // Achieved final state by composing the matrices from the start.
    TargetState run{1, {1.0}};
    for (int t = 1; t < T; ++t)
        run = evolve(run, {t, s.per_step[static_cast<size_t>(t - 1)]});
    s.deviation = smoothed ? total_variation(run.probs, ideal_final) : 0.0;
    return s;
}

} // namespace

ScheduleOutcome ideal_probabilities(const DiscreteDistribution& f, int T) {
    if (T < 2) throw parameter_error("ideal_probabilities: T must be >= 2");
    ScheduleOutcome out;
    std::vector<std::vector<double>> states;
    for (int t = 1; t <= T; ++t) states.push_back(padded_state(f, t));
    for (int t = 1; t < T; ++t) {
        auto v = pair_violations(states[static_cast<size_t>(t - 1)], states[static_cast<size_t>(t)], t);
        out.violations.insert(out.violations.end(), v.begin(), v.end());
    }
    if (!out.violations.empty()) return out;
    out.schedule = schedule_from_states(states, T, false, states.back());
    return out;
}

std::vector<TargetState> smooth_targets(const DiscreteDistribution& f, int T) {
    if (T < 2) throw parameter_error("smooth_targets: T must be >= 2");
    std::vector<std::vector<double>> states;
    for (int t = 1; t <= T; ++t) states.push_back(padded_state(f, t));
    states = smooth_state_sequence(std::move(states));
    std::vector<TargetState> out;
    for (int t = 1; t <= T; ++t)
        out.push_back({t, states[static_cast<size_t>(t - 1)]});
    return out;
}

std::vector<std::vector<double>> smooth_state_sequence(std::vector<std::vector<double>> states) {
    const int T = static_cast<int>(states.size());
    if (T < 2) throw parameter_error("smooth_state_sequence: need at least two states");
    for (int t = 1; t <= T; ++t)
        if (states[static_cast<size_t>(t - 1)].size() != static_cast<size_t>(t))
            throw parameter_error("smooth_state_sequence: state t must have length t");

    // Backward pass, final state untouched. For the pair (state_t, state_{t+1})
    // the exact solution stays in [0, 1] iff for every suffix start a:
    //   suffix(state_t, a) >= suffix(next, a+1)   (enough mass to push out)
    //   suffix(state_t, a) <= suffix(next, a)     (outward moves only)
    for (int t = T - 1; t >= 2; --t) {
        std::vector<double>& cur = states[static_cast<size_t>(t - 1)];
        const std::vector<double>& next = states[static_cast<size_t>(t)];
        const size_t len = cur.size();
        const std::vector<double> base = cur;

        // Suffix sums of the next state; g_suffix[a] = sum_{j >= a} next[j].
        std::vector<double> g_suffix(next.size() + 1, 0.0);
        for (size_t a = next.size(); a-- > 0;) g_suffix[a] = g_suffix[a + 1] + next[a];

        // Minimum-increase pass, top index first. chi tracks the mass already
        // added to later entries; delta is the remaining shortfall at i.
        std::vector<bool> modified(len, false);
        for (size_t i = len; i-- > 0;) {
            double later_cur = 0.0; // sum of cur[j], j > i (already adjusted)
            double later_base = 0.0;
            for (size_t j = i + 1; j < len; ++j) {
                later_cur += cur[j];
                later_base += base[j];
            }
            double chi = later_base - later_cur;
            double delta = g_suffix[i + 1] - later_cur - base[i];
            double add = std::max({chi, delta, 0.0});
            if (add > 0.0) {
                cur[i] = base[i] + add;
                modified[i] = true;
            }
        }

        // Restore sum 1 by scaling the untouched entries.
        double mod_sum = 0.0, un_sum = 0.0;
        for (size_t i = 0; i < len; ++i) (modified[i] ? mod_sum : un_sum) += cur[i];
        if (un_sum > 0.0) {
            double target = std::max(1.0 - mod_sum, 0.0);
            double scale = target / un_sum;
            for (size_t i = 0; i < len; ++i)
                if (!modified[i]) cur[i] *= scale;
        }

        // Scaling can undo an enforced bound, so project the suffix sums onto
        // the reachable box [g_suffix[a+1], g_suffix[a]]; the intervals nest,
        // which keeps entries nonnegative and the total exactly 1.
        std::vector<double> suffix(len + 1, 0.0);
        for (size_t a = len; a-- > 0;) suffix[a] = suffix[a + 1] + cur[a];
        double total = suffix[0];
        if (total > 0.0 && std::fabs(total - 1.0) > 1e-15)
            for (size_t a = 0; a <= len; ++a) suffix[a] /= total;
        suffix[0] = 1.0;
        for (size_t a = 1; a < len; ++a)
            suffix[a] = std::clamp(suffix[a], g_suffix[a + 1], g_suffix[a]);
        for (size_t i = 0; i < len; ++i) cur[i] = suffix[i] - suffix[i + 1];
    }
    return states;
}

ForwardingSchedule smoothed_probabilities(const DiscreteDistribution& f, int T) {
    std::vector<TargetState> adjusted = smooth_targets(f, T);
    bool changed = false;
    for (const TargetState& st : adjusted) {
        std::vector<double> ideal = padded_state(f, st.t);
        if (total_variation(st.probs, ideal) > 1e-12) { changed = true; break; }
    }
    std::vector<std::vector<double>> states;
    for (TargetState& st : adjusted) states.push_back(std::move(st.probs));
    return schedule_from_states(states, T, changed, padded_state(f, T));
}

double combined_probability(const TargetState& state, const TransitionMatrix& m) {
    if (state.probs.size() != m.p.size())
        throw parameter_error("combined_probability: length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < m.p.size(); ++i) acc += state.probs[i] * m.p[i];
    return std::clamp(acc, 0.0, 1.0);
}

TargetState evolve(const TargetState& state, const TransitionMatrix& m) {
    if (state.probs.size() != m.p.size()) throw parameter_error("evolve: length mismatch");
    const size_t t = state.probs.size();
    std::vector<double> out(t + 1, 0.0);
    for (size_t i = 0; i < t; ++i) {
        out[i] += (1.0 - m.p[i]) * state.probs[i];
        out[i + 1] += m.p[i] * state.probs[i];
    }
    return {state.t + 1, std::move(out)};
}

double eq2_baseline(int degree, int t, int h) {
    if (degree < 2) throw parameter_error("eq2_baseline: degree must be >= 2");
    if (t < 1) throw parameter_error("eq2_baseline: t must be >= 1");
    // h runs to the zero boundary t/2 + 1, where both branches vanish
    int h_max = (t + 2) / 2;
    if (h < 1 || h > h_max) throw parameter_error("eq2_baseline: h outside [1, t/2 + 1]");
    double v;
    if (degree == 2) {
        v = static_cast<double>(t - 2 * h + 2) / static_cast<double>(t + 2);
    } else {
        double dm1 = degree - 1;
        double num = std::pow(dm1, t / 2.0 - h + 1.0) - 1.0;
        double den = std::pow(dm1, t / 2.0 + 1.0) - 1.0;
        v = num / den;
    }
    return std::clamp(v, 0.0, 1.0);
}

std::string ForwardingSchedule::to_json() const {
    json j;
    j["T"] = T;
    j["per_step"] = per_step;
    j["combined"] = combined;
    j["smoothed"] = smoothed;
    j["deviation"] = deviation;
    return j.dump(2) + "\n";
}

ForwardingSchedule ForwardingSchedule::from_json(std::string_view text) {
    json j = json::parse(text);
    ForwardingSchedule s;
    s.T = j.at("T").get<int>();
    s.per_step = j.at("per_step").get<std::vector<std::vector<double>>>();
    s.combined = j.at("combined").get<std::vector<double>>();
    s.smoothed = j.at("smoothed").get<bool>();
    s.deviation = j.at("deviation").get<double>();
    return s;
}

} // namespace etad
