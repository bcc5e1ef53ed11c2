#include "etad/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "etad/distmodel.hpp"
#include "etad/errors.hpp"
#include "etad/forwarding.hpp"

namespace etad {

using nlohmann::json;

std::string trace_kind_name(TraceKind k) {
    switch (k) {
    case TraceKind::send: return "send";
    case TraceKind::receive: return "receive";
    case TraceKind::token_pass: return "token-pass";
    case TraceKind::keep: return "keep";
    case TraceKind::flood_start: return "flood-start";
    case TraceKind::timeout: return "timeout";
    case TraceKind::retransmit: return "retransmit";
    }
    return "?";
}

std::string msg_variant_name(MsgVariant v) {
    switch (v) {
    case MsgVariant::spread: return "spread";
    case MsgVariant::token: return "token";
    case MsgVariant::flood: return "flood";
    }
    return "?";
}

std::string EventTrace::to_csv() const {
    std::ostringstream out;
    out << "time,actor,kind,message,peer\n";
    char buf[160];
    for (const TraceEvent& e : events) {
        std::snprintf(buf, sizeof buf, "%.6f,%d,%s,%016llx,%d\n", e.time, e.actor,
                      trace_kind_name(e.kind).c_str(),
                      static_cast<unsigned long long>(e.msg), e.peer);
        out << buf;
    }
    return out.str();
}

std::string schedule_source_name(ScheduleSource s) {
    switch (s) {
    case ScheduleSource::ideal: return "ideal";
    case ScheduleSource::smoothed: return "smoothed";
    case ScheduleSource::eq2: return "eq2";
    case ScheduleSource::fixed: return "fixed";
    }
    return "?";
}

ScheduleSource schedule_source_from_string(std::string_view name) {
    if (name == "ideal") return ScheduleSource::ideal;
    if (name == "smoothed") return ScheduleSource::smoothed;
    if (name == "eq2") return ScheduleSource::eq2;
    if (name == "fixed") return ScheduleSource::fixed;
    throw parameter_error("unknown schedule source: " + std::string(name));
}

std::string SimConfig::to_json() const {
    json j;
    j["n"] = n;
    j["k"] = k;
    j["graph_seed"] = graph_seed;
    j["eta"] = eta;
    j["depth"] = depth;
    j["anonymity_target"] = anonymity_target;
    if (origin) j["origin"] = *origin;
    j["latency_median"] = latency_median;
    j["latency_sigma"] = latency_sigma;
    j["timeout_multiplier"] = timeout_multiplier;
    j["schedule_source"] = schedule_source_name(schedule_source);
    j["fixed_p"] = fixed_p;
    j["epsilon"] = epsilon;
    j["seed"] = seed;
    j["failed_nodes"] = failed_nodes;
    return j.dump(2);
}

SimConfig SimConfig::from_json(std::string_view text) {
    json j = json::parse(text);
    SimConfig c;
    c.n = j.value("n", 0u);
    c.k = j.value("k", 0u);
    c.graph_seed = j.value("graph_seed", uint64_t{1});
    c.eta = j.value("eta", 3u);
    c.depth = j.value("depth", 0u);
    c.anonymity_target = j.value("anonymity_target", 0.0);
    if (j.contains("origin")) c.origin = j["origin"].get<uint32_t>();
    c.latency_median = j.value("latency_median", 0.05);
    c.latency_sigma = j.value("latency_sigma", 0.25);
    c.timeout_multiplier = j.value("timeout_multiplier", 20.0);
    c.schedule_source =
        schedule_source_from_string(j.value("schedule_source", std::string("smoothed")));
    c.fixed_p = j.value("fixed_p", 1.0);
    c.epsilon = j.value("epsilon", 1e-6);
    c.seed = j.value("seed", uint64_t{1});
    if (j.contains("failed_nodes")) c.failed_nodes = j["failed_nodes"].get<std::vector<uint32_t>>();
    return c;
}

uint64_t message_digest(std::string_view payload) {
    uint64_t h = 0xcbf29ce484222325ull; // FNV-1a
    for (unsigned char c : payload) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t tree_enrollment_bound(uint32_t eta, uint32_t depth) {
    if (depth < 1) return 1;
    uint64_t sum = 0, level = 1;
    for (uint32_t i = 0; i + 2 <= depth; ++i) {
        sum += level;
        if (level > (1ull << 48)) break; // saturate, callers only compare
        level *= eta;
    }
    return 1 + (static_cast<uint64_t>(eta) + 1) * sum;
}

uint32_t derive_depth(uint32_t eta, double target) {
    uint32_t d = 2;
    while (d < 1000 && static_cast<double>(tree_enrollment_bound(eta, d)) < target) ++d;
    return d;
}

// -------------------------------------------------------------- Simulation

Simulation::Simulation(const Graph& g, SimConfig cfg)
    : graph_(g), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    const uint32_t n = graph_.node_count();
    if (n < 2) throw parameter_error("simulation: graph needs at least 2 nodes");
    if (cfg_.eta < 1) throw parameter_error("simulation: eta must be >= 1");
    if (!(cfg_.timeout_multiplier > 1.0))
        throw parameter_error("simulation: timeout multiplier must exceed 1");
    if (!(cfg_.latency_median > 0.0))
        throw parameter_error("simulation: latency median must be positive");

    depth_ = cfg_.depth;
    if (depth_ == 0) {
        double target = cfg_.anonymity_target > 0.0 ? cfg_.anonymity_target : n / 10.0;
        depth_ = derive_depth(cfg_.eta, target);
    }
    if (depth_ < 1) throw parameter_error("simulation: depth must be >= 1");

    if (cfg_.origin) {
        if (*cfg_.origin >= n) throw parameter_error("simulation: origin out of range");
        origin_ = *cfg_.origin;
    } else {
        origin_ = static_cast<uint32_t>(rng_.below(n));
    }

    // Pass probabilities for decision steps t = 2 .. depth-1.
    p_by_t_.assign(depth_ + 1, 0.0);
    if (depth_ >= 3) {
        switch (cfg_.schedule_source) {
        case ScheduleSource::fixed:
            for (uint32_t t = 2; t < depth_; ++t) p_by_t_[t] = cfg_.fixed_p;
            break;
        case ScheduleSource::eq2:
            for (uint32_t t = 2; t < depth_; ++t) {
                int ti = static_cast<int>(t);
                p_by_t_[t] = eq2_baseline(static_cast<int>(cfg_.eta) + 1, ti, (ti + 1) / 2);
            }
            break;
        case ScheduleSource::ideal:
        case ScheduleSource::smoothed: {
            uint32_t kk = graph_.edges_per_join();
            if (kk < 1)
                throw config_error("simulation: graph carries no k; use a fixed or eq2 schedule");
            NormalParams np{estimate_mu(n, kk), estimate_sigma(n, kk)};
            DiscreteDistribution f = discretize(np, n, kk, cfg_.epsilon);
            int T = static_cast<int>(depth_);
            if (cfg_.schedule_source == ScheduleSource::ideal) {
                ScheduleOutcome oc = ideal_probabilities(f, T);
                if (!oc.schedule)
                    throw config_error(
                        "simulation: ideal schedule infeasible and smoothing disabled");
                for (uint32_t t = 2; t < depth_; ++t) p_by_t_[t] = oc.schedule->combined[t - 1];
            } else {
                ForwardingSchedule s = smoothed_probabilities(f, T);
                for (uint32_t t = 2; t < depth_; ++t) p_by_t_[t] = s.combined[t - 1];
            }
            break;
        }
        }
    }

    failed_.assign(n, false);
    for (uint32_t v : cfg_.failed_nodes) {
        if (v >= n) throw parameter_error("simulation: failed node out of range");
        failed_[v] = true;
    }
    states_.assign(n, NodeState{});
    first_contact_.assign(n, MsgVariant::spread);
    contacted_.assign(n, false);

    std::string payload = "m" + std::to_string(cfg_.seed) + ":" + std::to_string(origin_);
    msg_id_ = message_digest(payload);
}

double Simulation::pass_probability(int32_t t) const {
    if (t < 0 || static_cast<size_t>(t) >= p_by_t_.size()) return 0.0;
    return p_by_t_[static_cast<size_t>(t)];
}

double Simulation::draw_latency() {
    if (cfg_.latency_sigma <= 0.0) return cfg_.latency_median;
    return rng_.lognormal(cfg_.latency_median, cfg_.latency_sigma);
}

void Simulation::schedule(double time, EvKind kind, uint32_t a, uint32_t b, int32_t t,
                          uint64_t gen) {
    queue_.push(Event{time, next_seq_++, kind, a, b, t, gen});
}

void Simulation::record(TraceKind kind, int32_t actor, int32_t peer, MsgVariant variant,
                        int32_t token_t) {
    trace_.push_back(TraceEvent{now_, actor, kind, msg_id_, peer, variant, token_t});
}

void Simulation::send_message(MsgVariant v, uint32_t from, uint32_t to, int32_t t) {
    record(TraceKind::send, static_cast<int32_t>(from), static_cast<int32_t>(to), v, t);
    double latency = draw_latency();
    if (failed_[to]) return; // receiver is down; the message vanishes
    EvKind kind = v == MsgVariant::spread  ? EvKind::deliver_spread
                  : v == MsgVariant::token ? EvKind::deliver_token
                                           : EvKind::deliver_flood;
    schedule(now_ + latency, kind, to, from, t);
}

void Simulation::select_gamma(uint32_t node, uint32_t exclude) {
    NodeState& st = states_[node];
    auto nbrs = graph_.neighbors(node);
    std::vector<uint32_t> pool;
    pool.reserve(nbrs.size());
    for (uint32_t v : nbrs)
        if (v != exclude) pool.push_back(v);
    uint32_t want = std::min<uint32_t>(cfg_.eta, static_cast<uint32_t>(pool.size()));
    st.gamma.clear();
    for (uint32_t i = 0; i < want; ++i) {
        uint32_t j = i + static_cast<uint32_t>(rng_.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        st.gamma.push_back(pool[i]);
    }
    st.gamma_set = true;
}

void Simulation::bootstrap_state(uint32_t node, uint32_t from) {
    NodeState& st = states_[node];
    if (!st.gamma_set) {
        select_gamma(node, from);
        st.predecessor = from;
        st.has_predecessor = true;
    }
}

void Simulation::arm_timer(uint32_t node) {
    NodeState& st = states_[node];
    st.timer_armed = true;
    ++st.timer_generation;
    double duration = cfg_.timeout_multiplier * cfg_.latency_median;
    schedule(now_ + duration, EvKind::timer, node, 0, 0, st.timer_generation);
}

void Simulation::extend_timer(uint32_t node) {
    NodeState& st = states_[node];
    if (st.timer_armed) arm_timer(node); // fresh deadline, stale event ignored
}

void Simulation::cancel_timer(uint32_t node) {
    NodeState& st = states_[node];
    st.timer_armed = false;
    ++st.timer_generation;
}

void Simulation::on_spread(uint32_t from, uint32_t to) {
    record(TraceKind::receive, static_cast<int32_t>(to), static_cast<int32_t>(from),
           MsgVariant::spread, -1);
    NodeState& st = states_[to];
    st.seen = true;
    if (!contacted_[to]) {
        contacted_[to] = true;
        first_contact_[to] = MsgVariant::spread;
    }
    extend_timer(to);
    if (!st.gamma_set) {
        bootstrap_state(to, from); // first receipt: enroll, remember the path, stay quiet
    } else if (st.has_predecessor && st.predecessor == from) {
        for (uint32_t v : st.gamma) send_message(MsgVariant::spread, to, v, -1);
    }
    // other senders are parallel paths; reacting would skew the spread
}

void Simulation::on_token(uint32_t from, uint32_t to, int32_t t) {
    record(TraceKind::receive, static_cast<int32_t>(to), static_cast<int32_t>(from),
           MsgVariant::token, t);
    NodeState& st = states_[to];
    st.seen = true;
    if (!contacted_[to]) {
        contacted_[to] = true;
        first_contact_[to] = MsgVariant::token;
    }
    bootstrap_state(to, from); // the token implies message delivery
    cancel_timer(to);
    st.loop_prev_vs = from;
    token_path_.push_back(to);

    // Balance the spread around the new holder. The doubled send makes the
    // just-enrolled neighbors forward immediately, catching this side of the
    // tree up with the rest.
    bool doubled = (t + 1 <= static_cast<int32_t>(depth_)) && t > 1;
    for (uint32_t v : st.gamma) {
        if (v == from) continue;
        send_message(MsgVariant::spread, to, v, -1);
        if (doubled) send_message(MsgVariant::spread, to, v, -1);
    }
    vs_decide(to, t, from);
}

void Simulation::vs_decide(uint32_t node, int32_t completed_t, uint32_t prev_vs) {
    NodeState& st = states_[node];
    int32_t t = completed_t + 1;
    if (t >= static_cast<int32_t>(depth_)) {
        start_flood(node);
        return;
    }
    double x = rng_.unit();
    if (x <= pass_probability(t)) {
        std::vector<uint32_t> candidates;
        for (uint32_t v : st.gamma)
            if (v != prev_vs) candidates.push_back(v);
        if (candidates.empty()) {
            ++degenerate_keeps_; // nowhere to move the token; fall through to a keep round
        } else {
            uint32_t succ = candidates[rng_.below(candidates.size())];
            record(TraceKind::token_pass, static_cast<int32_t>(node),
                   static_cast<int32_t>(succ), MsgVariant::token, t);
            st.tried_successors.assign(1, succ);
            st.sent_t = t;
            send_message(MsgVariant::token, node, succ, t);
            arm_timer(node);
            return;
        }
    }
    record(TraceKind::keep, static_cast<int32_t>(node), -1, MsgVariant::token, t);
    double wait = draw_latency(); // artificial delay, same family as link latency
    schedule(now_ + wait, EvKind::keep_round, node, prev_vs, t);
}

void Simulation::on_keep_round(uint32_t node, int32_t t, uint32_t prev_vs) {
    NodeState& st = states_[node];
    if (st.flood_seen) return; // a flood arrived while we were waiting
    for (uint32_t v : st.gamma) send_message(MsgVariant::spread, node, v, -1);
    if (st.has_predecessor) send_message(MsgVariant::spread, node, st.predecessor, -1);
    vs_decide(node, t, prev_vs);
}

void Simulation::start_flood(uint32_t node) {
    NodeState& st = states_[node];
    st.seen = true;
    st.flood_seen = true;
    cancel_timer(node);
    record(TraceKind::flood_start, static_cast<int32_t>(node), -1, MsgVariant::flood, -1);
    if (first_flood_time_ < 0.0) first_flood_time_ = now_;
    for (uint32_t v : graph_.neighbors(node)) send_message(MsgVariant::flood, node, v, -1);
}

void Simulation::on_flood(uint32_t from, uint32_t to) {
    record(TraceKind::receive, static_cast<int32_t>(to), static_cast<int32_t>(from),
           MsgVariant::flood, -1);
    NodeState& st = states_[to];
    st.seen = true;
    if (!contacted_[to]) {
        contacted_[to] = true;
        first_contact_[to] = MsgVariant::flood;
    }
    cancel_timer(to);
    if (st.flood_seen) return; // prune
    st.flood_seen = true;
    for (uint32_t v : graph_.neighbors(to))
        if (v != from) send_message(MsgVariant::flood, to, v, -1);
}

void Simulation::on_timer(uint32_t node, uint64_t gen) {
    NodeState& st = states_[node];
    if (!st.timer_armed || st.timer_generation != gen || st.flood_seen) return;
    st.timer_armed = false;
    record(TraceKind::timeout, static_cast<int32_t>(node), -1, MsgVariant::token, st.sent_t);

    std::vector<uint32_t> candidates;
    for (uint32_t v : st.gamma) {
        if (v == st.loop_prev_vs) continue;
        if (std::find(st.tried_successors.begin(), st.tried_successors.end(), v) !=
            st.tried_successors.end())
            continue;
        candidates.push_back(v);
    }
    if (!candidates.empty()) {
        uint32_t succ = candidates[rng_.below(candidates.size())];
        st.tried_successors.push_back(succ);
        record(TraceKind::retransmit, static_cast<int32_t>(node), static_cast<int32_t>(succ),
               MsgVariant::token, st.sent_t);
        send_message(MsgVariant::token, node, succ, st.sent_t);
        arm_timer(node);
    } else {
        // every selected neighbor refused; carry on as the virtual source
        vs_decide(node, st.sent_t, st.loop_prev_vs);
    }
}

void Simulation::dispatch(const Event& ev) {
    now_ = ev.time;
    switch (ev.kind) {
    case EvKind::deliver_spread: on_spread(ev.b, ev.a); break;
    case EvKind::deliver_token: on_token(ev.b, ev.a, ev.t); break;
    case EvKind::deliver_flood: on_flood(ev.b, ev.a); break;
    case EvKind::keep_round: on_keep_round(ev.a, ev.t, ev.b); break;
    case EvKind::timer: on_timer(ev.a, ev.gen); break;
    }
}

void Simulation::test_deliver_spread(uint32_t from, uint32_t to) { on_spread(from, to); }
void Simulation::test_deliver_token(uint32_t from, uint32_t to, int32_t t) {
    on_token(from, to, t);
}
void Simulation::test_deliver_flood(uint32_t from, uint32_t to) { on_flood(from, to); }

SimResult Simulation::run() {
    NodeState& src = states_[origin_];
    src.seen = true;
    contacted_[origin_] = true;
    first_contact_[origin_] = MsgVariant::token;
    token_path_.push_back(origin_);

    if (depth_ == 1) {
        start_flood(origin_);
    } else {
        auto nbrs = graph_.neighbors(origin_);
        uint32_t first_vs = nbrs[rng_.below(nbrs.size())];
        // The initiation is the first interaction for this message, so the
        // recipient doubles as the source's predecessor.
        select_gamma(origin_, first_vs);
        src.predecessor = first_vs;
        src.has_predecessor = true;
        record(TraceKind::token_pass, static_cast<int32_t>(origin_),
               static_cast<int32_t>(first_vs), MsgVariant::token, 1);
        send_message(MsgVariant::token, origin_, first_vs, 1);
    }

    while (!queue_.empty()) {
        Event ev = queue_.top();
        queue_.pop();
        dispatch(ev);
    }

    SimResult res;
    res.config = cfg_;
    res.depth_used = depth_;
    res.message_id = msg_id_;
    res.true_source = origin_;
    res.token_path = token_path_;
    for (uint32_t v = 0; v < graph_.node_count(); ++v)
        if (states_[v].seen) res.infected.push_back(v);
    uint32_t priv = 0;
    for (uint32_t v = 0; v < graph_.node_count(); ++v)
        if (contacted_[v] && first_contact_[v] != MsgVariant::flood) ++priv;
    res.privacy_infected = priv;
    res.first_flood_time = first_flood_time_;
    res.degenerate_keeps = degenerate_keeps_;
    res.pass_probability_by_t = p_by_t_;
    res.trace.events = std::move(trace_);
    return res;
}

SimResult run_simulation(const Graph& g, const SimConfig& cfg) {
    Simulation sim(g, cfg);
    return sim.run();
}

SimResult run_simulation(const SimConfig& cfg) {
    if (cfg.n < 2 || cfg.k < 1)
        throw parameter_error("run_simulation: need n >= 2 and k >= 1 to generate a graph");
    Graph g = Graph::generate_k_growing(cfg.n, cfg.k, cfg.graph_seed);
    return run_simulation(g, cfg);
}

std::string SimResult::summary_json() const {
    json j;
    j["config"] = json::parse(config.to_json());
    j["depth_used"] = depth_used;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "%016llx", static_cast<unsigned long long>(message_id));
    j["message_id"] = idbuf;
    j["true_source"] = true_source;
    j["token_path"] = token_path;
    j["token_path_length"] = token_path.empty() ? 0 : token_path.size() - 1;
    j["infected_count"] = infected.size();
    j["privacy_infected"] = privacy_infected;
    j["first_flood_time"] = first_flood_time;
    j["degenerate_keeps"] = degenerate_keeps;
    std::vector<double> p(pass_probability_by_t.begin(), pass_probability_by_t.end());
    j["pass_probability_by_t"] = p;
    j["trace_events"] = trace.events.size();
    return j.dump(2) + "\n";
}

} // namespace etad
