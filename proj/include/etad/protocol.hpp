#ifndef ETAD_PROTOCOL_HPP
#define ETAD_PROTOCOL_HPP

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "etad/graph.hpp"
#include "etad/rng.hpp"

namespace etad {

enum class MsgVariant : uint8_t { spread, token, flood };
enum class TraceKind : uint8_t { send, receive, token_pass, keep, flood_start, timeout, retransmit };

std::string trace_kind_name(TraceKind k);
std::string msg_variant_name(MsgVariant v);

struct TraceEvent {
    double time = 0.0;
    int32_t actor = -1;
    TraceKind kind = TraceKind::send;
    uint64_t msg = 0;
    int32_t peer = -1;
    MsgVariant variant = MsgVariant::spread;
    int32_t token_t = -1; // timestep when variant == token, else -1
};

struct EventTrace {
    std::vector<TraceEvent> events;

    // Columns: time,actor,kind,message,peer
    std::string to_csv() const;
};

enum class ScheduleSource : uint8_t { ideal, smoothed, eq2, fixed };

std::string schedule_source_name(ScheduleSource s);
ScheduleSource schedule_source_from_string(std::string_view name);

struct SimConfig {
    uint32_t n = 0;
    uint32_t k = 0;
    uint64_t graph_seed = 1;

    uint32_t eta = 3;
    uint32_t depth = 0;            // 0 = derive from anonymity_target
    double anonymity_target = 0.0; // 0 = n / 10

    std::optional<uint32_t> origin; // unset = uniform random

    double latency_median = 0.05; // seconds
    double latency_sigma = 0.25;  // 0 gives deterministic latencies
    double timeout_multiplier = 20.0;

    ScheduleSource schedule_source = ScheduleSource::smoothed;
    double fixed_p = 1.0;
    double epsilon = 1e-6;

    uint64_t seed = 1;
    std::vector<uint32_t> failed_nodes; // receive nothing, send nothing

    std::string to_json() const;
    static SimConfig from_json(std::string_view text);
};

struct SimResult {
    SimConfig config;
    uint32_t depth_used = 0;
    uint64_t message_id = 0;
    uint32_t true_source = 0;
    std::vector<uint32_t> token_path;     // holders in order, starting at the source
    std::vector<uint32_t> infected;       // every node that saw the message
    uint32_t privacy_infected = 0;        // first contact was spread or token
    double first_flood_time = -1.0;
    uint32_t degenerate_keeps = 0;        // pass decisions with no eligible successor
    std::vector<double> pass_probability_by_t; // index t, valid for 2 <= t < depth
    EventTrace trace;

    std::string summary_json() const;
};

// Per-node protocol state for the single broadcast a run simulates.
struct NodeState {
    bool seen = false;
    bool gamma_set = false;
    bool has_predecessor = false;
    uint32_t predecessor = 0;
    std::vector<uint32_t> gamma; // selected neighbors, predecessor excluded

    bool flood_seen = false;

    // virtual-source bookkeeping
    uint32_t loop_prev_vs = 0;
    int32_t sent_t = -1;
    std::vector<uint32_t> tried_successors;
    bool timer_armed = false;
    uint64_t timer_generation = 0;
};

// Single-threaded deterministic event-queue simulator for the broadcast
// protocol: eta-limited spread with a wandering virtual source, artificial
// keeper latency, time-out retransmission, and a flood-and-prune completion
// phase.
class Simulation {
public:
    Simulation(const Graph& g, SimConfig cfg);

    SimResult run();

    // Direct delivery hooks for unit tests; they run the same handlers the
    // event loop uses and leave follow-up messages in the queue.
    void test_deliver_spread(uint32_t from, uint32_t to);
    void test_deliver_token(uint32_t from, uint32_t to, int32_t t);
    void test_deliver_flood(uint32_t from, uint32_t to);
    const NodeState& node(uint32_t v) const { return states_[v]; }
    const std::vector<TraceEvent>& trace_events() const { return trace_; }
    size_t pending_events() const { return queue_.size(); }

private:
    enum class EvKind : uint8_t { deliver_spread, deliver_token, deliver_flood, keep_round, timer };

    struct Event {
        double time;
        uint64_t seq;
        EvKind kind;
        uint32_t a; // node acting / recipient
        uint32_t b; // sender / previous virtual source
        int32_t t;
        uint64_t gen;
    };
    struct EventOrder {
        bool operator()(const Event& x, const Event& y) const {
            if (x.time != y.time) return x.time > y.time;
            return x.seq > y.seq;
        }
    };

    void schedule(double time, EvKind kind, uint32_t a, uint32_t b, int32_t t, uint64_t gen = 0);
    void dispatch(const Event& ev);

    void record(TraceKind kind, int32_t actor, int32_t peer, MsgVariant variant, int32_t token_t);
    void send_message(MsgVariant v, uint32_t from, uint32_t to, int32_t t);

    void select_gamma(uint32_t node, uint32_t exclude);
    void bootstrap_state(uint32_t node, uint32_t from);
    void extend_timer(uint32_t node);
    void arm_timer(uint32_t node);
    void cancel_timer(uint32_t node);

    void on_spread(uint32_t from, uint32_t to);
    void on_token(uint32_t from, uint32_t to, int32_t t);
    void on_flood(uint32_t from, uint32_t to);
    void on_keep_round(uint32_t node, int32_t t, uint32_t prev_vs);
    void on_timer(uint32_t node, uint64_t gen);

    void vs_decide(uint32_t node, int32_t completed_t, uint32_t prev_vs);
    void start_flood(uint32_t node);

    double pass_probability(int32_t t) const;
    double draw_latency();

    const Graph& graph_;
    SimConfig cfg_;
    Rng rng_;
    uint32_t depth_ = 0;
    uint64_t msg_id_ = 0;
    uint32_t origin_ = 0;
    std::vector<double> p_by_t_;
    std::vector<bool> failed_;
    std::vector<NodeState> states_;
    std::vector<TraceEvent> trace_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    double now_ = 0.0;
    uint64_t next_seq_ = 0;
    std::vector<uint32_t> token_path_;
    double first_flood_time_ = -1.0;
    uint32_t degenerate_keeps_ = 0;
    std::vector<MsgVariant> first_contact_;
    std::vector<bool> contacted_;
};

// Derives the depth, builds the pass-probability schedule, and drains the
// run to completion. Throws config_error when the requested schedule cannot
// be built (ideal source with unreachable target states, missing k).
SimResult run_simulation(const Graph& g, const SimConfig& cfg);
SimResult run_simulation(const SimConfig& cfg); // generates the graph first

// Smallest depth whose cycle-free enrollment count reaches the target.
uint32_t derive_depth(uint32_t eta, double target);

// Enrollment bound of a depth-d run: 1 + (eta+1) * sum_{i=0}^{d-2} eta^i.
uint64_t tree_enrollment_bound(uint32_t eta, uint32_t depth);

uint64_t message_digest(std::string_view payload);

} // namespace etad

#endif
