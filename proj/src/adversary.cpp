#include "etad/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "etad/errors.hpp"
#include "etad/rng.hpp"

namespace etad {

using nlohmann::json;

bool AttackerSet::contains(uint32_t v) const {
    return std::binary_search(members.begin(), members.end(), v);
}

AttackerSet uniform_attackers(uint32_t n, uint32_t count, uint64_t seed,
                              std::optional<uint32_t> exclude) {
    if (count >= n) throw parameter_error("uniform_attackers: need count < n");
    Rng rng(seed);
    std::vector<uint32_t> pool;
    pool.reserve(n);
    for (uint32_t v = 0; v < n; ++v)
        if (!exclude || *exclude != v) pool.push_back(v);
    if (count > pool.size()) throw parameter_error("uniform_attackers: pool too small");
    AttackerSet a;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t j = i + static_cast<uint32_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        a.members.push_back(pool[i]);
    }
    std::sort(a.members.begin(), a.members.end());
    a.beta = static_cast<double>(count) / static_cast<double>(n);
    return a;
}

Graph augment_with_connected_attacker(const Graph& g) {
    std::vector<std::pair<uint32_t, uint32_t>> edges = g.edge_list();
    uint32_t fresh = g.node_count();
    edges.reserve(edges.size() + fresh);
    for (uint32_t v = 0; v < fresh; ++v) edges.emplace_back(v, fresh);
    return Graph::from_edges(fresh + 1, edges, g.edges_per_join(), g.seed());
}

std::vector<Observation> attacker_observations(const EventTrace& trace, const AttackerSet& a) {
    std::vector<Observation> obs;
    for (const TraceEvent& e : trace.events) {
        if (e.kind != TraceKind::receive) continue;
        if (e.actor < 0 || !a.contains(static_cast<uint32_t>(e.actor))) continue;
        obs.push_back(Observation{static_cast<uint32_t>(e.actor), e.msg, e.time,
                                  static_cast<uint32_t>(e.peer), e.variant, e.token_t});
    }
    return obs;
}

AttackReport jordan_center_attack(const EventTrace& trace, const Graph& g, const AttackerSet& a,
                                  uint32_t true_source) {
    std::vector<Observation> obs = attacker_observations(trace, a);
    if (obs.empty()) throw no_data_error("jordan_center_attack: attackers saw nothing");

    // Dissemination-phase receipts are distinguishable by message type and
    // all count. Flood receipts are only informative through their arrival
    // order, so just the earliest one (with ties) anchors the estimate.
    double cutoff = std::numeric_limits<double>::infinity();
    for (const Observation& o : obs)
        if (o.variant == MsgVariant::flood) cutoff = std::min(cutoff, o.time);

    std::vector<uint32_t> estimate;
    size_t used = 0;
    for (const Observation& o : obs) {
        if (o.variant == MsgVariant::flood && o.time > cutoff) continue;
        ++used;
        estimate.push_back(o.observer);
        estimate.push_back(o.link); // the sender is known infected as well
    }
    std::sort(estimate.begin(), estimate.end());
    estimate.erase(std::unique(estimate.begin(), estimate.end()), estimate.end());

    // Minimum eccentricity over all nodes: the observed set is only a sample
    // of the infected set, so the source need not be inside it.
    std::vector<uint32_t> ecc = eccentricity_to_set(g, estimate);
    std::vector<uint32_t> candidates = jordan_center(g, estimate, /*widen_to_all=*/true);

    AttackReport rep;
    rep.candidates = candidates;
    rep.point_estimate = candidates.front();
    rep.true_source = true_source;
    rep.success = rep.point_estimate == true_source;
    rep.candidate_set_size = candidates.size();
    rep.observation_count = used;
    rep.cutoff_time = std::isfinite(cutoff) ? cutoff : -1.0;

    // Rank of the true source when all nodes are ordered by (ecc, id).
    uint32_t rank = 1;
    uint32_t src_ecc = ecc[true_source];
    for (uint32_t v = 0; v < g.node_count(); ++v) {
        if (v == true_source) continue;
        if (ecc[v] < src_ecc || (ecc[v] == src_ecc && v < true_source)) ++rank;
    }
    rep.rank = rank;
    return rep;
}

std::string AttackReport::to_json() const {
    json j;
    j["candidates"] = candidates;
    j["point_estimate"] = point_estimate;
    j["true_source"] = true_source;
    j["success"] = success;
    j["rank"] = rank;
    j["candidate_set_size"] = candidate_set_size;
    j["observation_count"] = observation_count;
    j["cutoff_time"] = cutoff_time;
    return j.dump(2) + "\n";
}

ThresholdResult deanonymization_threshold(uint64_t n, uint64_t a, double c) {
    if (!(c > 1.0)) throw parameter_error("deanonymization_threshold: c must exceed 1");
    if (a >= n) throw parameter_error("deanonymization_threshold: need a < n");
    double rest = static_cast<double>(n - a);
    ThresholdResult r;
    r.threshold = static_cast<uint32_t>(std::ceil(std::log(rest) / std::log(c) - 1e-12));
    r.deanonymized = std::log(rest) - static_cast<double>(a) * std::log(c) <= 0.0;
    return r;
}

namespace {

using big_float = boost::multiprecision::cpp_bin_float_100;
using big_rational = boost::multiprecision::cpp_rational;

// C(x, r) with the smaller complementary index; zero when r > x.
template <typename Num>
Num binom(uint64_t x, uint64_t r) {
    if (r > x) return Num(0);
    r = std::min(r, x - r);
    Num acc(1);
    for (uint64_t i = 1; i <= r; ++i) {
        acc *= Num(x - r + i);
        acc /= Num(i);
    }
    return acc;
}

// Alternating sum for the pack-drawing waiting time: the expectation of the
// number of drawings until `ell` marked coupons are hit.
template <typename Num>
Num pack_waiting_time(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell) {
    const Num cn = binom<Num>(n, pack);
    Num total(0);
    for (uint64_t j = 0; j < ell; ++j) {
        Num term = binom<Num>(a, j) * binom<Num>(a - j - 1, a - ell);
        term *= cn / (cn - binom<Num>(n - a + j, pack));
        bool negative = ((ell - j + 1) % 2) != 0;
        if (negative)
            total -= term;
        else
            total += term;
    }
    return total;
}

} // namespace

double expected_drawings(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell) {
    if (pack < 1 || pack > n) throw parameter_error("expected_drawings: pack outside [1, n]");
    if (ell < 1 || ell > a) throw parameter_error("expected_drawings: need 1 <= ell <= a");
    if (a > n) throw parameter_error("expected_drawings: need a <= n");
    big_float e = pack_waiting_time<big_float>(n, a, pack, ell);
    return e.convert_to<double>();
}

double expected_drawings_exact(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell) {
    if (n > 1000) throw parameter_error("expected_drawings_exact: limited to n <= 1000");
    if (pack < 1 || pack > n) throw parameter_error("expected_drawings_exact: bad pack");
    if (ell < 1 || ell > a) throw parameter_error("expected_drawings_exact: bad ell");
    if (a > n) throw parameter_error("expected_drawings_exact: need a <= n");
    big_rational e = pack_waiting_time<big_rational>(n, a, pack, ell);
    return e.convert_to<double>();
}

double depth_bound(double drawings, double eta) {
    if (!(eta >= 2.0)) throw parameter_error("depth_bound: eta must be >= 2");
    if (!(drawings >= 1.0)) throw parameter_error("depth_bound: drawings must be >= 1");
    double filled = 1.0 + (drawings - 1.0) * (eta - 1.0) / (eta + 1.0);
    return std::log(filled) / std::log(eta) + 1.0;
}

double token_capture_expectation(uint64_t n, uint64_t a) {
    if (n < 2) throw parameter_error("token_capture_expectation: need n >= 2");
    if (a == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(n - 1) / static_cast<double>(a);
}

size_t first_capture_pass(const EventTrace& trace, const AttackerSet& a) {
    size_t pass = 0;
    for (const TraceEvent& e : trace.events) {
        if (e.kind != TraceKind::token_pass && e.kind != TraceKind::retransmit) continue;
        ++pass;
        if (e.peer >= 0 && a.contains(static_cast<uint32_t>(e.peer))) return pass;
    }
    return 0;
}

Table2 reproduce_table2(double beta, std::span<const uint64_t> ns,
                        std::span<const uint32_t> etas, std::optional<double> c,
                        std::optional<uint64_t> pack) {
    if (ns.empty() || etas.empty()) throw parameter_error("reproduce_table2: empty grid");
    if (!(beta > 0.0) || beta >= 1.0) throw parameter_error("reproduce_table2: beta in (0,1)");
    Table2 t;
    t.ns.assign(ns.begin(), ns.end());
    t.etas.assign(etas.begin(), etas.end());
    for (uint32_t eta : etas) {
        std::vector<double> req_row, z_row, d_row;
        for (uint64_t n : ns) {
            auto a = static_cast<uint64_t>(std::ceil(beta * static_cast<double>(n)));
            if (a >= n) throw parameter_error("reproduce_table2: no honest nodes at this beta");
            double cc = c.value_or(static_cast<double>(eta));
            uint64_t pk = pack.value_or(eta);
            ThresholdResult th = deanonymization_threshold(n, a, cc);
            uint64_t ell = std::max<uint32_t>(th.threshold, 1);
            req_row.push_back(static_cast<double>(ell));
            if (ell > a) {
                // not enough attackers to ever pin the source
                z_row.push_back(std::numeric_limits<double>::infinity());
                d_row.push_back(std::numeric_limits<double>::infinity());
                continue;
            }
            double z = expected_drawings(n, a, pk, ell);
            z_row.push_back(z);
            d_row.push_back(depth_bound(z, eta));
        }
        t.required.push_back(std::move(req_row));
        t.drawings.push_back(std::move(z_row));
        t.depth.push_back(std::move(d_row));
    }
    return t;
}

std::string Table2::to_csv() const {
    std::ostringstream out;
    out << "eta";
    for (uint64_t n : ns) out << ',' << n;
    out << '\n';
    char buf[64];
    for (size_t r = 0; r < etas.size(); ++r) {
        out << etas[r];
        for (size_t c = 0; c < ns.size(); ++c) {
            std::snprintf(buf, sizeof buf, ",%.2f", depth[r][c]);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace etad
