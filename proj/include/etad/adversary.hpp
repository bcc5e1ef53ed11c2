#ifndef ETAD_ADVERSARY_HPP
#define ETAD_ADVERSARY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "etad/graph.hpp"
#include "etad/protocol.hpp"

namespace etad {

// Colluding semi-honest observers. They follow the protocol; the analysis
// only reads what they legitimately received plus the topology.
struct AttackerSet {
    std::vector<uint32_t> members; // sorted
    double beta = 0.0;
    bool knows_topology = true;

    bool contains(uint32_t v) const;
};

// Uniform placement without replacement, optionally excluding one node.
AttackerSet uniform_attackers(uint32_t n, uint32_t count, uint64_t seed,
                              std::optional<uint32_t> exclude = std::nullopt);

// Strongest-placement variant: a new node adjacent to every participant.
// Returns the augmented graph; the new node's id is the old node count and
// should be added to the attacker set.
Graph augment_with_connected_attacker(const Graph& g);

struct Observation {
    uint32_t observer = 0;
    uint64_t msg = 0;
    double time = 0.0;
    uint32_t link = 0; // the peer the message arrived from
    MsgVariant variant = MsgVariant::spread;
    int32_t token_t = -1;
};

std::vector<Observation> attacker_observations(const EventTrace& trace, const AttackerSet& a);

struct AttackReport {
    std::vector<uint32_t> candidates;
    uint32_t point_estimate = 0;
    uint32_t true_source = 0;
    bool success = false;
    uint32_t rank = 0; // 1-based position of the true source in the attack ordering
    size_t candidate_set_size = 0;
    size_t observation_count = 0;
    double cutoff_time = -1.0;

    std::string to_json() const;
};

// Jordan-centre estimation over the attackers' receipt records: the infected
// set is estimated as receipts up to (and including) the first flood arrival
// plus the sending side of each observed link; candidates are the nodes of
// minimum eccentricity to that estimate, over the whole graph.
AttackReport jordan_center_attack(const EventTrace& trace, const Graph& g, const AttackerSet& a,
                                  uint32_t true_source);

struct ThresholdResult {
    uint32_t threshold = 0;  // ceil(log_c(n - a))
    bool deanonymized = false; // (n - a) / c^a <= 1
};

// pre: c > 1, n > a >= 0.
ThresholdResult deanonymization_threshold(uint64_t n, uint64_t a, double c);

// Expected number of size-`pack` uniform distinct drawings from n coupons
// until at least `ell` members of a marked subset of size `a` have appeared.
// pre: 1 <= ell <= a, pack >= 1, a < n. Evaluated in extended precision;
// the alternating sum cancels catastrophically in doubles for large a.
double expected_drawings(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell);

// Exact rational evaluation for validation; pre: n <= 1000.
double expected_drawings_exact(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell);

// Depth a dissemination tree must reach before the drawing count Z covers it:
// inverts Z = 1 + (eta+1) * sum_{i=0}^{t-2} eta^i. pre: eta >= 2, Z >= 1.
double depth_bound(double drawings, double eta);

// Expected token passes until an attacker holds the token: (n-1)/a.
// a == 0 yields +infinity.
double token_capture_expectation(uint64_t n, uint64_t a);

// 1-based index of the first token pass whose recipient is an attacker;
// 0 when no pass was captured.
size_t first_capture_pass(const EventTrace& trace, const AttackerSet& a);

struct Table2 {
    std::vector<uint64_t> ns;
    std::vector<uint32_t> etas;
    std::vector<std::vector<double>> required;  // [eta][n] attackers needed
    std::vector<std::vector<double>> drawings;  // [eta][n] expected drawings
    std::vector<std::vector<double>> depth;     // [eta][n] depth bound

    std::string to_csv() const; // rows = eta, columns = n
};

// Expected tree depth before deanonymization across an (n, eta) grid.
// Unset c / pack fall back to eta itself (the calibration that matches the
// reference column); explicit values allow sensitivity runs.
Table2 reproduce_table2(double beta, std::span<const uint64_t> ns,
                        std::span<const uint32_t> etas, std::optional<double> c = std::nullopt,
                        std::optional<uint64_t> pack = std::nullopt);

} // namespace etad

#endif
