#ifndef ETAD_GRAPH_HPP
#define ETAD_GRAPH_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace etad {

// Simple undirected graph grown by sequential node joins. Node j contributed
// min(k, j) edges to uniformly chosen earlier nodes at join time. Immutable
// after construction; adjacency is stored sorted in CSR form.
class Graph {
public:
    Graph() = default;

    // pre: n >= 2, k >= 1. Deterministic in the seed.
    static Graph generate_k_growing(uint32_t n, uint32_t k, uint64_t seed);

    // Build from an explicit edge list (test fixtures, parsed files).
    static Graph from_edges(uint32_t n, std::span<const std::pair<uint32_t, uint32_t>> edges,
                            uint32_t k = 0, uint64_t seed = 0);

    uint32_t node_count() const { return n_; }
    uint32_t edges_per_join() const { return k_; }
    uint64_t seed() const { return seed_; }
    size_t edge_count() const { return adj_.size() / 2; }

    std::span<const uint32_t> neighbors(uint32_t v) const {
        return {adj_.data() + offsets_[v], adj_.data() + offsets_[v + 1]};
    }
    uint32_t degree(uint32_t v) const { return offsets_[v + 1] - offsets_[v]; }

    bool connected() const;

    // Text format: one header line "n k seed", then one "u v" line per edge
    // with u < v, sorted ascending.
    std::string serialize() const;
    static Graph parse(std::string_view text);

    std::vector<std::pair<uint32_t, uint32_t>> edge_list() const;

private:
    void build_csr(std::vector<std::pair<uint32_t, uint32_t>>& edges);

    uint32_t n_ = 0;
    uint32_t k_ = 0;
    uint64_t seed_ = 0;
    std::vector<uint32_t> offsets_;
    std::vector<uint32_t> adj_;
};

// counts[i] = number of nodes at shortest-path distance i from the source;
// source == -1 marks a histogram pooled over several sources.
struct DistanceHistogram {
    int64_t source = 0;
    std::vector<uint64_t> counts;

    uint64_t total() const;
    std::string to_csv() const;
};

// BFS distances from one source; -1 for unreachable nodes.
std::vector<int32_t> bfs_distances(const Graph& g, uint32_t source);

DistanceHistogram shortest_path_histogram(const Graph& g, uint32_t source);

// Element-wise sum of single-source histograms. Without a sample count every
// node is a source; with one, sources are taken on a deterministic stride
// across the join order.
DistanceHistogram pooled_histogram(const Graph& g,
                                   std::optional<uint32_t> sample_sources = std::nullopt);

// All nodes minimizing the maximum distance to the infected set, ascending by
// id. Candidates are the infected set itself unless widen_to_all is set.
std::vector<uint32_t> jordan_center(const Graph& g, std::span<const uint32_t> infected,
                                    bool widen_to_all = false);

// max distance from each node to any member of the set (full-graph metric).
std::vector<uint32_t> eccentricity_to_set(const Graph& g, std::span<const uint32_t> members);

} // namespace etad

#endif
