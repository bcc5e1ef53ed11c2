#include "etad/graph.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <sstream>

#include "etad/errors.hpp"
#include "etad/rng.hpp"

namespace etad {

Graph Graph::generate_k_growing(uint32_t n, uint32_t k, uint64_t seed) {
    if (n < 2) throw parameter_error("generate_k_growing: n must be >= 2");
    if (k < 1) throw parameter_error("generate_k_growing: k must be >= 1");

    Rng rng(seed);
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    edges.reserve(static_cast<size_t>(k) * n);
    for (uint32_t j = 1; j < n; ++j) {
        uint32_t m = std::min(k, j);
        for (uint32_t target : rng.distinct(j, m))
            edges.emplace_back(target, j);
    }

    Graph g;
    g.n_ = n;
    g.k_ = k;
    g.seed_ = seed;
    g.build_csr(edges);
    if (!g.connected())
        throw std::logic_error("generate_k_growing: generated graph is not connected");
    return g;
}

Graph Graph::from_edges(uint32_t n, std::span<const std::pair<uint32_t, uint32_t>> edge_span,
                        uint32_t k, uint64_t seed) {
    if (n < 1) throw parameter_error("from_edges: n must be >= 1");
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    edges.reserve(edge_span.size());
    for (auto [u, v] : edge_span) {
        if (u >= n || v >= n) throw parameter_error("from_edges: endpoint out of range");
        if (u == v) throw parameter_error("from_edges: self-loop");
        edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw parameter_error("from_edges: duplicate edge");

    Graph g;
    g.n_ = n;
    g.k_ = k;
    g.seed_ = seed;
    g.build_csr(edges);
    return g;
}

void Graph::build_csr(std::vector<std::pair<uint32_t, uint32_t>>& edges) {
    offsets_.assign(n_ + 1, 0);
    for (auto [u, v] : edges) {
        ++offsets_[u + 1];
        ++offsets_[v + 1];
    }
    for (uint32_t i = 0; i < n_; ++i) offsets_[i + 1] += offsets_[i];
    adj_.assign(offsets_[n_], 0);
    std::vector<uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (auto [u, v] : edges) {
        adj_[cursor[u]++] = v;
        adj_[cursor[v]++] = u;
    }
    for (uint32_t v = 0; v < n_; ++v)
        std::sort(adj_.begin() + offsets_[v], adj_.begin() + offsets_[v + 1]);
}

bool Graph::connected() const {
    if (n_ == 0) return false;
    std::vector<int32_t> d = bfs_distances(*this, 0);
    return std::none_of(d.begin(), d.end(), [](int32_t x) { return x < 0; });
}

std::vector<std::pair<uint32_t, uint32_t>> Graph::edge_list() const {
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    edges.reserve(edge_count());
    for (uint32_t u = 0; u < n_; ++u)
        for (uint32_t v : neighbors(u))
            if (u < v) edges.emplace_back(u, v);
    std::sort(edges.begin(), edges.end());
    return edges;
}

std::string Graph::serialize() const {
    std::ostringstream out;
    out << n_ << ' ' << k_ << ' ' << seed_ << '\n';
    for (auto [u, v] : edge_list()) out << u << ' ' << v << '\n';
    return out.str();
}

Graph Graph::parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    uint32_t n = 0, k = 0;
    uint64_t seed = 0;
    if (!(in >> n >> k >> seed)) throw parameter_error("Graph::parse: bad header");
    std::vector<std::pair<uint32_t, uint32_t>> edges;
    uint32_t u, v;
    while (in >> u >> v) edges.emplace_back(u, v);
    return from_edges(n, edges, k, seed);
}

uint64_t DistanceHistogram::total() const {
    uint64_t t = 0;
    for (uint64_t c : counts) t += c;
    return t;
}

std::string DistanceHistogram::to_csv() const {
    std::ostringstream out;
    out << "distance,count\n";
    for (size_t i = 0; i < counts.size(); ++i) out << i << ',' << counts[i] << '\n';
    return out.str();
}

std::vector<int32_t> bfs_distances(const Graph& g, uint32_t source) {
    if (source >= g.node_count()) throw parameter_error("bfs_distances: source out of range");
    std::vector<int32_t> dist(g.node_count(), -1);
    std::vector<uint32_t> queue;
    queue.reserve(g.node_count());
    dist[source] = 0;
    queue.push_back(source);
    for (size_t head = 0; head < queue.size(); ++head) {
        uint32_t u = queue[head];
        int32_t du = dist[u];
        for (uint32_t v : g.neighbors(u)) {
            if (dist[v] < 0) {
                dist[v] = du + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

DistanceHistogram shortest_path_histogram(const Graph& g, uint32_t source) {
    std::vector<int32_t> dist = bfs_distances(g, source);
    int32_t maxd = 0;
    for (int32_t d : dist) maxd = std::max(maxd, d);
    DistanceHistogram h;
    h.source = source;
    h.counts.assign(static_cast<size_t>(maxd) + 1, 0);
    for (int32_t d : dist)
        if (d >= 0) ++h.counts[static_cast<size_t>(d)];
    return h;
}

DistanceHistogram pooled_histogram(const Graph& g, std::optional<uint32_t> sample_sources) {
    uint32_t n = g.node_count();
    uint32_t m = sample_sources.value_or(n);
    if (m < 1) throw parameter_error("pooled_histogram: need at least one source");
    m = std::min(m, n);

    DistanceHistogram pooled;
    pooled.source = -1;
    for (uint32_t i = 0; i < m; ++i) {
        uint32_t src = (m == n) ? i
                                : static_cast<uint32_t>((static_cast<uint64_t>(i) * n) / m);
        DistanceHistogram h = shortest_path_histogram(g, src);
        if (h.counts.size() > pooled.counts.size()) pooled.counts.resize(h.counts.size(), 0);
        for (size_t d = 0; d < h.counts.size(); ++d) pooled.counts[d] += h.counts[d];
    }
    return pooled;
}

std::vector<uint32_t> eccentricity_to_set(const Graph& g, std::span<const uint32_t> members) {
    if (members.empty()) throw parameter_error("eccentricity_to_set: empty set");
    std::vector<uint32_t> ecc(g.node_count(), 0);
    for (uint32_t m : members) {
        if (m >= g.node_count()) throw parameter_error("eccentricity_to_set: node out of range");
        std::vector<int32_t> dist = bfs_distances(g, m);
        for (uint32_t v = 0; v < g.node_count(); ++v) {
            uint32_t d = dist[v] < 0 ? std::numeric_limits<uint32_t>::max()
                                     : static_cast<uint32_t>(dist[v]);
            ecc[v] = std::max(ecc[v], d);
        }
    }
    return ecc;
}

std::vector<uint32_t> jordan_center(const Graph& g, std::span<const uint32_t> infected,
                                    bool widen_to_all) {
    if (infected.empty()) throw parameter_error("jordan_center: empty infected set");
    std::vector<uint32_t> ecc = eccentricity_to_set(g, infected);

    std::vector<uint32_t> pool;
    if (widen_to_all) {
        pool.resize(g.node_count());
        for (uint32_t v = 0; v < g.node_count(); ++v) pool[v] = v;
    } else {
        pool.assign(infected.begin(), infected.end());
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    }

    uint32_t best = std::numeric_limits<uint32_t>::max();
    for (uint32_t v : pool) best = std::min(best, ecc[v]);
    std::vector<uint32_t> centers;
    for (uint32_t v : pool)
        if (ecc[v] == best) centers.push_back(v);
    return centers;
}

} // namespace etad
