#ifndef ETAD_TEST_HELPERS_HPP
#define ETAD_TEST_HELPERS_HPP

// Fixtures and independent oracles shared across the test binaries. The
// oracles deliberately avoid the library's own traversal and summation code.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <utility>
#include <vector>

#include "etad/distmodel.hpp"
#include "etad/graph.hpp"
#include "etad/rng.hpp"

namespace testutil {

using Edge = std::pair<uint32_t, uint32_t>;

inline std::vector<Edge> path_edges(uint32_t n) {
    std::vector<Edge> e;
    for (uint32_t i = 0; i + 1 < n; ++i) e.push_back({i, i + 1});
    return e;
}

inline std::vector<Edge> cycle_edges(uint32_t n) {
    std::vector<Edge> e = path_edges(n);
    e.push_back({n - 1, 0});
    return e;
}

inline std::vector<Edge> star_edges(uint32_t leaves) {
    std::vector<Edge> e;
    for (uint32_t i = 1; i <= leaves; ++i) e.push_back({0, i});
    return e;
}

inline std::vector<Edge> complete_edges(uint32_t n) {
    std::vector<Edge> e;
    for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = i + 1; j < n; ++j) e.push_back({i, j});
    return e;
}

// Rooted tree where the root has `coordination` children and every other
// internal node has coordination-1; every non-leaf vertex therefore has
// `coordination` neighbors. Returns edges and the node count.
inline std::pair<std::vector<Edge>, uint32_t> cayley_tree_edges(uint32_t coordination,
                                                                uint32_t depth) {
    std::vector<Edge> edges;
    uint32_t next = 1;
    std::vector<uint32_t> frontier{0};
    for (uint32_t level = 0; level < depth; ++level) {
        std::vector<uint32_t> fresh;
        for (uint32_t v : frontier) {
            uint32_t children = (v == 0) ? coordination : coordination - 1;
            for (uint32_t c = 0; c < children; ++c) {
                edges.push_back({v, next});
                fresh.push_back(next);
                ++next;
            }
        }
        frontier = std::move(fresh);
    }
    return {edges, next};
}

// Plain adjacency-map BFS, independent of the library's CSR walk.
inline std::vector<int> oracle_bfs(const std::vector<Edge>& edges, uint32_t n, uint32_t src) {
    std::vector<std::vector<uint32_t>> adj(n);
    for (auto [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> dist(n, -1);
    std::deque<uint32_t> q{src};
    dist[src] = 0;
    while (!q.empty()) {
        uint32_t u = q.front();
        q.pop_front();
        for (uint32_t v : adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
    }
    return dist;
}

inline std::vector<uint64_t> oracle_pooled_counts(const std::vector<Edge>& edges, uint32_t n) {
    std::vector<uint64_t> counts;
    for (uint32_t s = 0; s < n; ++s) {
        auto dist = oracle_bfs(edges, n, s);
        for (int d : dist) {
            if (d < 0) continue;
            if (static_cast<size_t>(d) >= counts.size()) counts.resize(d + 1, 0);
            ++counts[static_cast<size_t>(d)];
        }
    }
    return counts;
}

// Eccentricity restricted to a member set, by brute force.
inline std::vector<uint32_t> oracle_centers(const std::vector<Edge>& edges, uint32_t n,
                                            const std::vector<uint32_t>& members) {
    std::vector<std::vector<int>> dist;
    for (uint32_t m : members) dist.push_back(oracle_bfs(edges, n, m));
    uint32_t best = UINT32_MAX;
    std::vector<uint32_t> centers;
    for (uint32_t cand : members) {
        uint32_t ecc = 0;
        for (size_t i = 0; i < members.size(); ++i)
            ecc = std::max(ecc, static_cast<uint32_t>(dist[i][cand]));
        if (ecc < best) {
            best = ecc;
            centers.clear();
        }
        if (ecc == best) centers.push_back(cand);
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

// Monte-Carlo pack-drawing oracle: expected drawings until `ell` of the
// first `a` coupons were seen, packs of `pack` distinct coupons.
inline double mc_pack_drawings(uint64_t n, uint64_t a, uint64_t pack, uint64_t ell,
                               uint64_t trials, uint64_t seed) {
    etad::Rng rng(seed);
    std::vector<uint32_t> pool(n);
    double total = 0;
    for (uint64_t t = 0; t < trials; ++t) {
        for (uint32_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<bool> hit(a, false);
        uint64_t have = 0, draws = 0;
        while (have < ell) {
            ++draws;
            for (uint64_t i = 0; i < pack; ++i) {
                uint64_t j = i + rng.below(n - i);
                std::swap(pool[i], pool[j]);
                if (pool[i] < a && !hit[pool[i]]) {
                    hit[pool[i]] = true;
                    ++have;
                }
            }
        }
        total += static_cast<double>(draws);
    }
    return total / static_cast<double>(trials);
}

// Exact expectation by absorbing-chain enumeration over subsets of the
// marked coupons; every possible pack is enumerated. Tiny instances only.
inline double enumerate_pack_drawings(uint32_t n, uint32_t a, uint32_t pack, uint32_t ell) {
    // enumerate all packs (combinations of size `pack` out of n)
    std::vector<std::vector<uint32_t>> packs;
    std::vector<uint32_t> cur;
    auto rec = [&](auto&& self, uint32_t start) -> void {
        if (cur.size() == pack) {
            packs.push_back(cur);
            return;
        }
        for (uint32_t v = start; v < n; ++v) {
            cur.push_back(v);
            self(self, v + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);

    // E[steps to reach >= ell marked] from each collected-subset state,
    // solved backwards by popcount since collected sets only grow.
    uint32_t masks = 1u << a;
    std::vector<double> expect(masks, 0.0);
    std::vector<uint32_t> order(masks);
    for (uint32_t m = 0; m < masks; ++m) order[m] = m;
    std::sort(order.begin(), order.end(), [](uint32_t x, uint32_t y) {
        return __builtin_popcount(x) > __builtin_popcount(y);
    });
    for (uint32_t mask : order) {
        if (static_cast<uint32_t>(__builtin_popcount(mask)) >= ell) {
            expect[mask] = 0.0;
            continue;
        }
        // E[m] = 1 + sum_p P(p) E[m | p]; separate the self-loop term.
        double stay = 0.0, acc = 0.0;
        for (const auto& p : packs) {
            uint32_t add = 0;
            for (uint32_t v : p)
                if (v < a) add |= 1u << v;
            uint32_t next = mask | add;
            if (next == mask)
                stay += 1.0;
            else
                acc += expect[next];
        }
        double total = static_cast<double>(packs.size());
        expect[mask] = (total + acc) / (total - stay);
    }
    return expect[0];
}

// Random distributions for property tests.
inline etad::DiscreteDistribution random_distribution(etad::Rng& rng, size_t support) {
    std::vector<double> w(support);
    for (double& x : w) x = 0.05 + rng.unit();
    return etad::DiscreteDistribution::from_weights(std::move(w));
}

// Bell-shaped masses plus the fixed head the discretizer produces; these are
// reachable by outward-only steps most of the time.
inline etad::DiscreteDistribution random_feasible_shape(etad::Rng& rng, size_t support) {
    double mu = 1.5 + rng.unit() * (static_cast<double>(support) - 3.0);
    double sigma = 0.5 + 1.5 * rng.unit();
    std::vector<double> w(support);
    for (size_t i = 0; i < support; ++i) {
        double z = (static_cast<double>(i) - mu) / sigma;
        w[i] = std::exp(-0.5 * z * z) + 1e-4;
    }
    return etad::DiscreteDistribution::from_weights(std::move(w));
}

// Sharply increasing tails frequently violate the outward-step bound.
inline etad::DiscreteDistribution random_spiky_shape(etad::Rng& rng, size_t support) {
    std::vector<double> w(support);
    for (size_t i = 0; i < support; ++i) w[i] = 0.02 + rng.unit() * 0.2;
    w[support - 1] += 2.0 + 8.0 * rng.unit();
    if (support > 3 && rng.unit() < 0.5) w[support - 2] += 1.0 + 4.0 * rng.unit();
    return etad::DiscreteDistribution::from_weights(std::move(w));
}

} // namespace testutil

#endif
