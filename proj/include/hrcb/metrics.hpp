#pragma once

#include <deque>
#include <vector>

#include "hrcb/manifold.hpp"
#include "hrcb/tree.hpp"

namespace hrcb {

template <class S>
struct HrcScores {
    S m_root{};     // [0,1]
    S m_origin{};   // [0,1]
    S m_parent{};   // [0,1]
    S m_sibling{};  // [0,1]
    S m_dist{};     // >= 0
    S m_dist_norm{};  // [0,1)
};

struct MetricOptions {
    // The prior-node set for the sibling metric literally contains every
    // earlier node that is not a sibling, ancestors included. The strict
    // variant also drops the parent from that set.
    bool strict_sibling_prior = false;
    bool with_distortion = true;
};

// Unit-weight shortest-path lengths from src over the undirected graph given
// by adjacency lists.
std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int src);

std::vector<std::vector<int>> undirected_adjacency(const Hierarchy& h);

namespace detail {

// Ties count as failures: the indicator demands strict inequality.
template <class S>
bool strictly_less(const S& a, const S& b) {
    return a < b;
}

}  // namespace detail

// dist(i,j): manifold distance between embedded nodes i and j.
// odist(i): distance from node i to the coordinate origin.
template <class S, class DistFn, class OriginFn>
HrcScores<S> evaluate_hierarchy(const Hierarchy& h, DistFn&& dist, OriginFn&& odist,
                                const MetricOptions& opt = {}) {
    h.validate();
    const int n = h.n;
    const auto order = h.bfs_order();
    std::vector<int> pos(n);
    for (int i = 0; i < n; ++i) pos[order[i]] = i;

    HrcScores<S> out;

    // root / origin / parent counts
    long cr = 0, co = 0, cp = 0;
    for (int v = 0; v < n; ++v) {
        if (v == h.root) {
            ++cr;
            ++co;
            ++cp;
            continue;
        }
        int p = h.parent[v];
        if (detail::strictly_less<S>(dist(p, h.root), dist(v, h.root))) ++cr;
        if (detail::strictly_less<S>(odist(p), odist(v))) ++co;
        if (p == h.root) {
            ++cp;
        } else {
            int g = h.parent[p];
            if (detail::strictly_less<S>(dist(p, v), dist(g, v))) ++cp;
        }
    }
    out.m_root = S(cr) / S(n);
    out.m_origin = S(co) / S(n);
    out.m_parent = S(cp) / S(n);

    // sibling metric over hierarchical traversal
    S acc = S(1);  // the root term
    for (int pi = 0; pi < n; ++pi) {
        int p = order[pi];
        if (h.children[p].empty()) continue;
        const auto& sib = h.children[p];
        S d_rel = S(0);
        for (int v : sib) {
            S maxsib = S(0);
            for (int u : sib) {
                if (u == v) continue;
                S d = dist(v, u);
                if (maxsib < d) maxsib = d;
            }
            long cnt = 0, denom = 0;
            for (int qi = 0; qi < pos[v]; ++qi) {
                int u = order[qi];
                if (h.parent[u] == p) continue;  // sibling (v itself is at pos[v])
                if (opt.strict_sibling_prior && u == p) continue;
                ++denom;
                if (detail::strictly_less<S>(maxsib, dist(v, u))) ++cnt;
            }
            d_rel += denom == 0 ? S(1) : S(cnt) / S(denom);
        }
        acc += d_rel;
    }
    out.m_sibling = acc / S(n);

    if (!opt.with_distortion) return out;

    // graph distortion: d_G by breadth-first shortest paths, unit weights
    auto adj = undirected_adjacency(h);
    S sum_ratio = S(0), sum_dm = S(0), sum_dg = S(0);
    long pairs = 0;
    for (int i = 0; i < n; ++i) {
        auto dg = bfs_distances(adj, i);
        for (int j = i + 1; j < n; ++j) {
            if (dg[j] < 0) throw DataError("graph_distortion: disconnected pair");
            S dm = dist(i, j);
            S r = dm / S(dg[j]);
            S dev = r * r - S(1);
            if (dev < S(0)) dev = -dev;
            sum_ratio += dev;
            sum_dm += dm;
            sum_dg += S(dg[j]);
            ++pairs;
        }
    }
    if (pairs > 0) {
        out.m_dist = sum_ratio / S(pairs);
        S dmean = sum_dm / sum_dg;  // path density
        // f_d(d_m) with the distances rescaled by 1/d_m
        S acc2 = S(0);
        for (int i = 0; i < n; ++i) {
            auto dg = bfs_distances(adj, i);
            for (int j = i + 1; j < n; ++j) {
                S r = (dist(i, j) / dmean) / S(dg[j]);
                S dev = r * r - S(1);
                if (dev < S(0)) dev = -dev;
                acc2 += dev;
            }
        }
        S fd = acc2 / S(pairs);
        using std::exp;
        out.m_dist_norm = S(2) / (S(1) + exp(-fd)) - S(1);
    }
    return out;
}

// Convenience: evaluate a double-precision embedding table.
HrcScores<double> evaluate_embedding(const Hierarchy& h, const EmbeddingTable& E,
                                     const MetricOptions& opt = {});

double metric_root(const Hierarchy& h, const EmbeddingTable& E);
double metric_origin(const Hierarchy& h, const EmbeddingTable& E);
double metric_parent(const Hierarchy& h, const EmbeddingTable& E);
double metric_sibling(const Hierarchy& h, const EmbeddingTable& E, const MetricOptions& opt = {});
// Returns (M_d, M_dd).
std::pair<double, double> graph_distortion(const Hierarchy& h, const EmbeddingTable& E);

}  // namespace hrcb
