#pragma once

// Brute-force recounts of the hierarchy metrics, written directly from the
// definitions. Deliberately dumb: triple loops over the BFS order, no code
// shared with the library implementation.

#include <vector>

#include "hrcb/metrics.hpp"
#include "hrcb/tree.hpp"

namespace oracles {

struct Counts {
    double m_root, m_origin, m_parent, m_sibling;
};

template <class DistFn, class OriginFn>
Counts recount(const hrcb::Hierarchy& h, DistFn dist, OriginFn odist, bool strict_prior = false) {
    const int n = h.n;
    auto order = h.bfs_order();
    std::vector<int> pos(n);
    for (int i = 0; i < n; ++i) pos[order[i]] = i;

    long cr = 0, co = 0, cp = 0;
    for (int v = 0; v < n; ++v) {
        if (v == h.root) {
            cr++;
            co++;
            cp++;
            continue;
        }
        int p = h.parent[v];
        if (dist(p, h.root) < dist(v, h.root)) cr++;
        if (odist(p) < odist(v)) co++;
        if (p == h.root)
            cp++;
        else if (dist(p, v) < dist(h.parent[p], v))
            cp++;
    }

    double acc = 1.0;
    for (int p = 0; p < n; ++p) {
        if (h.children[p].empty()) continue;
        for (int v : h.children[p]) {
            double maxsib = 0.0;
            for (int u : h.children[p])
                if (u != v && dist(v, u) > maxsib) maxsib = dist(v, u);
            long cnt = 0, denom = 0;
            for (int u = 0; u < n; ++u) {
                if (u == v || pos[u] >= pos[v]) continue;
                bool sibling = h.parent[u] == p;
                if (sibling) continue;
                if (strict_prior && u == p) continue;
                denom++;
                if (maxsib < dist(v, u)) cnt++;
            }
            acc += denom == 0 ? 1.0 : double(cnt) / double(denom);
        }
    }
    return Counts{double(cr) / n, double(co) / n, double(cp) / n, acc / n};
}

// pair-loop distortion oracle
template <class DistFn>
std::pair<double, double> distortion(const hrcb::Hierarchy& h, DistFn dist) {
    auto adj = hrcb::undirected_adjacency(h);
    const int n = h.n;
    double s1 = 0.0, sm = 0.0, sg = 0.0;
    long pairs = 0;
    std::vector<std::vector<int>> dg(n);
    for (int i = 0; i < n; ++i) dg[i] = hrcb::bfs_distances(adj, i);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double r = dist(i, j) / dg[i][j];
            s1 += std::abs(r * r - 1.0);
            sm += dist(i, j);
            sg += dg[i][j];
            pairs++;
        }
    double md = s1 / pairs;
    double dm = sm / sg;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double r = (dist(i, j) / dm) / dg[i][j];
            acc += std::abs(r * r - 1.0);
        }
    double fd = acc / pairs;
    double mdd = 2.0 / (1.0 + std::exp(-fd)) - 1.0;
    return {md, mdd};
}

}  // namespace oracles
