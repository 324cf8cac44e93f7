#include "hrcb/metrics.hpp"

namespace hrcb {

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adj, int src) {
    std::vector<int> d(adj.size(), -1);
    std::deque<int> q{src};
    d[src] = 0;
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        for (int u : adj[v])
            if (d[u] < 0) {
                d[u] = d[v] + 1;
                q.push_back(u);
            }
    }
    return d;
}

std::vector<std::vector<int>> undirected_adjacency(const Hierarchy& h) {
    std::vector<std::vector<int>> adj(h.n);
    for (auto [p, c] : h.edges()) {
        adj[p].push_back(c);
        adj[c].push_back(p);
    }
    return adj;
}

namespace {

struct TableDist {
    const Hierarchy& h;
    const EmbeddingTable& E;
    Vec org;

    TableDist(const Hierarchy& hh, const EmbeddingTable& e) : h(hh), E(e) {
        if (E.n() != h.n) throw DataError("metric evaluation: missing embedding rows");
        org = manifold::origin(E.space, E.space.intrinsic_dim(static_cast<int>(E.X.cols())));
    }
    double operator()(int i, int j) const {
        return manifold::distance(E.point(i), E.point(j), E.space);
    }
    double to_origin(int i) const { return manifold::distance(E.point(i), org, E.space); }
};

}  // namespace

HrcScores<double> evaluate_embedding(const Hierarchy& h, const EmbeddingTable& E,
                                     const MetricOptions& opt) {
    TableDist d(h, E);
    return evaluate_hierarchy<double>(
        h, [&](int i, int j) { return d(i, j); }, [&](int i) { return d.to_origin(i); }, opt);
}

namespace {
MetricOptions counts_only(MetricOptions opt = {}) {
    opt.with_distortion = false;
    return opt;
}
}  // namespace

double metric_root(const Hierarchy& h, const EmbeddingTable& E) {
    return evaluate_embedding(h, E, counts_only()).m_root;
}
double metric_origin(const Hierarchy& h, const EmbeddingTable& E) {
    return evaluate_embedding(h, E, counts_only()).m_origin;
}
double metric_parent(const Hierarchy& h, const EmbeddingTable& E) {
    return evaluate_embedding(h, E, counts_only()).m_parent;
}
double metric_sibling(const Hierarchy& h, const EmbeddingTable& E, const MetricOptions& opt) {
    return evaluate_embedding(h, E, counts_only(opt)).m_sibling;
}
std::pair<double, double> graph_distortion(const Hierarchy& h, const EmbeddingTable& E) {
    auto s = evaluate_embedding(h, E);
    return {s.m_dist, s.m_dist_norm};
}

}  // namespace hrcb
