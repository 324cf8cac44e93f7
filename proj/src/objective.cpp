#include "hrcb/objective.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "hrcb/metrics.hpp"

namespace hrcb {

using namespace ad;
using json = nlohmann::json;

std::string to_string(Objective o) {
    switch (o) {
        case Objective::GD: return "gd";
        case Objective::HR: return "hr";
        case Objective::FD: return "fd";
        case Objective::LR: return "lr";
    }
    return "?";
}

Objective objective_from_string(const std::string& s) {
    if (s == "gd" || s == "GD") return Objective::GD;
    if (s == "hr" || s == "HR") return Objective::HR;
    if (s == "fd" || s == "FD") return Objective::FD;
    if (s == "lr" || s == "LR") return Objective::LR;
    throw ConfigError("unknown objective: " + s);
}

Dataset Dataset::from_hierarchy(const Hierarchy& h) {
    Dataset d;
    d.n = h.n;
    d.edges = h.edges();
    d.labels = h.label;
    d.tree = h;
    return d;
}

Dataset Dataset::from_mixed(const MixedGraph& g) {
    Dataset d;
    d.n = g.n;
    d.edges = g.edges;
    d.parts = g.parts;
    d.part_map = g.node_map;
    return d;
}

std::vector<std::set<int>> Dataset::neighbor_sets() const {
    std::vector<std::set<int>> nb(n);
    for (auto [a, b] : edges) {
        nb[a].insert(b);
        nb[b].insert(a);
    }
    return nb;
}

namespace {

// largest-remainder apportionment of total into len(weights) parts
std::vector<long> apportion(long total, const std::vector<double>& weights) {
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<long> out(weights.size());
    std::vector<std::pair<double, size_t>> rem;
    long used = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        double q = total * weights[i] / wsum;
        out[i] = static_cast<long>(std::floor(q));
        used += out[i];
        rem.emplace_back(q - out[i], i);
    }
    std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (long k = 0; k < total - used; ++k) out[rem[k].second] += 1;
    return out;
}

template <class T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

EdgeSplit split_edges(const Dataset& d, std::uint64_t seed) {
    if (d.edges.empty()) throw DataError("split_edges: no edges");
    EdgeSplit s;
    s.seed = seed;
    auto edges = d.edges;
    Rng rng(derive_seed(seed, "edge-split"));
    shuffle_vec(edges, rng);
    auto counts = apportion(static_cast<long>(edges.size()), {8.0, 1.0, 1.0});
    size_t a = counts[0], b = counts[0] + counts[1];
    s.train.assign(edges.begin(), edges.begin() + a);
    s.dev.assign(edges.begin() + a, edges.begin() + b);
    s.test.assign(edges.begin() + b, edges.end());
    return s;
}

NodeSplit split_nodes(const Dataset& d, std::uint64_t seed) {
    if (d.labels.empty()) throw DataError("split_nodes: dataset has no labels");
    int nc = 0;
    for (int l : d.labels) nc = std::max(nc, l + 1);
    if (nc < 1) throw DataError("split_nodes: no labeled nodes");
    NodeSplit s;
    s.seed = seed;
    Rng rng(derive_seed(seed, "node-split"));
    for (int cls = 0; cls < nc; ++cls) {
        std::vector<int> members;
        for (int v = 0; v < d.n; ++v)
            if (d.labels[v] == cls) members.push_back(v);
        if (members.empty()) continue;
        shuffle_vec(members, rng);
        auto counts = apportion(static_cast<long>(members.size()), {3.0, 1.0, 6.0});
        size_t a = counts[0], b = counts[0] + counts[1];
        s.train.insert(s.train.end(), members.begin(), members.begin() + a);
        s.dev.insert(s.dev.end(), members.begin() + a, members.begin() + b);
        s.test.insert(s.test.end(), members.begin() + b, members.end());
    }
    if (s.train.empty() || s.dev.empty() || s.test.empty())
        throw DataError("split_nodes: too few labeled nodes for a 3:1:6 split");
    return s;
}

namespace {
json edges_to_json(const std::vector<std::pair<int, int>>& e) {
    json a = json::array();
    for (auto [u, v] : e) a.push_back(json::array({u, v}));
    return a;
}
std::vector<std::pair<int, int>> edges_from_json(const json& a) {
    std::vector<std::pair<int, int>> e;
    for (const auto& p : a) e.emplace_back(p.at(0), p.at(1));
    return e;
}
}  // namespace

void save_edge_split(const EdgeSplit& s, const std::string& path) {
    json j{{"seed", s.seed},
           {"train", edges_to_json(s.train)},
           {"dev", edges_to_json(s.dev)},
           {"test", edges_to_json(s.test)}};
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump() << '\n';
}

EdgeSplit load_edge_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j = json::parse(f);
    EdgeSplit s;
    s.seed = j.at("seed");
    s.train = edges_from_json(j.at("train"));
    s.dev = edges_from_json(j.at("dev"));
    s.test = edges_from_json(j.at("test"));
    return s;
}

void save_node_split(const NodeSplit& s, const std::string& path) {
    json j{{"seed", s.seed}, {"train", s.train}, {"dev", s.dev}, {"test", s.test}};
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump() << '\n';
}

NodeSplit load_node_split(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j = json::parse(f);
    NodeSplit s;
    s.seed = j.at("seed");
    s.train = j.at("train").get<std::vector<int>>();
    s.dev = j.at("dev").get<std::vector<int>>();
    s.test = j.at("test").get<std::vector<int>>();
    return s;
}

GdPairs build_gd_pairs(const Dataset& d, const std::vector<std::pair<int, int>>& part_edges) {
    std::set<int> nodes;
    for (auto [a, b] : part_edges) {
        nodes.insert(a);
        nodes.insert(b);
    }
    GdPairs g;
    g.nodes.assign(nodes.begin(), nodes.end());
    int m = static_cast<int>(g.nodes.size());
    if (m < 2) throw DataError("gd pairs: partition has fewer than two nodes");

    std::vector<std::vector<int>> adj(d.n);
    for (auto [a, b] : d.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    g.inv_dg2 = Mat::Zero(m, m);
    g.mask = Mat::Zero(m, m);
    std::vector<int> where(d.n, -1);
    for (int i = 0; i < m; ++i) where[g.nodes[i]] = i;
    for (int i = 0; i < m; ++i) {
        auto dist = bfs_distances(adj, g.nodes[i]);
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            int dg = dist[g.nodes[j]];
            if (dg < 0) throw DataError("gd pairs: disconnected node pair");
            g.inv_dg2(i, j) = 1.0 / (double(dg) * double(dg));
            if (i < j) g.mask(i, j) = 1.0;
        }
    }
    return g;
}

std::vector<std::array<int, 10>> sample_hr_negatives(const Dataset& d,
                                                     const std::vector<std::pair<int, int>>& edges,
                                                     const std::vector<std::set<int>>& nb,
                                                     std::uint64_t seed, std::uint64_t epoch) {
    Rng rng(derive_seed(seed, "hr-neg", epoch));
    std::vector<std::array<int, 10>> out(edges.size());
    static bool warned = false;
    for (size_t e = 0; e < edges.size(); ++e) {
        int u = edges[e].first;
        long avail = d.n - 1 - static_cast<long>(nb[u].size());
        bool replace = avail < 10;
        if (replace && !warned) {
            std::fprintf(stderr, "hr negatives: node %d has < 10 non-neighbors, sampling with replacement\n", u);
            warned = true;
        }
        std::set<int> used;
        for (int k = 0; k < 10; ++k) {
            int w;
            do {
                w = static_cast<int>(rng.below(d.n));
            } while (w == u || nb[u].count(w) || (!replace && used.count(w)));
            used.insert(w);
            out[e][k] = w;
        }
    }
    return out;
}

std::vector<std::pair<int, int>> sample_fd_negatives(const Dataset& d,
                                                     const std::vector<std::set<int>>& nb, int count,
                                                     std::uint64_t seed, std::uint64_t epoch) {
    Rng rng(derive_seed(seed, "fd-neg", epoch));
    std::vector<std::pair<int, int>> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        int u = static_cast<int>(rng.below(d.n));
        int v = static_cast<int>(rng.below(d.n));
        if (u == v || nb[u].count(v)) continue;
        out.emplace_back(u, v);
    }
    return out;
}

Var loss_gd(Tape& t, Var points, const Space& s, const GdPairs& pairs) {
    if (points.tape != &t) throw ConfigError("loss_gd: var from another tape");
    Var X = gather_rows(points, pairs.nodes);
    Var D = pair_dist(X, s);
    int m = static_cast<int>(pairs.nodes.size());
    Var dev = abs_(cadd(cmul(square(D), pairs.inv_dg2), -Mat::Ones(m, m)));
    return sum(cmul(dev, pairs.mask));
}

Var loss_hr(Tape& t, Var points, const Space& s, const std::vector<std::pair<int, int>>& edges,
            const std::vector<std::array<int, 10>>& negatives) {
    if (points.tape != &t) throw ConfigError("loss_hr: var from another tape");
    if (edges.size() != negatives.size()) throw ConfigError("loss_hr: negative set mismatch");
    std::vector<int> us, cand0;
    us.reserve(edges.size());
    cand0.reserve(edges.size());
    for (auto [u, v] : edges) {
        us.push_back(u);
        cand0.push_back(v);
    }
    Var U = gather_rows(points, us);
    // column 0 is the positive target, then the 10 negatives
    Var logits = neg(rows_dist(U, gather_rows(points, cand0), s));
    for (int k = 0; k < 10; ++k) {
        std::vector<int> ck(edges.size());
        for (size_t e = 0; e < edges.size(); ++e) ck[e] = negatives[e][k];
        logits = hcat(logits, neg(rows_dist(U, gather_rows(points, ck), s)));
    }
    Var nll = sub(logsumexp_rows(logits), col(logits, 0));
    return sum(nll);
}

Var loss_fd(Tape& t, Var points, const Space& s, const std::vector<std::pair<int, int>>& pos,
            const std::vector<std::pair<int, int>>& neg) {
    if (points.tape != &t) throw ConfigError("loss_fd: var from another tape");
    auto gather_pair_dist = [&](const std::vector<std::pair<int, int>>& es) {
        std::vector<int> a, b;
        a.reserve(es.size());
        b.reserve(es.size());
        for (auto [u, v] : es) {
            a.push_back(u);
            b.push_back(v);
        }
        return rows_dist(gather_rows(points, a), gather_rows(points, b), s);
    };
    // -log P(u,v) = softplus(d-2); -log(1-P) = softplus(d-2) - (d-2)
    Var dp = add_scalar(gather_pair_dist(pos), -2.0);
    Var lp = sum(softplus(dp));
    if (neg.empty()) return lp;
    Var dn = add_scalar(gather_pair_dist(neg), -2.0);
    Var ln = sum(sub(softplus(dn), dn));
    return add(lp, ln);
}

Var loss_lr(Tape& t, Var points, const Space& s, Var head_w, Var head_b,
            const std::vector<int>& nodes, const std::vector<int>& labels, int nc) {
    if (points.tape != &t) throw ConfigError("loss_lr: var from another tape");
    for (int v : nodes)
        if (labels[v] < 0) throw DataError("loss_lr: unlabeled node in split");
    Var Z = gather_rows(log0(points, s), nodes);
    long n = static_cast<long>(nodes.size());
    Var logits = add(matmul(Z, transpose(head_w)), bc_row(head_b, n));
    Mat onehot = Mat::Zero(n, nc);
    for (long i = 0; i < n; ++i) onehot(i, labels[nodes[i]]) = 1.0;
    Var nll = sub(logsumexp_rows(logits), sum_rows(cmul(logits, onehot)));
    return sum(nll);
}

double fd_accuracy(const EmbeddingTable& E, const std::vector<std::pair<int, int>>& pos,
                   const std::vector<std::pair<int, int>>& neg) {
    long hit = 0, total = 0;
    for (auto [u, v] : pos) {
        hit += manifold::distance(E.point(u), E.point(v), E.space) < 2.0;
        ++total;
    }
    for (auto [u, v] : neg) {
        hit += manifold::distance(E.point(u), E.point(v), E.space) >= 2.0;
        ++total;
    }
    return total ? double(hit) / double(total) : 0.0;
}

double hr_accuracy(const EmbeddingTable& E, const std::vector<std::pair<int, int>>& edges,
                   const std::vector<std::array<int, 10>>& negatives) {
    if (edges.empty()) return 0.0;
    long hit = 0;
    for (size_t e = 0; e < edges.size(); ++e) {
        auto [u, v] = edges[e];
        double dpos = manifold::distance(E.point(u), E.point(v), E.space);
        bool best = true;
        for (int w : negatives[e])
            if (manifold::distance(E.point(u), E.point(w), E.space) <= dpos) {
                best = false;
                break;
            }
        hit += best;
    }
    return double(hit) / double(edges.size());
}

double lr_accuracy(const EmbeddingTable& E, const Mat& head_w, const Mat& head_b,
                   const std::vector<int>& nodes, const std::vector<int>& labels) {
    if (nodes.empty()) return 0.0;
    long hit = 0;
    Space s = E.space;
    Vec o = manifold::origin(s, s.intrinsic_dim(static_cast<int>(E.X.cols())));
    for (int v : nodes) {
        Vec z = manifold::ambient_to_tangent0(manifold::log_map(o, E.point(v), s), s);
        Vec logits = head_w * z + head_b.transpose();
        int arg = 0;
        logits.maxCoeff(&arg);
        hit += arg == labels[v];
    }
    return double(hit) / double(nodes.size());
}

}  // namespace hrcb
