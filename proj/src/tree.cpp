#include "hrcb/tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hrcb {

using json = nlohmann::json;

int Hierarchy::num_classes() const {
    int nc = 0;
    for (int l : label) nc = std::max(nc, l + 1);
    return nc;
}

std::vector<int> Hierarchy::bfs_order() const {
    std::vector<int> order;
    order.reserve(n);
    std::deque<int> q{root};
    while (!q.empty()) {
        int v = q.front();
        q.pop_front();
        order.push_back(v);
        for (int c : children[v]) q.push_back(c);
    }
    return order;
}

std::vector<std::pair<int, int>> Hierarchy::edges() const {
    std::vector<std::pair<int, int>> e;
    e.reserve(n - 1);
    for (int v = 0; v < n; ++v)
        if (parent[v] >= 0) e.emplace_back(parent[v], v);
    return e;
}

void Hierarchy::validate() const {
    if (n <= 0) throw DataError("empty hierarchy");
    if (static_cast<int>(parent.size()) != n) throw DataError("parent array size mismatch");
    int roots = 0;
    for (int v = 0; v < n; ++v)
        if (parent[v] < 0) ++roots;
    if (roots != 1) throw DataError("hierarchy must have exactly one root, found " + std::to_string(roots));
    if (parent[root] != -1) throw DataError("root id inconsistent with parent map");
    if (static_cast<int>(bfs_order().size()) != n) throw DataError("parent map unreachable nodes or cycle");
}

namespace {

void finalize_structure(Hierarchy& h) {
    h.children.assign(h.n, {});
    for (int v = 0; v < h.n; ++v)
        if (h.parent[v] >= 0) h.children[h.parent[v]].push_back(v);
    h.validate();
    h.level.assign(h.n, 0);
    h.level[h.root] = 1;
    h.height = 1;
    auto order = h.bfs_order();
    for (int v : order) {
        for (int c : h.children[v]) {
            h.level[c] = h.level[v] + 1;
            h.height = std::max(h.height, h.level[c]);
        }
    }
    h.subtree_height.assign(h.n, 0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int v = *it;
        int best = -1;
        for (int c : h.children[v]) best = std::max(best, h.subtree_height[c]);
        h.subtree_height[v] = best + 1;  // leaves get 0
    }
}

}  // namespace

Hierarchy Hierarchy::from_parents(const std::vector<int>& parent) {
    Hierarchy h;
    h.n = static_cast<int>(parent.size());
    h.parent = parent;
    h.root = -1;
    for (int v = 0; v < h.n; ++v)
        if (parent[v] < 0) h.root = v;
    if (h.root < 0) throw DataError("no root in parent map");
    finalize_structure(h);
    return h;
}

double squash(double x) { return 2.0 / (1.0 + std::exp(-x)) - 1.0; }

double compute_IB(const Hierarchy& h) {
    double acc = 0.0;
    for (int v = 0; v < h.n; ++v) {
        const auto& ch = h.children[v];
        if (ch.size() < 2) continue;
        double mean = 0.0;
        for (int c : ch) mean += h.subtree_height[c];
        mean /= static_cast<double>(ch.size());
        double var = 0.0;
        for (int c : ch) {
            double d = h.subtree_height[c] - mean;
            var += d * d;
        }
        var /= static_cast<double>(ch.size());
        acc += std::sqrt(var);
    }
    return squash(acc / static_cast<double>(h.n));
}

namespace {

// DCG over the sequence of per-level mean degrees; computed with the largest
// exponent factored out so huge degrees do not overflow.
double fdcg_shifted(const std::vector<double>& d, double shift) {
    double acc = 0.0;
    for (size_t i = 0; i < d.size(); ++i)
        acc += (std::exp2(d[i] - shift) - std::exp2(-shift)) / std::log2(static_cast<double>(i) + 2.0);
    return acc;
}

}  // namespace

double compute_ID(const Hierarchy& h) {
    if (h.height < 2) throw ConfigError("compute_ID: height must be >= 2");
    // mean child count of non-leaf nodes for levels 1..H-1
    std::vector<double> sum(h.height + 1, 0.0);
    std::vector<int> cnt(h.height + 1, 0);
    for (int v = 0; v < h.n; ++v) {
        if (h.children[v].empty()) continue;
        sum[h.level[v]] += static_cast<double>(h.children[v].size());
        cnt[h.level[v]] += 1;
    }
    std::vector<double> d;
    for (int l = 1; l <= h.height - 1; ++l) {
        if (cnt[l] == 0) throw DataError("compute_ID: level without non-leaf nodes below the height");
        d.push_back(sum[l] / cnt[l]);
    }
    double mean = std::accumulate(d.begin(), d.end(), 0.0) / d.size();
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    var /= static_cast<double>(d.size());

    std::vector<double> asc = d, desc = d;
    std::sort(asc.begin(), asc.end());
    std::sort(desc.begin(), desc.end(), std::greater<>());
    double shift = desc.empty() ? 0.0 : desc.front();
    double fd = fdcg_shifted(d, shift);
    double fo = fdcg_shifted(asc, shift);
    double fr = fdcg_shifted(desc, shift);
    double den = fr - fo;
    if (den == 0.0) return 0.5;  // all level means equal
    double ratio = (fd - fo) / den;
    return 1.0 / (1.0 + std::exp(-var * (ratio - 0.5)));
}

StructureProfile profile(const Hierarchy& h) {
    StructureProfile p;
    p.n = h.n;
    p.height = h.height;
    p.i_b = compute_IB(h);
    p.i_d = h.height >= 2 ? compute_ID(h) : 0.5;
    return p;
}

void GenParams::validate() const {
    if (!(alpha_r >= 0.0 && alpha_r <= 1.0)) throw ConfigError("GenParams: alpha_r must be in [0,1]");
    if (!(alpha_t > 0.0)) throw ConfigError("GenParams: alpha_t must be > 0");
    if (!(beta_mu_s > 0.0) || !(beta_mu_e > 0.0)) throw ConfigError("GenParams: beta_mu must be > 0");
    if (!(beta_t_mu > 0.0) || !(beta_t_sigma > 0.0)) throw ConfigError("GenParams: beta_t must be > 0");
    if (beta_sigma_s < 0.0 || beta_sigma_e < 0.0) throw ConfigError("GenParams: beta_sigma must be >= 0");
    if (target_n < 1) throw ConfigError("GenParams: target size must be >= 1");
}

std::string GenParams::to_json() const {
    json j{{"alpha_r", alpha_r},       {"alpha_t", alpha_t},         {"beta_mu_s", beta_mu_s},
           {"beta_mu_e", beta_mu_e},   {"beta_t_mu", beta_t_mu},     {"beta_sigma_s", beta_sigma_s},
           {"beta_sigma_e", beta_sigma_e}, {"beta_t_sigma", beta_t_sigma}, {"n", target_n},
           {"seed", seed}};
    return j.dump();
}

GenParams GenParams::from_json(const std::string& text) {
    json j = json::parse(text);
    GenParams p;
    p.alpha_r = j.at("alpha_r");
    p.alpha_t = j.at("alpha_t");
    p.beta_mu_s = j.at("beta_mu_s");
    p.beta_mu_e = j.at("beta_mu_e");
    p.beta_t_mu = j.at("beta_t_mu");
    p.beta_sigma_s = j.at("beta_sigma_s");
    p.beta_sigma_e = j.at("beta_sigma_e");
    p.beta_t_sigma = j.at("beta_t_sigma");
    p.target_n = j.at("n");
    p.seed = j.at("seed");
    return p;
}

Hierarchy generate_tree(const GenParams& p) {
    p.validate();
    Rng rng(derive_seed(p.seed, "treegen"));
    const int target = p.target_n;

    std::vector<int> parent{-1};
    std::vector<double> fertility{1.0};  // P_r(V0) = 1
    std::deque<int> frontier{0};
    int generated = 1;

    while (generated < target && !frontier.empty()) {
        int v = frontier.front();
        frontier.pop_front();
        if (rng.uniform() >= fertility[v]) continue;  // one Bernoulli at expansion time
        int remaining = target - generated;
        if (remaining <= 0) break;
        double prog = target > 1 ? static_cast<double>(generated - 1) / static_cast<double>(target - 1) : 0.0;
        double mu = p.beta_mu_s + (p.beta_mu_e - p.beta_mu_s) * std::pow(prog, p.beta_t_mu);
        double sg = p.beta_sigma_s + (p.beta_sigma_e - p.beta_sigma_s) * std::pow(prog, p.beta_t_sigma);
        double raw = rng.gaussian(mu, sg);
        long k = static_cast<long>(std::floor(raw + 0.5));
        k = std::clamp(k, 1L, static_cast<long>(remaining));
        for (long i = 1; i <= k; ++i) {
            double factor = 1.0;
            if (k >= 2)
                factor = p.alpha_r + (1.0 - p.alpha_r) *
                                         std::pow(static_cast<double>(k - i) / static_cast<double>(k - 1), p.alpha_t);
            parent.push_back(v);
            fertility.push_back(factor * fertility[v]);
            frontier.push_back(static_cast<int>(parent.size()) - 1);
            ++generated;
        }
    }
    Hierarchy h = Hierarchy::from_parents(parent);
    json prov{{"generator", json::parse(p.to_json())}};
    h.provenance = prov.dump();
    return h;
}

MixedGraph mix_trees(const std::vector<Hierarchy>& trees, const MixParams& m) {
    if (trees.size() < 2) throw ConfigError("mix_trees: need at least two trees");
    Rng rng(derive_seed(m.seed, "mix"));
    const int t = static_cast<int>(trees.size());

    // global ids before merging
    std::vector<int> offset(t, 0);
    int total = 0;
    for (int i = 0; i < t; ++i) {
        offset[i] = total;
        total += trees[i].n;
    }
    // union-find over global ids
    std::vector<int> uf(total);
    std::iota(uf.begin(), uf.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (uf[x] != x) x = uf[x] = uf[uf[x]];
        return x;
    };

    std::vector<std::set<int>> used(t);  // per-tree nodes already overlapped
    int merges = 0;
    std::vector<std::pair<int, int>> merged_globals;
    for (int i = 0; i < t; ++i) {
        for (int j = i + 1; j < t; ++j) {
            double frac = rng.gaussian(m.gamma_mu, m.gamma_sigma);
            long want = static_cast<long>(std::floor(frac * std::min(trees[i].n, trees[j].n)));
            if (want < 0) want = 0;
            long avail = std::min<long>(trees[i].n - 1 - used[i].size(), trees[j].n - 1 - used[j].size());
            if (want > avail) want = avail;  // clamp; nothing left to overlap
            for (long s = 0; s < want; ++s) {
                int a, b;
                do {
                    a = 1 + static_cast<int>(rng.below(trees[i].n - 1));  // roots excluded
                } while (used[i].count(a));
                do {
                    b = 1 + static_cast<int>(rng.below(trees[j].n - 1));
                } while (used[j].count(b));
                used[i].insert(a);
                used[j].insert(b);
                int ga = find(offset[i] + a), gb = find(offset[j] + b);
                if (ga != gb) {
                    uf[ga] = gb;
                    ++merges;
                }
                merged_globals.emplace_back(offset[i] + a, offset[j] + b);
            }
        }
    }

    // compress to dense ids
    std::map<int, int> dense;
    MixedGraph g;
    auto id_of = [&](int global) {
        int r = find(global);
        auto it = dense.find(r);
        if (it != dense.end()) return it->second;
        int id = static_cast<int>(dense.size());
        dense[r] = id;
        return id;
    };
    std::vector<std::vector<int>> node_map(t);
    for (int i = 0; i < t; ++i) {
        node_map[i].resize(trees[i].n);
        for (int v = 0; v < trees[i].n; ++v) node_map[i][v] = id_of(offset[i] + v);
    }
    g.n = static_cast<int>(dense.size());
    g.origin_tag.assign(g.n, -2);
    for (int i = 0; i < t; ++i)
        for (int v = 0; v < trees[i].n; ++v) {
            int id = node_map[i][v];
            if (g.origin_tag[id] == -2)
                g.origin_tag[id] = i;
            else if (g.origin_tag[id] != i)
                g.origin_tag[id] = -1;  // shared between trees
        }
    std::set<std::pair<int, int>> eset;
    for (int i = 0; i < t; ++i)
        for (auto [a, b] : trees[i].edges()) {
            int u = node_map[i][a], v = node_map[i][b];
            if (u == v) continue;
            eset.insert({std::min(u, v), std::max(u, v)});
        }
    g.edges.assign(eset.begin(), eset.end());
    g.node_map = std::move(node_map);
    g.parts = trees;
    g.total_merges = merges;
    return g;
}

namespace {

// Greedy bottom-up cut: maximal number of disjoint subtrees of size >= t,
// never cutting at the root. Returns cut roots in post-order.
std::vector<int> greedy_cuts(const Hierarchy& h, int t) {
    std::vector<int> size(h.n, 0), cuts;
    auto order = h.bfs_order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        int v = *it;
        int s = 1;
        for (int c : h.children[v]) s += size[c];
        if (v != h.root && s >= t) {
            cuts.push_back(v);
            s = 0;
        }
        size[v] = s;
    }
    std::reverse(cuts.begin(), cuts.end());  // deterministic deep-first order
    return cuts;
}

}  // namespace

void assign_classes(Hierarchy& h, int nc, std::uint64_t /*seed*/) {
    if (nc < 1) throw ConfigError("assign_classes: nc must be >= 1");
    h.label.assign(h.n, -1);
    if (nc == 1) {
        // single class covering the whole tree
        std::fill(h.label.begin(), h.label.end(), 0);
        return;
    }
    if (nc > h.n - 1) throw ConfigError("assign_classes: nc exceeds feasible branch partition");
    // largest t such that nc disjoint non-root subtrees of size >= t exist
    int lo = 1, hi = (h.n - 1) / nc;
    int best = 0;
    while (lo <= hi) {
        int mid = (lo + hi) / 2;
        if (static_cast<int>(greedy_cuts(h, mid).size()) >= nc) {
            best = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    if (best == 0) throw ConfigError("assign_classes: nc exceeds feasible branch partition");
    auto cuts = greedy_cuts(h, best);
    cuts.resize(nc);
    // Each class is a BFS prefix of its cut component, trimmed to exactly
    // `best` nodes so class sizes are equal.
    std::vector<char> is_cut(h.n, 0);
    for (int c : cuts) is_cut[c] = 1;
    for (int cls = 0; cls < nc; ++cls) {
        int taken = 0;
        std::deque<int> q{cuts[cls]};
        while (!q.empty() && taken < best) {
            int v = q.front();
            q.pop_front();
            h.label[v] = cls;
            ++taken;
            for (int c : h.children[v])
                if (!is_cut[c]) q.push_back(c);
        }
    }
}

HillClimbResult hillclimb_structure(double target_ib, double target_id, int n, int budget,
                                    std::uint64_t seed) {
    if (!(target_ib >= 0.0 && target_ib < 1.0) || !(target_id > 0.0 && target_id < 1.0))
        throw ConfigError("hillclimb_structure: targets out of range");
    Rng rng(derive_seed(seed, "hillclimb"));
    std::uint64_t gen_seed = derive_seed(seed, "hillclimb-gen");

    auto gap_of = [&](const GenParams& p) {
        Hierarchy h = generate_tree(p);
        auto pr = profile(h);
        return std::abs(pr.i_b - target_ib) + std::abs(pr.i_d - target_id);
    };
    auto clamp_params = [](GenParams& p) {
        p.alpha_r = std::clamp(p.alpha_r, 0.0, 1.0);
        p.alpha_t = std::clamp(p.alpha_t, 1e-3, 50.0);
        p.beta_mu_s = std::clamp(p.beta_mu_s, 1e-2, 200.0);
        p.beta_mu_e = std::clamp(p.beta_mu_e, 1e-2, 200.0);
        p.beta_t_mu = std::clamp(p.beta_t_mu, 1e-2, 20.0);
        p.beta_sigma_s = std::clamp(p.beta_sigma_s, 0.0, 50.0);
        p.beta_sigma_e = std::clamp(p.beta_sigma_e, 0.0, 50.0);
        p.beta_t_sigma = std::clamp(p.beta_t_sigma, 1e-2, 20.0);
    };

    GenParams cur;
    cur.target_n = n;
    cur.seed = gen_seed;
    int evals = 0;
    double cur_gap = gap_of(cur);
    ++evals;
    GenParams best_p = cur;
    double best_gap = cur_gap;

    double step = 0.4;
    int since_improve = 0;
    while (evals < budget && best_gap > 1e-4) {
        GenParams cand = cur;
        int coord = static_cast<int>(rng.below(8));
        double g = rng.gaussian();
        double* fields[8] = {&cand.alpha_r,      &cand.alpha_t,      &cand.beta_mu_s,
                             &cand.beta_mu_e,    &cand.beta_t_mu,    &cand.beta_sigma_s,
                             &cand.beta_sigma_e, &cand.beta_t_sigma};
        double& f = *fields[coord];
        if (f == 0.0)
            f = 0.05 * std::abs(g);
        else
            f *= std::exp(step * g);
        clamp_params(cand);
        double g2 = gap_of(cand);
        ++evals;
        if (g2 < cur_gap) {
            cur = cand;
            cur_gap = g2;
            since_improve = 0;
            if (g2 < best_gap) {
                best_gap = g2;
                best_p = cand;
            }
        } else if (++since_improve >= 50) {
            step *= 0.5;
            since_improve = 0;
        }
    }
    HillClimbResult r;
    r.params = best_p;
    r.tree = generate_tree(best_p);
    r.gap = best_gap;
    r.evals = evals;
    return r;
}

Hierarchy load_edge_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<std::pair<long, long>> raw;
    std::string line;
    int lineno = 0;
    std::set<long> ids;
    while (std::getline(f, line)) {
        ++lineno;
        std::istringstream is(line);
        long a, b;
        if (line.empty() || line[0] == '#') continue;
        if (!(is >> a >> b) || a < 0 || b < 0) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed edge line");
        }
        raw.emplace_back(a, b);
        ids.insert(a);
        ids.insert(b);
    }
    if (raw.empty()) throw DataError(path + ": no edges");
    std::map<long, int> rename;
    for (long id : ids) rename[id] = static_cast<int>(rename.size());
    int n = static_cast<int>(rename.size());
    std::vector<int> parent(n, -1);
    std::vector<char> has_parent(n, 0);
    for (auto [a, b] : raw) {
        int u = rename[a], v = rename[b];
        if (has_parent[v]) throw DataError(path + ": node " + std::to_string(b) + " has multiple parents");
        parent[v] = u;
        has_parent[v] = 1;
    }
    int roots = 0;
    for (int v = 0; v < n; ++v)
        if (!has_parent[v]) ++roots;
    if (roots == 0) throw DataError(path + ": cycle detected (no in-degree-0 node)");
    if (roots > 1) throw DataError(path + ": disconnected forest or multiple roots (" + std::to_string(roots) + ")");
    // cycle in a functional graph with one root would leave unreachable nodes;
    // from_parents validates reachability.
    Hierarchy h = Hierarchy::from_parents(parent);
    json prov{{"source", path}};
    h.provenance = prov.dump();
    return h;
}

void save_edge_list(const Hierarchy& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    for (auto [p, c] : h.edges()) f << p << ' ' << c << '\n';
}

void save_labels(const Hierarchy& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    for (int v = 0; v < h.n; ++v) f << v << ' ' << (h.label.empty() ? -1 : h.label[v]) << '\n';
}

void load_labels(Hierarchy& h, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    h.label.assign(h.n, -1);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        long v, c;
        if (!(is >> v >> c) || v < 0 || v >= h.n)
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed label line");
        h.label[v] = static_cast<int>(c);
    }
}

namespace {

json hierarchy_to_json(const Hierarchy& h) {
    json j;
    j["n"] = h.n;
    j["root"] = h.root;
    j["parents"] = h.parent;
    if (!h.label.empty()) j["labels"] = h.label;
    if (!h.origin_tag.empty()) j["origin_tags"] = h.origin_tag;
    auto p = profile(h);
    j["profile"] = {{"I_B", p.i_b}, {"I_D", p.i_d}, {"H", p.height}};
    if (!h.provenance.empty()) j["provenance"] = json::parse(h.provenance);
    return j;
}

Hierarchy hierarchy_from_json(const json& j) {
    Hierarchy h = Hierarchy::from_parents(j.at("parents").get<std::vector<int>>());
    if (j.contains("labels")) h.label = j.at("labels").get<std::vector<int>>();
    if (j.contains("origin_tags")) h.origin_tag = j.at("origin_tags").get<std::vector<int>>();
    if (j.contains("provenance")) h.provenance = j.at("provenance").dump();
    return h;
}

}  // namespace

void save_hierarchy(const Hierarchy& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << hierarchy_to_json(h).dump(2) << '\n';
}

Hierarchy load_hierarchy(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j = json::parse(f);
    return hierarchy_from_json(j);
}

void save_mixed(const MixedGraph& g, const std::string& path) {
    json j;
    j["n"] = g.n;
    j["edges"] = g.edges;
    j["origin_tags"] = g.origin_tag;
    j["node_map"] = g.node_map;
    j["total_merges"] = g.total_merges;
    j["mixing"] = {{"pairs", "all-unordered"}};
    json parts = json::array();
    for (const auto& p : g.parts) parts.push_back(hierarchy_to_json(p));
    j["parts"] = parts;
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump() << '\n';
}

MixedGraph load_mixed(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j = json::parse(f);
    MixedGraph g;
    g.n = j.at("n");
    g.edges = j.at("edges").get<std::vector<std::pair<int, int>>>();
    g.origin_tag = j.at("origin_tags").get<std::vector<int>>();
    g.node_map = j.at("node_map").get<std::vector<std::vector<int>>>();
    g.total_merges = j.at("total_merges");
    for (const auto& pj : j.at("parts")) g.parts.push_back(hierarchy_from_json(pj));
    return g;
}

}  // namespace hrcb
