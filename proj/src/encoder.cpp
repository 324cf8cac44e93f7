#include "hrcb/encoder.hpp"

#include <algorithm>
#include <set>

namespace hrcb {

using namespace ad;

std::string to_string(Arch a) {
    switch (a) {
        case Arch::MLP: return "mlp";
        case Arch::GCN: return "gcn";
        case Arch::GAT: return "gat";
    }
    return "?";
}

Arch arch_from_string(const std::string& s) {
    if (s == "mlp" || s == "MLP") return Arch::MLP;
    if (s == "gcn" || s == "GCN") return Arch::GCN;
    if (s == "gat" || s == "GAT") return Arch::GAT;
    throw ConfigError("unknown architecture: " + s);
}

Adjacency build_adjacency(int n, const std::vector<std::pair<int, int>>& edges) {
    Adjacency adj;
    adj.n = n;
    std::vector<std::set<int>> nb(n);
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n) throw ConfigError("adjacency: edge endpoint out of range");
        if (a == b) continue;
        nb[a].insert(b);
        nb[b].insert(a);
    }
    for (int v = 0; v < n; ++v) nb[v].insert(v);  // self-loops

    auto loops = std::make_shared<std::vector<std::pair<int, int>>>();
    auto segs = std::make_shared<std::vector<int>>();
    std::vector<Eigen::Triplet<double>> trip;
    for (int v = 0; v < n; ++v) {
        double w = 1.0 / static_cast<double>(nb[v].size());
        for (int u : nb[v]) {
            trip.emplace_back(v, u, w);
            loops->emplace_back(v, u);
            segs->push_back(v);
        }
    }
    auto sp = std::make_shared<SpMat>(n, n);
    sp->setFromTriplets(trip.begin(), trip.end());
    adj.norm = sp;
    adj.loops = loops;
    adj.segments = segs;
    adj.dense = Mat(*sp);
    return adj;
}

EmbeddingTable embed_inputs(const Mat& table, const Space& s, bool table_on_manifold) {
    EmbeddingTable E;
    E.space = s;
    if (table_on_manifold || s.kind == SpaceKind::Euclidean) {
        E.X = table;
        return E;
    }
    int d = static_cast<int>(table.cols());
    Vec o = manifold::origin(s, d);
    E.X = Mat(table.rows(), s.ambient_dim(d));
    for (long i = 0; i < table.rows(); ++i) {
        Vec z = manifold::tangent0_to_ambient(table.row(i).transpose(), s);
        E.X.row(i) = manifold::exp_map(o, z, s).transpose();
    }
    return E;
}

ModelParams init_encoder_params(const EncoderConfig& cfg, int n_nodes, std::uint64_t seed,
                                bool table_on_manifold, const std::string& prefix, bool with_table) {
    if (cfg.input_dim <= 0 || cfg.hidden_dim <= 0 || cfg.output_dim <= 0)
        throw ConfigError("encoder dims must be positive");
    Rng rng(derive_seed(seed, "encoder-init" + prefix));
    ModelParams p;
    auto gaussian_mat = [&](int r, int c, double std) {
        Mat m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian(0.0, std);
        return m;
    };
    if (with_table) {
        Mat table = gaussian_mat(n_nodes, cfg.input_dim, 0.1);
        TensorSpec t{prefix + "input_table", table, true, false, cfg.space};
        if (table_on_manifold) {
            t.value = embed_inputs(table, cfg.space, false).X;
            t.on_manifold = true;
        }
        p.tensors.push_back(std::move(t));
    }
    for (int l = 0; l < cfg.layers; ++l) {
        int din = l == 0 ? cfg.input_dim : cfg.hidden_dim;
        int dout = l == cfg.layers - 1 ? cfg.output_dim : cfg.hidden_dim;
        std::string base = prefix + "L" + std::to_string(l) + ".";
        if (cfg.arch == Arch::GAT) {
            for (int h = 0; h < cfg.heads; ++h)
                p.tensors.push_back({base + "W" + std::to_string(h),
                                     gaussian_mat(dout, din, 1.0 / std::sqrt(double(din))), true,
                                     false, cfg.space});
        } else {
            p.tensors.push_back({base + "W", gaussian_mat(dout, din, 1.0 / std::sqrt(double(din))),
                                 true, false, cfg.space});
        }
        p.tensors.push_back({base + "b", Mat::Zero(1, dout), true, false, cfg.space});
    }
    return p;
}

namespace {

// activation in the tangent space at the origin
Var activate(Var points, const Space& s) {
    return exp0(relu(log0(points, s)), s);
}

Var head_average(std::vector<Var> parts) {
    Var acc = parts[0];
    for (size_t i = 1; i < parts.size(); ++i) acc = add(acc, parts[i]);
    return scale(acc, 1.0 / static_cast<double>(parts.size()));
}

}  // namespace

Var mlp_layer(Tape& t, const EncoderConfig& cfg, Var X, Var W, Var b) {
    if (X.tape != &t) throw ConfigError("mlp_layer: var from another tape");
    Var Z = log0(X, cfg.space);
    Var Zw = matmul(Z, transpose(W));
    Var P = exp0(Zw, cfg.space);
    Var Pb = bias_translate(P, b, cfg.space);
    return activate(Pb, cfg.space);
}

Var gcn_layer(Tape& t, const EncoderConfig& cfg, Var X, const Adjacency& adj, Var W, Var b) {
    if (X.tape != &t) throw ConfigError("gcn_layer: var from another tape");
    Var Z = log0(X, cfg.space);
    Var Zw = matmul(Z, transpose(W));
    Var Za = spmm(adj.norm, Zw);  // exp0(A log0(.)) with the round trip elided
    Var P = exp0(Za, cfg.space);
    Var Pb = bias_translate(P, b, cfg.space);
    return activate(Pb, cfg.space);
}

Var gat_layer(Tape& t, const EncoderConfig& cfg, Var X, const Adjacency& adj,
              const std::vector<Var>& head_W, Var b) {
    if (X.tape != &t) throw ConfigError("gat_layer: var from another tape");
    Var Z = log0(X, cfg.space);
    std::vector<Var> parts;
    parts.reserve(head_W.size());
    for (Var W : head_W) {
        Var Zw = matmul(Z, transpose(W));
        Var Y = exp0(Zw, cfg.space);
        Var agg;
        if (cfg.attention_literal) {
            // Softmax of the pairwise-distance/adjacency product, unmasked.
            if (adj.n > 3000) throw ConfigError("literal attention is dense; graph too large");
            Var D = pair_dist(Y, cfg.space);
            Var att = softmax_rows(matmul_c(D, adj.dense));
            agg = matmul(att, Zw);
        } else {
            std::vector<int> dst(adj.loops->size()), src(adj.loops->size());
            for (size_t e = 0; e < adj.loops->size(); ++e) {
                dst[e] = (*adj.loops)[e].first;
                src[e] = (*adj.loops)[e].second;
            }
            Var logits = neg(rows_dist(gather_rows(Y, dst), gather_rows(Y, src), cfg.space));
            Var att = segment_softmax(logits, adj.segments, adj.n);
            agg = attn_aggregate(att, adj.loops, Zw, adj.n);
        }
        parts.push_back(agg);
    }
    Var Za = head_average(std::move(parts));
    Var P = exp0(Za, cfg.space);
    Var Pb = bias_translate(P, b, cfg.space);
    return activate(Pb, cfg.space);
}

Var encoder_forward(Tape& t, const EncoderConfig& cfg, const ModelParams& params,
                    const std::vector<Var>& leaves, const Adjacency& adj, const std::string& prefix,
                    std::optional<Var> input_points) {
    if (leaves.size() != params.tensors.size())
        throw ConfigError("encoder_forward: leaf count mismatch");
    auto leaf = [&](const std::string& name) {
        int i = params.find(prefix + name);
        if (i < 0) throw ConfigError("encoder_forward: missing tensor " + prefix + name);
        return leaves[i];
    };

    Var X{nullptr, -1};
    if (input_points) {
        X = *input_points;
    } else {
        int ti = params.find(prefix + "input_table");
        if (ti < 0) throw ConfigError("encoder_forward: encoder has no input table");
        Var tablev = leaves[ti];
        X = params.tensors[ti].on_manifold ? tablev : exp0(tablev, cfg.space);
    }
    for (int l = 0; l < cfg.layers; ++l) {
        std::string base = "L" + std::to_string(l) + ".";
        Var b = leaf(base + "b");
        if (cfg.arch == Arch::MLP) {
            X = mlp_layer(t, cfg, X, leaf(base + "W"), b);
        } else if (cfg.arch == Arch::GCN) {
            X = gcn_layer(t, cfg, X, adj, leaf(base + "W"), b);
        } else {
            std::vector<Var> ws;
            for (int h = 0; h < cfg.heads; ++h) ws.push_back(leaf(base + "W" + std::to_string(h)));
            X = gat_layer(t, cfg, X, adj, ws, b);
        }
    }
    return X;
}

}  // namespace hrcb
