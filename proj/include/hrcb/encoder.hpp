#pragma once

#include <memory>
#include <optional>
#include <string>

#include "hrcb/diff.hpp"
#include "hrcb/optim.hpp"

namespace hrcb {

enum class Arch { MLP, GCN, GAT };

std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct EncoderConfig {
    Arch arch = Arch::MLP;
    Space space;
    int input_dim = 16;
    int hidden_dim = 16;
    int output_dim = 2;
    int layers = 2;
    int heads = 4;  // GAT heads, averaged in tangent space
    // Unmasked softmax of the distance-matrix/adjacency product instead of
    // the neighbor-masked softmax of negative distances. Dense; small graphs.
    bool attention_literal = false;
};

// Row-normalized adjacency with self-loops plus the edge list the sparse
// attention path iterates (grouped by destination row).
struct Adjacency {
    int n = 0;
    std::shared_ptr<const ad::SpMat> norm;
    std::shared_ptr<const std::vector<std::pair<int, int>>> loops;  // (dst, src)
    std::shared_ptr<const std::vector<int>> segments;               // dst per entry
    ad::Mat dense;                                                  // kept for the literal path
};

Adjacency build_adjacency(int n, const std::vector<std::pair<int, int>>& edges);

// Trainable-table featurization: rows are tangent vectors at the origin
// unless the table itself lives on the manifold.
EmbeddingTable embed_inputs(const ad::Mat& table, const Space& s, bool table_on_manifold = false);

// Tensor layout: [prefix]input_table, [prefix]L<i>.W (or .W<h> per GAT head),
// [prefix]L<i>.b. with_table=false builds an encoder that consumes points
// produced upstream.
ModelParams init_encoder_params(const EncoderConfig& cfg, int n_nodes, std::uint64_t seed,
                                bool table_on_manifold = false, const std::string& prefix = "",
                                bool with_table = true);

// Forward pass; leaves[i] is the tape var for params.tensors[i]. Returns the
// final on-manifold point rows (n x ambient).
ad::Var encoder_forward(ad::Tape& t, const EncoderConfig& cfg, const ModelParams& params,
                        const std::vector<ad::Var>& leaves, const Adjacency& adj,
                        const std::string& prefix = "",
                        std::optional<ad::Var> input_points = {});

// Single layers, exposed for composition and tests.
ad::Var mlp_layer(ad::Tape& t, const EncoderConfig& cfg, ad::Var X, ad::Var W, ad::Var b);
ad::Var gcn_layer(ad::Tape& t, const EncoderConfig& cfg, ad::Var X, const Adjacency& adj, ad::Var W,
                  ad::Var b);
ad::Var gat_layer(ad::Tape& t, const EncoderConfig& cfg, ad::Var X, const Adjacency& adj,
                  const std::vector<ad::Var>& head_W, ad::Var b);

}  // namespace hrcb
