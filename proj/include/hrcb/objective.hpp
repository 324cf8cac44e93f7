#pragma once

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hrcb/diff.hpp"
#include "hrcb/tree.hpp"

namespace hrcb {

enum class Objective { GD, HR, FD, LR };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);

// The graph a model trains on. Single trees keep their Hierarchy for metric
// evaluation; mixed structures carry their parts plus node maps instead.
struct Dataset {
    int n = 0;
    std::vector<std::pair<int, int>> edges;  // unique undirected pairs (parent, child for trees)
    std::vector<int> labels;                 // -1 = unlabeled; may be empty
    std::optional<Hierarchy> tree;
    std::vector<Hierarchy> parts;            // mixed structures
    std::vector<std::vector<int>> part_map;  // part node id -> dataset node id

    static Dataset from_hierarchy(const Hierarchy& h);
    static Dataset from_mixed(const MixedGraph& g);
    std::vector<std::set<int>> neighbor_sets() const;
};

struct EdgeSplit {
    std::vector<std::pair<int, int>> train, dev, test;
    std::uint64_t seed = 0;
};

struct NodeSplit {
    std::vector<int> train, dev, test;
    std::uint64_t seed = 0;
};

// 8:1:1 by largest remainder, shuffled deterministically.
EdgeSplit split_edges(const Dataset& d, std::uint64_t seed);
// 3:1:6 over labeled nodes, stratified per class (largest remainder).
NodeSplit split_nodes(const Dataset& d, std::uint64_t seed);

void save_edge_split(const EdgeSplit& s, const std::string& path);
EdgeSplit load_edge_split(const std::string& path);
void save_node_split(const NodeSplit& s, const std::string& path);
NodeSplit load_node_split(const std::string& path);

// Precomputed all-pairs data for the distortion loss over one partition:
// the node list plus 1/d_G^2 and an upper-triangle mask over those nodes.
struct GdPairs {
    std::vector<int> nodes;
    ad::Mat inv_dg2;
    ad::Mat mask;
};

GdPairs build_gd_pairs(const Dataset& d, const std::vector<std::pair<int, int>>& part_edges);

// Negative samples: HR draws 10 non-neighbors of u per edge (u,v); FD draws
// one non-edge per positive. Deterministic under (seed, epoch).
std::vector<std::array<int, 10>> sample_hr_negatives(const Dataset& d,
                                                     const std::vector<std::pair<int, int>>& edges,
                                                     const std::vector<std::set<int>>& nb,
                                                     std::uint64_t seed, std::uint64_t epoch);
std::vector<std::pair<int, int>> sample_fd_negatives(const Dataset& d,
                                                     const std::vector<std::set<int>>& nb, int count,
                                                     std::uint64_t seed, std::uint64_t epoch);

// ---- losses over the tape ----
ad::Var loss_gd(ad::Tape& t, ad::Var points, const Space& s, const GdPairs& pairs);
ad::Var loss_hr(ad::Tape& t, ad::Var points, const Space& s,
                const std::vector<std::pair<int, int>>& edges,
                const std::vector<std::array<int, 10>>& negatives);
ad::Var loss_fd(ad::Tape& t, ad::Var points, const Space& s,
                const std::vector<std::pair<int, int>>& pos,
                const std::vector<std::pair<int, int>>& neg);
ad::Var loss_lr(ad::Tape& t, ad::Var points, const Space& s, ad::Var head_w, ad::Var head_b,
                const std::vector<int>& nodes, const std::vector<int>& labels, int nc);

// ---- task metrics on a fixed embedding ----
// FD: balanced threshold accuracy at P > 0.5 (equivalently d < 2).
double fd_accuracy(const EmbeddingTable& E, const std::vector<std::pair<int, int>>& pos,
                   const std::vector<std::pair<int, int>>& neg);
// HR: rank-1 retrieval of the true child among its sampled negatives.
double hr_accuracy(const EmbeddingTable& E, const std::vector<std::pair<int, int>>& edges,
                   const std::vector<std::array<int, 10>>& negatives);
double lr_accuracy(const EmbeddingTable& E, const ad::Mat& head_w, const ad::Mat& head_b,
                   const std::vector<int>& nodes, const std::vector<int>& labels);

}  // namespace hrcb
