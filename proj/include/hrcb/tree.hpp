#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hrcb/common.hpp"

namespace hrcb {

// Rooted tree with levels (root = 1), subtree heights (leaf = 0), optional
// class labels and, for structures assembled from several trees, an origin
// tag per node (-1 marks a node shared between trees).
struct Hierarchy {
    int n = 0;
    int root = 0;
    std::vector<int> parent;                 // -1 for the root
    std::vector<std::vector<int>> children;  // stored order = traversal order
    std::vector<int> level;
    std::vector<int> subtree_height;
    int height = 0;  // H = max level
    std::vector<int> label;       // -1 = no class; empty if unlabeled
    std::vector<int> origin_tag;  // empty if not a mixed structure
    std::string provenance;       // JSON text: generator params / source path / seed

    int num_classes() const;
    std::vector<int> bfs_order() const;
    std::vector<std::pair<int, int>> edges() const;  // (parent, child)
    void validate() const;

    static Hierarchy from_parents(const std::vector<int>& parent);
};

// Descriptor parameters for the stochastic generator.
struct GenParams {
    double alpha_r = 1.0;  // within [0,1]
    double alpha_t = 1.0;  // > 0
    double beta_mu_s = 3.0, beta_mu_e = 3.0;      // > 0
    double beta_t_mu = 1.0;                       // > 0
    double beta_sigma_s = 0.0, beta_sigma_e = 0.0;  // >= 0
    double beta_t_sigma = 1.0;                    // > 0
    int target_n = 0;                             // |V|
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_json() const;
    static GenParams from_json(const std::string& text);
};

struct MixParams {
    double gamma_mu = 0.0;     // >= 0
    double gamma_sigma = 0.0;  // >= 0
    std::uint64_t seed = 0;
};

struct StructureProfile {
    double i_b = 0.0;  // [0,1)
    double i_d = 0.5;  // (0,1)
    int height = 0;
    int n = 0;
};

// A union of trees with overlapped nodes: a general graph.
struct MixedGraph {
    int n = 0;
    std::vector<std::pair<int, int>> edges;       // union of all tree edges
    std::vector<int> origin_tag;                  // -1 for merged nodes
    std::vector<std::vector<int>> node_map;       // node_map[t][orig id] = merged id
    std::vector<Hierarchy> parts;
    int total_merges = 0;
};

// f_s(x) = 2/(1+e^-x) - 1, the [0,1) squashing used by the descriptors.
double squash(double x);

double compute_IB(const Hierarchy& h);
double compute_ID(const Hierarchy& h);  // rejects H < 2
StructureProfile profile(const Hierarchy& h);

Hierarchy generate_tree(const GenParams& p);

MixedGraph mix_trees(const std::vector<Hierarchy>& trees, const MixParams& m);

// Labels nc equal-size connected branches; everything else gets -1.
// nc == 1 labels every node (single class spanning the whole tree).
void assign_classes(Hierarchy& h, int nc, std::uint64_t seed = 0);

struct HillClimbResult {
    GenParams params;
    Hierarchy tree;
    double gap = 0.0;  // |I_B - target_B| + |I_D - target_D| of the returned tree
    int evals = 0;
};

HillClimbResult hillclimb_structure(double target_ib, double target_id, int n, int budget,
                                    std::uint64_t seed = 0);

// Edge list: one "parent child" pair per line. The root is the unique node
// with in-degree zero; cycles, multi-roots and forests are rejected with
// line-level diagnostics where applicable.
Hierarchy load_edge_list(const std::string& path);
void save_edge_list(const Hierarchy& h, const std::string& path);

void save_labels(const Hierarchy& h, const std::string& path);
void load_labels(Hierarchy& h, const std::string& path);

// Structured (JSON) serialization with profile and provenance.
void save_hierarchy(const Hierarchy& h, const std::string& path);
Hierarchy load_hierarchy(const std::string& path);

void save_mixed(const MixedGraph& g, const std::string& path);
MixedGraph load_mixed(const std::string& path);

}  // namespace hrcb
