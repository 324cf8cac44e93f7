#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <vector>

#include "hrcb/manifold.hpp"

namespace hrcb::ad {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

class Tape;

struct Var {
    Tape* tape = nullptr;
    int idx = -1;
    bool valid() const { return tape != nullptr && idx >= 0; }
};

// Reverse-mode tape over matrix values. A tape is built per forward pass and
// confined to one worker; backward() runs the recorded adjoints in reverse.
class Tape {
public:
    Var constant(Mat v);

    const Mat& val(const Var& v) const { return nodes_[check(v)].val; }
    // Zero matrix when the node never received a gradient.
    Mat grad(const Var& v) const;

    // loss must be scalar (1x1) and finite; populates gradients of every
    // node the loss depends on.
    void backward(const Var& loss);

    void clear();
    size_t size() const { return nodes_.size(); }

    // primitive support
    int push(Mat val, std::function<void(Tape&, int)> back = nullptr);
    const Mat& node_val(int i) const { return nodes_[i].val; }
    const Mat& node_grad(int i) const { return nodes_[i].grad; }
    bool node_has_grad(int i) const { return nodes_[i].has_grad; }
    void accum(int i, const Mat& g);

private:
    struct Node {
        Mat val;
        Mat grad;
        bool has_grad = false;
        std::function<void(Tape&, int)> back;
    };
    std::vector<Node> nodes_;

    int check(const Var& v) const {
        if (!v.valid() || v.tape != this || v.idx >= static_cast<int>(nodes_.size()))
            throw ConfigError("Var does not belong to this tape");
        return v.idx;
    }
    friend Var make_var(Tape& t, int idx);
};

Var make_var(Tape& t, int idx);

// ---- arithmetic primitives ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise; caller keeps b away from 0
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b);
Var matmul_c(Var a, const Mat& B);
Var c_matmul(const Mat& A, Var b);
Var spmm(std::shared_ptr<const SpMat> A, Var b);  // const sparse times var
Var transpose(Var a);
Var sum(Var a);        // 1x1
Var sum_rows(Var a);   // n x 1
Var sum_cols(Var a);   // 1 x m
Var gather_rows(Var a, std::vector<int> idx);
Var hcat(Var a, Var b);
Var col(Var a, int j);
Var cols(Var a, int j0, int m);
Var bc_col(Var a, int m);  // n x 1 -> n x m
Var bc_row(Var a, int n);  // 1 x m -> n x m
Var outer_sum(Var a, Var b);  // n x 1, m x 1 -> n x m: a_i + b_j
Var outer_diff_sq(Var a);     // n x 1 -> n x n: (a_i - a_j)^2, cancellation-free
Var cmul(Var a, const Mat& M);  // elementwise by constant
Var cadd(Var a, const Mat& M);
Var rowsumsq(Var a);  // n x 1
Var rownorm(Var a);   // n x 1, guarded backward at 0
Var rowdot(Var a, Var b);  // n x 1

// ---- elementwise unaries ----
Var relu(Var a);      // subgradient 0 at 0
Var abs_(Var a);      // subgradient 0 at 0
Var square(Var a);
Var sqrt_(Var a);     // clamped at 0, guarded derivative
Var exp_(Var a);
Var log_(Var a, double floor = 1e-15);
Var tanh_(Var a);
Var sinh_(Var a);
Var cosh_(Var a);
Var atanh_(Var a);    // argument clamped into (-1+1e-15, 1-1e-15)
Var acosh_(Var a);    // argument clamped to [1, inf); finite derivative at 1
Var softplus(Var a);
// smooth f(x)/x forms used by the exponential/logarithmic maps
Var tanhc(Var a);
Var atanhc(Var a);
Var sinhc(Var a);
Var asinhc(Var a);

// ---- softmax family ----
Var softmax_rows(Var a);
Var logsumexp_rows(Var a);  // n x 1
// per-segment softmax of a column vector (segments = row ids, pre-grouped)
Var segment_softmax(Var vals, std::shared_ptr<const std::vector<int>> seg, int nseg);
// out[dst_e] += w_e * z[src_e]
Var attn_aggregate(Var w, std::shared_ptr<const std::vector<std::pair<int, int>>> edges, Var z,
                   int n_out);

// ---- differentiable manifold operations on row-stacked points ----
// Tangent rows use intrinsic coordinates (spatial part for the hyperboloid);
// point rows use ambient coordinates.
Var exp0(Var z, const Space& s);
Var log0(Var x, const Space& s);
Var mobius_add_rows(Var x, Var y, const Space& s);          // pointwise x_i (+) y_i
Var bias_translate(Var x, Var b_tangent_row, const Space& s);  // x_i (+) exp0(b)
Var pair_dist(Var x, const Space& s);                     // n x n distances
Var rows_dist(Var x, Var y, const Space& s);              // n x 1 distances
Var dist_to_origin(Var x, const Space& s);                // n x 1

}  // namespace hrcb::ad
