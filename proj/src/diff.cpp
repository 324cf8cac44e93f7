#include "hrcb/diff.hpp"

#include <cmath>
#include <limits>

namespace hrcb::ad {

Var make_var(Tape& t, int idx) { return Var{&t, idx}; }

Var Tape::constant(Mat v) { return make_var(*this, push(std::move(v))); }

int Tape::push(Mat val, std::function<void(Tape&, int)> back) {
    nodes_.push_back(Node{std::move(val), Mat(), false, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

Mat Tape::grad(const Var& v) const {
    int i = check(v);
    if (!nodes_[i].has_grad) return Mat::Zero(nodes_[i].val.rows(), nodes_[i].val.cols());
    return nodes_[i].grad;
}

void Tape::accum(int i, const Mat& g) {
    Node& n = nodes_[i];
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

void Tape::backward(const Var& loss) {
    int li = check(loss);
    const Mat& lv = nodes_[li].val;
    if (lv.rows() != 1 || lv.cols() != 1) throw ConfigError("backward: loss must be scalar");
    if (!std::isfinite(lv(0, 0))) throw NumericError("backward: non-finite loss");
    accum(li, Mat::Ones(1, 1));
    for (int i = li; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.has_grad && n.back) n.back(*this, i);
    }
}

void Tape::clear() { nodes_.clear(); }

namespace {

Tape& tp(const Var& a) {
    if (!a.valid()) throw ConfigError("invalid Var");
    return *a.tape;
}
void same_tape(const Var& a, const Var& b) {
    if (a.tape != b.tape) throw ConfigError("Vars from different tapes");
}

constexpr double kEps = 1e-15;

}  // namespace

Var add(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    return make_var(t, t.push(t.node_val(ia) + t.node_val(ib), [ia, ib](Tape& t, int i) {
        t.accum(ia, t.node_grad(i));
        t.accum(ib, t.node_grad(i));
    }));
}

Var sub(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    return make_var(t, t.push(t.node_val(ia) - t.node_val(ib), [ia, ib](Tape& t, int i) {
        t.accum(ia, t.node_grad(i));
        t.accum(ib, -t.node_grad(i));
    }));
}

Var neg(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(-t.node_val(ia), [ia](Tape& t, int i) { t.accum(ia, -t.node_grad(i)); }));
}

Var mul(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    return make_var(t, t.push(t.node_val(ia).cwiseProduct(t.node_val(ib)), [ia, ib](Tape& t, int i) {
        t.accum(ia, t.node_grad(i).cwiseProduct(t.node_val(ib)));
        t.accum(ib, t.node_grad(i).cwiseProduct(t.node_val(ia)));
    }));
}

Var div(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    return make_var(t, t.push(t.node_val(ia).cwiseQuotient(t.node_val(ib)), [ia, ib](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        const Mat& bv = t.node_val(ib);
        t.accum(ia, g.cwiseQuotient(bv));
        t.accum(ib, -g.cwiseProduct(t.node_val(ia)).cwiseQuotient(bv.cwiseProduct(bv)));
    }));
}

Var scale(Var a, double s) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(s * t.node_val(ia), [ia, s](Tape& t, int i) { t.accum(ia, s * t.node_grad(i)); }));
}

Var add_scalar(Var a, double s) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).array() + s, [ia](Tape& t, int i) { t.accum(ia, t.node_grad(i)); }));
}

Var matmul(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    if (t.node_val(ia).cols() != t.node_val(ib).rows()) throw ConfigError("matmul: shape mismatch");
    return make_var(t, t.push(t.node_val(ia) * t.node_val(ib), [ia, ib](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, g * t.node_val(ib).transpose());
        t.accum(ib, t.node_val(ia).transpose() * g);
    }));
}

Var matmul_c(Var a, const Mat& B) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia) * B, [ia, B](Tape& t, int i) {
        t.accum(ia, t.node_grad(i) * B.transpose());
    }));
}

Var c_matmul(const Mat& A, Var b) {
    Tape& t = tp(b);
    int ib = b.idx;
    return make_var(t, t.push(A * t.node_val(ib), [ib, A](Tape& t, int i) {
        t.accum(ib, A.transpose() * t.node_grad(i));
    }));
}

Var spmm(std::shared_ptr<const SpMat> A, Var b) {
    Tape& t = tp(b);
    int ib = b.idx;
    auto At = std::make_shared<SpMat>(A->transpose());
    return make_var(t, t.push(*A * t.node_val(ib), [ib, At](Tape& t, int i) {
        t.accum(ib, *At * t.node_grad(i));
    }));
}

Var transpose(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).transpose(),
                              [ia](Tape& t, int i) { t.accum(ia, t.node_grad(i).transpose()); }));
}

Var sum(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    Mat v(1, 1);
    v(0, 0) = t.node_val(ia).sum();
    return make_var(t, t.push(v, [ia](Tape& t, int i) {
        const Mat& av = t.node_val(ia);
        t.accum(ia, Mat::Constant(av.rows(), av.cols(), t.node_grad(i)(0, 0)));
    }));
}

Var sum_rows(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).rowwise().sum(), [ia](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, g * Mat::Ones(1, t.node_val(ia).cols()));
    }));
}

Var sum_cols(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).colwise().sum(), [ia](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, Mat::Ones(t.node_val(ia).rows(), 1) * g);
    }));
}

Var gather_rows(Var a, std::vector<int> idx) {
    Tape& t = tp(a);
    int ia = a.idx;
    const Mat& av = t.node_val(ia);
    Mat out(idx.size(), av.cols());
    for (size_t k = 0; k < idx.size(); ++k) out.row(k) = av.row(idx[k]);
    auto ids = std::make_shared<std::vector<int>>(std::move(idx));
    return make_var(t, t.push(std::move(out), [ia, ids](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        Mat ga = Mat::Zero(t.node_val(ia).rows(), t.node_val(ia).cols());
        for (size_t k = 0; k < ids->size(); ++k) ga.row((*ids)[k]) += g.row(k);
        t.accum(ia, ga);
    }));
}

Var hcat(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    const Mat& av = t.node_val(ia);
    const Mat& bv = t.node_val(ib);
    if (av.rows() != bv.rows()) throw ConfigError("hcat: row mismatch");
    Mat out(av.rows(), av.cols() + bv.cols());
    out << av, bv;
    long ca = av.cols();
    return make_var(t, t.push(std::move(out), [ia, ib, ca](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, g.leftCols(ca));
        t.accum(ib, g.rightCols(g.cols() - ca));
    }));
}

Var col(Var a, int j) { return cols(a, j, 1); }

Var cols(Var a, int j0, int m) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).middleCols(j0, m), [ia, j0, m](Tape& t, int i) {
        const Mat& av = t.node_val(ia);
        Mat ga = Mat::Zero(av.rows(), av.cols());
        ga.middleCols(j0, m) = t.node_grad(i);
        t.accum(ia, ga);
    }));
}

Var bc_col(Var a, int m) {
    Tape& t = tp(a);
    int ia = a.idx;
    if (t.node_val(ia).cols() != 1) throw ConfigError("bc_col: expected column vector");
    return make_var(t, t.push(t.node_val(ia) * Mat::Ones(1, m), [ia](Tape& t, int i) {
        t.accum(ia, t.node_grad(i).rowwise().sum());
    }));
}

Var bc_row(Var a, int n) {
    Tape& t = tp(a);
    int ia = a.idx;
    if (t.node_val(ia).rows() != 1) throw ConfigError("bc_row: expected row vector");
    return make_var(t, t.push(Mat::Ones(n, 1) * t.node_val(ia), [ia](Tape& t, int i) {
        t.accum(ia, t.node_grad(i).colwise().sum());
    }));
}

Var outer_sum(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    const Mat& av = t.node_val(ia);
    const Mat& bv = t.node_val(ib);
    if (av.cols() != 1 || bv.cols() != 1) throw ConfigError("outer_sum: expected column vectors");
    Mat out = av * Mat::Ones(1, bv.rows()) + Mat::Ones(av.rows(), 1) * bv.transpose();
    return make_var(t, t.push(std::move(out), [ia, ib](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, g.rowwise().sum());
        t.accum(ib, g.colwise().sum().transpose());
    }));
}

Var outer_diff_sq(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    const Mat& av = t.node_val(ia);
    if (av.cols() != 1) throw ConfigError("outer_diff_sq: expected column vector");
    long n = av.rows();
    Mat out(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            double d = av(i, 0) - av(j, 0);
            out(i, j) = d * d;
        }
    return make_var(t, t.push(std::move(out), [ia](Tape& t, int i) {
        const Mat& av = t.node_val(ia);
        const Mat& g = t.node_grad(i);
        long n = av.rows();
        Mat ga = Mat::Zero(n, 1);
        for (long r = 0; r < n; ++r)
            for (long c = 0; c < n; ++c) {
                double d = 2.0 * (av(r, 0) - av(c, 0));
                ga(r, 0) += g(r, c) * d;
                ga(c, 0) -= g(r, c) * d;
            }
        t.accum(ia, ga);
    }));
}

Var cmul(Var a, const Mat& M) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).cwiseProduct(M), [ia, M](Tape& t, int i) {
        t.accum(ia, t.node_grad(i).cwiseProduct(M));
    }));
}

Var cadd(Var a, const Mat& M) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia) + M, [ia](Tape& t, int i) { t.accum(ia, t.node_grad(i)); }));
}

Var rowsumsq(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).rowwise().squaredNorm(), [ia](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        t.accum(ia, 2.0 * (g * Mat::Ones(1, t.node_val(ia).cols())).cwiseProduct(t.node_val(ia)));
    }));
}

Var rownorm(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    return make_var(t, t.push(t.node_val(ia).rowwise().norm(), [ia](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        const Mat& av = t.node_val(ia);
        Mat r = t.node_val(i).cwiseMax(kEps);
        Mat f = g.cwiseQuotient(r);
        t.accum(ia, (f * Mat::Ones(1, av.cols())).cwiseProduct(av));
    }));
}

Var rowdot(Var a, Var b) {
    same_tape(a, b);
    Tape& t = tp(a);
    int ia = a.idx, ib = b.idx;
    Mat out = t.node_val(ia).cwiseProduct(t.node_val(ib)).rowwise().sum();
    return make_var(t, t.push(std::move(out), [ia, ib](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        Mat gb = g * Mat::Ones(1, t.node_val(ia).cols());
        t.accum(ia, gb.cwiseProduct(t.node_val(ib)));
        t.accum(ib, gb.cwiseProduct(t.node_val(ia)));
    }));
}

namespace {

// generic elementwise unary with derivative computed from the input value
template <class F, class DF>
Var unary(Var a, F f, DF df) {
    Tape& t = tp(a);
    int ia = a.idx;
    Mat out = t.node_val(ia).unaryExpr(f);
    return make_var(t, t.push(std::move(out), [ia, df](Tape& t, int i) {
        t.accum(ia, t.node_grad(i).cwiseProduct(t.node_val(ia).unaryExpr(df)));
    }));
}

}  // namespace

Var relu(Var a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var abs_(Var a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
    return unary(
        a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var sqrt_(Var a) {
    return unary(
        a, [](double x) { return std::sqrt(std::max(x, 0.0)); },
        [](double x) { return 0.5 / std::max(std::sqrt(std::max(x, 0.0)), 1e-12); });
}

Var exp_(Var a) {
    return unary(
        a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log_(Var a, double floor) {
    return unary(
        a, [floor](double x) { return std::log(std::max(x, floor)); },
        [floor](double x) { return 1.0 / std::max(x, floor); });
}

Var tanh_(Var a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            double th = std::tanh(x);
            return 1.0 - th * th;
        });
}

Var sinh_(Var a) {
    return unary(
        a, [](double x) { return std::sinh(x); }, [](double x) { return std::cosh(x); });
}

Var cosh_(Var a) {
    return unary(
        a, [](double x) { return std::cosh(x); }, [](double x) { return std::sinh(x); });
}

namespace {
inline double clamp_unit(double x) {
    double lim = 1.0 - 1e-15;
    return std::clamp(x, -lim, lim);
}
}  // namespace

Var atanh_(Var a) {
    return unary(
        a, [](double x) { return std::atanh(clamp_unit(x)); },
        [](double x) {
            double xc = clamp_unit(x);
            return 1.0 / (1.0 - xc * xc);
        });
}

Var acosh_(Var a) {
    return unary(
        a, [](double x) { return std::acosh(std::max(x, 1.0)); },
        [](double x) {
            double xc = std::max(x, 1.0 + 1e-12);
            return 1.0 / std::sqrt((xc - 1.0) * (xc + 1.0));
        });
}

Var softplus(Var a) {
    return unary(
        a,
        [](double x) {
            if (x > 35.0) return x;
            if (x < -35.0) return std::exp(x);
            return std::log1p(std::exp(x));
        },
        [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var tanhc(Var a) {
    return unary(
        a,
        [](double x) {
            if (std::abs(x) < 1e-4) return 1.0 - x * x / 3.0 + 2.0 * x * x * x * x / 15.0;
            return std::tanh(x) / x;
        },
        [](double x) {
            if (std::abs(x) < 1e-4) return -2.0 * x / 3.0 + 8.0 * x * x * x / 15.0;
            double th = std::tanh(x);
            return (x * (1.0 - th * th) - th) / (x * x);
        });
}

Var atanhc(Var a) {
    return unary(
        a,
        [](double x) {
            double xc = clamp_unit(x);
            if (std::abs(xc) < 1e-4) return 1.0 + xc * xc / 3.0 + xc * xc * xc * xc / 5.0;
            return std::atanh(xc) / xc;
        },
        [](double x) {
            double xc = clamp_unit(x);
            if (std::abs(xc) < 1e-4) return 2.0 * xc / 3.0 + 4.0 * xc * xc * xc / 5.0;
            return (xc / (1.0 - xc * xc) - std::atanh(xc)) / (xc * xc);
        });
}

Var sinhc(Var a) {
    return unary(
        a,
        [](double x) {
            if (std::abs(x) < 1e-4) return 1.0 + x * x / 6.0 + x * x * x * x / 120.0;
            return std::sinh(x) / x;
        },
        [](double x) {
            if (std::abs(x) < 1e-4) return x / 3.0 + x * x * x / 30.0;
            return (x * std::cosh(x) - std::sinh(x)) / (x * x);
        });
}

Var asinhc(Var a) {
    return unary(
        a,
        [](double x) {
            if (std::abs(x) < 1e-4) return 1.0 - x * x / 6.0 + 3.0 * x * x * x * x / 40.0;
            return std::asinh(x) / x;
        },
        [](double x) {
            if (std::abs(x) < 1e-4) return -x / 3.0 + 3.0 * x * x * x / 10.0;
            return (x / std::sqrt(1.0 + x * x) - std::asinh(x)) / (x * x);
        });
}

Var softmax_rows(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    const Mat& av = t.node_val(ia);
    Mat out(av.rows(), av.cols());
    for (long r = 0; r < av.rows(); ++r) {
        double m = av.row(r).maxCoeff();
        Eigen::ArrayXd e = (av.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    return make_var(t, t.push(std::move(out), [ia](Tape& t, int i) {
        const Mat& y = t.node_val(i);
        const Mat& g = t.node_grad(i);
        Mat dot = g.cwiseProduct(y).rowwise().sum();  // n x 1
        t.accum(ia, y.cwiseProduct(g - dot * Mat::Ones(1, y.cols())));
    }));
}

Var logsumexp_rows(Var a) {
    Tape& t = tp(a);
    int ia = a.idx;
    const Mat& av = t.node_val(ia);
    Mat out(av.rows(), 1);
    for (long r = 0; r < av.rows(); ++r) {
        double m = av.row(r).maxCoeff();
        out(r, 0) = m + std::log((av.row(r).array() - m).exp().sum());
    }
    return make_var(t, t.push(std::move(out), [ia](Tape& t, int i) {
        const Mat& av = t.node_val(ia);
        const Mat& lse = t.node_val(i);
        const Mat& g = t.node_grad(i);
        Mat sm = (av - lse * Mat::Ones(1, av.cols())).array().exp();
        t.accum(ia, sm.cwiseProduct(g * Mat::Ones(1, av.cols())));
    }));
}

Var segment_softmax(Var vals, std::shared_ptr<const std::vector<int>> seg, int nseg) {
    Tape& t = tp(vals);
    int ia = vals.idx;
    const Mat& v = t.node_val(ia);
    if (v.cols() != 1) throw ConfigError("segment_softmax: expected column vector");
    std::vector<double> mx(nseg, -std::numeric_limits<double>::infinity());
    for (long e = 0; e < v.rows(); ++e) mx[(*seg)[e]] = std::max(mx[(*seg)[e]], v(e, 0));
    std::vector<double> den(nseg, 0.0);
    Mat out(v.rows(), 1);
    for (long e = 0; e < v.rows(); ++e) {
        out(e, 0) = std::exp(v(e, 0) - mx[(*seg)[e]]);
        den[(*seg)[e]] += out(e, 0);
    }
    for (long e = 0; e < v.rows(); ++e) out(e, 0) /= den[(*seg)[e]];
    return make_var(t, t.push(std::move(out), [ia, seg, nseg](Tape& t, int i) {
        const Mat& y = t.node_val(i);
        const Mat& g = t.node_grad(i);
        std::vector<double> dot(nseg, 0.0);
        for (long e = 0; e < y.rows(); ++e) dot[(*seg)[e]] += g(e, 0) * y(e, 0);
        Mat gv(y.rows(), 1);
        for (long e = 0; e < y.rows(); ++e) gv(e, 0) = y(e, 0) * (g(e, 0) - dot[(*seg)[e]]);
        t.accum(ia, gv);
    }));
}

Var attn_aggregate(Var w, std::shared_ptr<const std::vector<std::pair<int, int>>> edges, Var z,
                   int n_out) {
    same_tape(w, z);
    Tape& t = tp(w);
    int iw = w.idx, iz = z.idx;
    const Mat& wv = t.node_val(iw);
    const Mat& zv = t.node_val(iz);
    if (wv.rows() != static_cast<long>(edges->size())) throw ConfigError("attn_aggregate: weight count mismatch");
    Mat out = Mat::Zero(n_out, zv.cols());
    for (size_t e = 0; e < edges->size(); ++e)
        out.row((*edges)[e].first) += wv(e, 0) * zv.row((*edges)[e].second);
    return make_var(t, t.push(std::move(out), [iw, iz, edges](Tape& t, int i) {
        const Mat& g = t.node_grad(i);
        const Mat& wv = t.node_val(iw);
        const Mat& zv = t.node_val(iz);
        Mat gw(wv.rows(), 1);
        Mat gz = Mat::Zero(zv.rows(), zv.cols());
        for (size_t e = 0; e < edges->size(); ++e) {
            auto [dst, src] = (*edges)[e];
            gw(e, 0) = g.row(dst).dot(zv.row(src));
            gz.row(src) += wv(e, 0) * g.row(dst);
        }
        t.accum(iw, gw);
        t.accum(iz, gz);
    }));
}

// ---- differentiable manifold operations ----

namespace {

Var minkowski_rowdot(Var a, Var b) {
    Var d = rowdot(a, b);
    Var t0 = mul(col(a, 0), col(b, 0));
    return sub(d, scale(t0, 2.0));
}

}  // namespace

Var exp0(Var z, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return z;
        case SpaceKind::PoincareBall: {
            double sc = std::sqrt(s.c);
            Var r = scale(rownorm(z), sc);
            int d = static_cast<int>(tp(z).node_val(z.idx).cols());
            return mul(bc_col(tanhc(r), d), z);
        }
        case SpaceKind::Hyperboloid: {
            double sK = std::sqrt(s.K());
            Var tvar = scale(rownorm(z), 1.0 / sK);
            Var time = scale(cosh_(tvar), sK);
            int d = static_cast<int>(tp(z).node_val(z.idx).cols());
            Var spatial = mul(bc_col(sinhc(tvar), d), z);
            return hcat(time, spatial);
        }
    }
    throw ConfigError("exp0: bad space");
}

Var log0(Var x, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return x;
        case SpaceKind::PoincareBall: {
            double sc = std::sqrt(s.c);
            Var r = scale(rownorm(x), sc);
            int d = static_cast<int>(tp(x).node_val(x.idx).cols());
            return mul(bc_col(atanhc(r), d), x);
        }
        case SpaceKind::Hyperboloid: {
            double sK = std::sqrt(s.K());
            int amb = static_cast<int>(tp(x).node_val(x.idx).cols());
            Var sp = cols(x, 1, amb - 1);
            Var tvar = scale(rownorm(sp), 1.0 / sK);
            return mul(bc_col(asinhc(tvar), amb - 1), sp);
        }
    }
    throw ConfigError("log0: bad space");
}

namespace {

// log_x(origin) for hyperboloid rows: asinhc(|x_s|/sqrt(K)) * (x0 + c*a*x),
// a = <x, x0>_L = -sqrt(K) * x_0.
Var hyp_log_to_origin(Var x, const Space& s) {
    Tape& t = tp(x);
    int amb = static_cast<int>(t.node_val(x.idx).cols());
    long n = t.node_val(x.idx).rows();
    double sK = std::sqrt(s.K());
    Var a = scale(col(x, 0), -sK);
    Mat o_rows = Mat::Zero(n, amb);
    o_rows.col(0).setConstant(sK);
    Var u = cadd(mul(bc_col(scale(a, s.c), amb), x), o_rows);
    Var sp = cols(x, 1, amb - 1);
    Var svar = scale(rownorm(sp), 1.0 / sK);
    return mul(bc_col(asinhc(svar), amb), u);
}

// exp_x(v) for hyperboloid rows, v tangent at x (ambient coords)
Var hyp_exp_at(Var x, Var v, const Space& s) {
    Tape& t = tp(x);
    int amb = static_cast<int>(t.node_val(x.idx).cols());
    double sK = std::sqrt(s.K());
    Var q = sqrt_(minkowski_rowdot(v, v));
    Var tv = scale(q, 1.0 / sK);
    Var a = mul(bc_col(cosh_(tv), amb), x);
    Var b = mul(bc_col(sinhc(tv), amb), v);
    return add(a, b);
}

// parallel transport of origin-tangents (rows, ambient) to base rows x
Var hyp_transport_from_origin(Var x, Var v_amb, const Space& s) {
    Tape& t = tp(x);
    int amb = static_cast<int>(t.node_val(x.idx).cols());
    Var z = log0(x, s);             // intrinsic
    Var vs = cols(v_amb, 1, amb - 1);  // spatial part of the origin tangent
    Var num = rowdot(z, vs);        // <log0(x), v>_L
    Var den = add_scalar(rowsumsq(z), 1e-30);  // d(origin, x)^2
    Var f = div(num, den);
    long n = t.node_val(x.idx).rows();
    Mat zeros = Mat::Zero(n, 1);
    Var lv_amb = hcat(tp(x).constant(zeros), z);
    Var lx = hyp_log_to_origin(x, s);
    return sub(v_amb, mul(bc_col(f, amb), add(lv_amb, lx)));
}

Var poincare_mobius_add_rows(Var x, Var y, double c) {
    Tape& t = tp(x);
    int d = static_cast<int>(t.node_val(x.idx).cols());
    Var xy = rowdot(x, y);
    Var x2 = rowsumsq(x);
    Var y2 = rowsumsq(y);
    Var A = add_scalar(add(scale(xy, 2.0 * c), scale(y2, c)), 1.0);
    Var B = add_scalar(scale(x2, -c), 1.0);
    Var D = add_scalar(add(scale(xy, 2.0 * c), scale(mul(x2, y2), c * c)), 1.0);
    Var num = add(mul(bc_col(A, d), x), mul(bc_col(B, d), y));
    return div(num, bc_col(D, d));
}

}  // namespace

Var mobius_add_rows(Var x, Var y, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return add(x, y);
        case SpaceKind::PoincareBall: return poincare_mobius_add_rows(x, y, s.c);
        case SpaceKind::Hyperboloid: {
            Var v = log0(y, s);  // intrinsic tangent at origin
            Tape& t = tp(x);
            long n = t.node_val(x.idx).rows();
            Var v_amb = hcat(t.constant(Mat::Zero(n, 1)), v);
            Var tv = hyp_transport_from_origin(x, v_amb, s);
            return hyp_exp_at(x, tv, s);
        }
    }
    throw ConfigError("mobius_add_rows: bad space");
}

Var bias_translate(Var x, Var b_tangent_row, const Space& s) {
    Tape& t = tp(x);
    long n = t.node_val(x.idx).rows();
    switch (s.kind) {
        case SpaceKind::Euclidean: return add(x, bc_row(b_tangent_row, n));
        case SpaceKind::PoincareBall: {
            Var bp = exp0(b_tangent_row, s);  // 1 x d point
            return poincare_mobius_add_rows(x, bc_row(bp, n), s.c);
        }
        case SpaceKind::Hyperboloid: {
            Var b_rows = bc_row(b_tangent_row, n);
            Var v_amb = hcat(t.constant(Mat::Zero(n, 1)), b_rows);
            Var tv = hyp_transport_from_origin(x, v_amb, s);
            return hyp_exp_at(x, tv, s);
        }
    }
    throw ConfigError("bias_translate: bad space");
}

namespace {

// sum_k (x_ik - x_jk)^2 built from per-column differences; the gram-matrix
// expansion cancels catastrophically for nearby rows
Var pair_sqdist_euclid(Var x) {
    Tape& t = tp(x);
    int d = static_cast<int>(t.node_val(x.idx).cols());
    Var acc = outer_diff_sq(col(x, 0));
    for (int k = 1; k < d; ++k) acc = add(acc, outer_diff_sq(col(x, k)));
    return acc;
}

}  // namespace

Var pair_dist(Var x, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return sqrt_(pair_sqdist_euclid(x));
        case SpaceKind::PoincareBall: {
            Var sq = rowsumsq(x);
            Var d2 = pair_sqdist_euclid(x);
            Var u = add_scalar(scale(sq, -s.c), 1.0);  // 1 - c|x|^2, n x 1
            Var den = matmul(u, transpose(u));
            Var z = add_scalar(scale(div(d2, den), 2.0 * s.c), 1.0);
            return scale(acosh_(z), 1.0 / std::sqrt(s.c));
        }
        case SpaceKind::Hyperboloid: {
            // <xi-xj, xi-xj>_L = sum_k>=1 (dk)^2 - (d0)^2; z = 1 + c/2 * that
            Tape& t = tp(x);
            int amb = static_cast<int>(t.node_val(x.idx).cols());
            Var acc = outer_diff_sq(col(x, 1));
            for (int k = 2; k < amb; ++k) acc = add(acc, outer_diff_sq(col(x, k)));
            acc = sub(acc, outer_diff_sq(col(x, 0)));
            Var z = add_scalar(scale(acc, 0.5 * s.c), 1.0);
            return scale(acosh_(z), std::sqrt(s.K()));
        }
    }
    throw ConfigError("pair_dist: bad space");
}

Var rows_dist(Var x, Var y, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return rownorm(sub(x, y));
        case SpaceKind::PoincareBall: {
            Var d2 = rowsumsq(sub(x, y));
            Var ux = add_scalar(scale(rowsumsq(x), -s.c), 1.0);
            Var uy = add_scalar(scale(rowsumsq(y), -s.c), 1.0);
            Var z = add_scalar(scale(div(d2, mul(ux, uy)), 2.0 * s.c), 1.0);
            return scale(acosh_(z), 1.0 / std::sqrt(s.c));
        }
        case SpaceKind::Hyperboloid: {
            Var diff = sub(x, y);
            Var z = add_scalar(scale(minkowski_rowdot(diff, diff), 0.5 * s.c), 1.0);
            return scale(acosh_(z), std::sqrt(s.K()));
        }
    }
    throw ConfigError("rows_dist: bad space");
}

Var dist_to_origin(Var x, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return rownorm(x);
        case SpaceKind::PoincareBall: {
            double sc = std::sqrt(s.c);
            return scale(atanh_(scale(rownorm(x), sc)), 2.0 / sc);
        }
        case SpaceKind::Hyperboloid: {
            double sK = std::sqrt(s.K());
            return scale(acosh_(scale(col(x, 0), 1.0 / sK)), sK);
        }
    }
    throw ConfigError("dist_to_origin: bad space");
}

}  // namespace hrcb::ad
