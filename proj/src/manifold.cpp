#include "hrcb/manifold.hpp"

#include <fstream>
#include <sstream>

namespace hrcb {

std::string to_string(SpaceKind k) {
    switch (k) {
        case SpaceKind::Euclidean: return "euclidean";
        case SpaceKind::PoincareBall: return "poincare";
        case SpaceKind::Hyperboloid: return "hyperboloid";
    }
    return "?";
}

SpaceKind space_kind_from_string(const std::string& s) {
    if (s == "euclidean" || s == "R") return SpaceKind::Euclidean;
    if (s == "poincare" || s == "D") return SpaceKind::PoincareBall;
    if (s == "hyperboloid" || s == "H") return SpaceKind::Hyperboloid;
    throw ConfigError("unknown space kind: " + s);
}

namespace manifold {

namespace {

void check_dim(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw ConfigError("dimension mismatch");
}

// Poincare Mobius addition, the closed Table form.
Vec poincare_add(const Vec& x, const Vec& y, double c) {
    double xy = x.dot(y);
    double x2 = x.squaredNorm();
    double y2 = y.squaredNorm();
    double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
    if (std::abs(den) < 1e-300) throw NumericError("mobius_add: degenerate denominator");
    return ((1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y) / den;
}

// Tangent-vector gyration gyr[u,v]w on the Poincare ball.
Vec poincare_gyration(const Vec& u, const Vec& v, const Vec& w, double c) {
    double u2 = u.squaredNorm(), v2 = v.squaredNorm();
    double uv = u.dot(v), uw = u.dot(w), vw = v.dot(w);
    double c2 = c * c;
    double a = -c2 * uw * v2 + c * vw + 2.0 * c2 * uv * vw;
    double b = -c2 * vw * u2 - c * uw;
    double d = 1.0 + 2.0 * c * uv + c2 * u2 * v2;
    if (std::abs(d) < 1e-300) throw NumericError("gyration: degenerate denominator");
    return w + 2.0 * (a * u + b * v) / d;
}

double lambda_factor(const Vec& x, double c) { return 2.0 / (1.0 - c * x.squaredNorm()); }

}  // namespace

double minkowski_dot(const Vec& x, const Vec& y) {
    check_dim(x, y);
    return x.dot(y) - 2.0 * x(0) * y(0);
}

Vec origin(const Space& s, int d) {
    if (s.kind == SpaceKind::Hyperboloid) {
        Vec o = Vec::Zero(d + 1);
        o(0) = std::sqrt(s.K());
        return o;
    }
    return Vec::Zero(d);
}

Vec project(const Vec& p, const Space& s) {
    if (!p.allFinite()) throw NumericError("project: non-finite input");
    switch (s.kind) {
        case SpaceKind::Euclidean: return p;
        case SpaceKind::PoincareBall: {
            double maxr = (1.0 - kBallMargin) / std::sqrt(s.c);
            double r = p.norm();
            if (r > maxr) return p * (maxr / r);
            return p;
        }
        case SpaceKind::Hyperboloid: {
            Vec q = p;
            q(0) = std::sqrt(s.K() + p.tail(p.size() - 1).squaredNorm());
            return q;
        }
    }
    return p;
}

bool on_manifold(const Vec& x, const Space& s, double tol) {
    if (!x.allFinite()) return false;
    switch (s.kind) {
        case SpaceKind::Euclidean: return true;
        case SpaceKind::PoincareBall: return s.c * x.squaredNorm() < 1.0;
        case SpaceKind::Hyperboloid:
            return x(0) > 0.0 && std::abs(minkowski_dot(x, x) + s.K()) <= tol * s.K();
    }
    return false;
}

bool is_tangent(const Vec& x, const Vec& v, const Space& s, double tol) {
    if (s.kind != SpaceKind::Hyperboloid) return true;
    double scale = std::max(1.0, x.norm() * v.norm());
    return std::abs(minkowski_dot(x, v)) <= tol * scale;
}

Vec project_tangent(const Vec& x, const Vec& v, const Space& s) {
    if (s.kind != SpaceKind::Hyperboloid) return v;
    // proj_x(v) = v + c<x,v>_L x, which satisfies <x,proj>_L = 0 on the sheet
    return v + s.c * minkowski_dot(x, v) * x;
}

Vec exp_map(const Vec& x, const Vec& v, const Space& s) {
    check_dim(x, v);
    switch (s.kind) {
        case SpaceKind::Euclidean: return x + v;
        case SpaceKind::PoincareBall: {
            double nv = v.norm();
            if (nv < kNormGuard) return x;
            double sc = std::sqrt(s.c);
            double t = std::tanh(sc * nv / (1.0 - s.c * x.squaredNorm()));
            Vec u = (t / (sc * nv)) * v;
            return project(poincare_add(x, u, s.c), s);
        }
        case SpaceKind::Hyperboloid: {
            double q = minkowski_dot(v, v);
            if (q <= kNormGuard * kNormGuard) return x;
            double nl = std::sqrt(q);
            double sK = std::sqrt(s.K());
            Vec y = std::cosh(nl / sK) * x + sK * std::sinh(nl / sK) * (v / nl);
            return project(y, s);
        }
    }
    throw ConfigError("exp_map: bad space");
}

Vec log_map(const Vec& x, const Vec& y, const Space& s) {
    check_dim(x, y);
    switch (s.kind) {
        case SpaceKind::Euclidean: return y - x;
        case SpaceKind::PoincareBall: {
            Vec w = poincare_add(-x, y, s.c);
            double nw = w.norm();
            if (nw < kNormGuard) return Vec::Zero(x.size());
            double sc = std::sqrt(s.c);
            double f = (1.0 - s.c * x.squaredNorm()) / sc * std::atanh(clamp_atanh_arg(sc * nw));
            return (f / nw) * w;
        }
        case SpaceKind::Hyperboloid: {
            double a = minkowski_dot(x, y);  // = -K at x == y
            Vec u = y + s.c * a * x;
            double q = minkowski_dot(u, u);
            if (q <= kNormGuard * kNormGuard) return Vec::Zero(x.size());
            double sK = std::sqrt(s.K());
            double d = sK * acosh_clamped(-s.c * a);
            return (d / std::sqrt(q)) * u;
        }
    }
    throw ConfigError("log_map: bad space");
}

Vec transport(const Vec& x, const Vec& y, const Vec& v, const Space& s) {
    check_dim(x, y);
    check_dim(x, v);
    switch (s.kind) {
        case SpaceKind::Euclidean: return v;
        case SpaceKind::PoincareBall: {
            if ((x - y).norm() < kNormGuard) return v;
            double lx = lambda_factor(x, s.c), ly = lambda_factor(y, s.c);
            return poincare_gyration(y, -x, v, s.c) * (lx / ly);
        }
        case SpaceKind::Hyperboloid: {
            if (!is_tangent(x, v, s)) throw ConfigError("transport: v not tangent at x");
            if ((x - y).norm() < kNormGuard) return v;
            Vec lxy = log_map(x, y, s);
            Vec lyx = log_map(y, x, s);
            double d = distance(x, y, s);
            if (d < kNormGuard) return v;
            Vec out = v - (minkowski_dot(lxy, v) / (d * d)) * (lxy + lyx);
            return project_tangent(y, out, s);
        }
    }
    throw ConfigError("transport: bad space");
}

double distance(const Vec& x, const Vec& y, const Space& s) {
    check_dim(x, y);
    if (x == y) return 0.0;  // acosh amplifies rounding near its branch point
    switch (s.kind) {
        case SpaceKind::Euclidean: return (x - y).norm();
        case SpaceKind::PoincareBall: {
            double x2 = s.c * x.squaredNorm(), y2 = s.c * y.squaredNorm();
            double d2 = s.c * (x - y).squaredNorm();
            double z = 1.0 + 2.0 * d2 / ((1.0 - x2) * (1.0 - y2));
            return acosh_clamped(z) / std::sqrt(s.c);
        }
        case SpaceKind::Hyperboloid: {
            // difference form of -c<x,y>_L; the direct bilinear expansion
            // cancels catastrophically for nearby points
            Vec d = x - y;
            return std::sqrt(s.K()) * acosh_clamped(1.0 + 0.5 * s.c * minkowski_dot(d, d));
        }
    }
    throw ConfigError("distance: bad space");
}

double tangent_norm(const Vec& x, const Vec& v, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return v.norm();
        case SpaceKind::PoincareBall: return lambda_factor(x, s.c) * v.norm();
        case SpaceKind::Hyperboloid: {
            double q = minkowski_dot(v, v);
            return q > 0.0 ? std::sqrt(q) : 0.0;
        }
    }
    return 0.0;
}

Mat pairwise_distances(const Mat& X, const Space& s) {
    int n = static_cast<int>(X.rows());
    if (n == 0) throw ConfigError("pairwise_distances: empty table");
    Mat D = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = distance(X.row(i).transpose(), X.row(j).transpose(), s);
            D(i, j) = d;
            D(j, i) = d;
        }
    }
    return D;
}

Vec tangent0_to_ambient(const Vec& z, const Space& s) {
    if (s.kind != SpaceKind::Hyperboloid) return z;
    Vec v = Vec::Zero(z.size() + 1);
    v.tail(z.size()) = z;
    return v;
}

Vec ambient_to_tangent0(const Vec& v, const Space& s) {
    if (s.kind != SpaceKind::Hyperboloid) return v;
    return v.tail(v.size() - 1);
}

Vec mobius_add(const Vec& x, const Vec& y, const Space& s) {
    check_dim(x, y);
    switch (s.kind) {
        case SpaceKind::Euclidean: return x + y;
        case SpaceKind::PoincareBall: return project(poincare_add(x, y, s.c), s);
        case SpaceKind::Hyperboloid: {
            // exp_x(P_{x0->x}(log_{x0}(y)))
            Vec o = origin(s, static_cast<int>(x.size()) - 1);
            Vec v = log_map(o, y, s);
            if (v.norm() < kNormGuard) return x;
            Vec tv = transport(o, x, v, s);
            return exp_map(x, tv, s);
        }
    }
    throw ConfigError("mobius_add: bad space");
}

Vec mobius_matvec(const Mat& W, const Vec& x, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: {
            if (W.cols() != x.size()) throw ConfigError("mobius_matvec: dimension mismatch");
            return W * x;
        }
        case SpaceKind::PoincareBall: {
            if (W.cols() != x.size()) throw ConfigError("mobius_matvec: dimension mismatch");
            double nx = x.norm();
            if (nx < kNormGuard) return Vec::Zero(W.rows());  // limit value at the origin
            Vec wx = W * x;
            double nwx = wx.norm();
            if (nwx < kNormGuard) return Vec::Zero(W.rows());
            double sc = std::sqrt(s.c);
            double f = std::tanh((nwx / nx) * std::atanh(clamp_atanh_arg(sc * nx))) / sc;
            return project((f / nwx) * wx, s);
        }
        case SpaceKind::Hyperboloid: {
            // exp_x0(W log_x0(x)); W acts on the spatial tangent coordinates
            int d_in = static_cast<int>(x.size()) - 1;
            if (W.cols() != d_in) throw ConfigError("mobius_matvec: dimension mismatch");
            Vec o_in = origin(s, d_in);
            Vec z = ambient_to_tangent0(log_map(o_in, x, s), s);
            Vec wz = W * z;
            Vec o_out = origin(s, static_cast<int>(W.rows()));
            return exp_map(o_out, tangent0_to_ambient(wz, s), s);
        }
    }
    throw ConfigError("mobius_matvec: bad space");
}

Vec poincare_to_hyperboloid(const Vec& p, double c) {
    double K = 1.0 / c;
    double den = 1.0 - c * p.squaredNorm();
    if (den <= 0.0) throw NumericError("poincare_to_hyperboloid: point outside ball");
    Vec x(p.size() + 1);
    x(0) = std::sqrt(K) * (1.0 + c * p.squaredNorm()) / den;
    x.tail(p.size()) = 2.0 * p / den;
    return x;
}

Vec hyperboloid_to_poincare(const Vec& x, double c) {
    double sK = std::sqrt(1.0 / c);
    return sK * x.tail(x.size() - 1) / (sK + x(0));
}

}  // namespace manifold

Point make_point(const Vec& raw, const Space& s) { return Point(manifold::project(raw, s), s); }

Point origin_point(const Space& s, int dim) { return Point(manifold::origin(s, dim), s); }

namespace {
void check_pair(const Point& a, const Point& b) {
    if (!(a.space == b.space)) throw ConfigError("space mismatch");
    if (a.x.size() != b.x.size()) throw ConfigError("dimension mismatch");
}
}  // namespace

Point mobius_add(const Point& a, const Point& b) {
    check_pair(a, b);
    return Point(manifold::mobius_add(a.x, b.x, a.space), a.space);
}
Point mobius_matvec(const Mat& W, const Point& p) {
    return Point(manifold::mobius_matvec(W, p.x, p.space), p.space);
}
Point exp_map(const Point& p, const Tangent& t) {
    return Point(manifold::exp_map(p.x, t.v, p.space), p.space);
}
Tangent log_map(const Point& p, const Point& q) {
    check_pair(p, q);
    return Tangent{manifold::log_map(p.x, q.x, p.space), p};
}
Tangent transport(const Point& p, const Point& q, const Tangent& t) {
    check_pair(p, q);
    return Tangent{manifold::transport(p.x, q.x, t.v, p.space), q};
}
double distance(const Point& a, const Point& b) {
    check_pair(a, b);
    return manifold::distance(a.x, b.x, a.space);
}

void EmbeddingTable::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    for (int i = 0; i < n(); ++i) {
        f << i << ' ' << to_string(space.kind) << ' ' << fmt17(space.c);
        for (int j = 0; j < X.cols(); ++j) f << ' ' << fmt17(X(i, j));
        f << '\n';
    }
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::vector<std::vector<double>> rows;
    Space sp;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        long id;
        std::string kind;
        double c;
        if (!(is >> id >> kind >> c)) throw DataError(path + ":" + std::to_string(lineno) + ": malformed record");
        sp = Space(space_kind_from_string(kind), c);
        std::vector<double> coords;
        double v;
        while (is >> v) coords.push_back(v);
        if (coords.empty()) throw DataError(path + ":" + std::to_string(lineno) + ": no coordinates");
        if (static_cast<size_t>(id) != rows.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": ids must be dense and ordered");
        rows.push_back(std::move(coords));
    }
    if (rows.empty()) throw DataError(path + ": empty table");
    EmbeddingTable t;
    t.space = sp;
    t.X = Mat(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw DataError(path + ": ragged coordinate rows");
        for (size_t j = 0; j < rows[i].size(); ++j) t.X(i, j) = rows[i][j];
    }
    return t;
}

}  // namespace hrcb
