#pragma once

#include <Eigen/Dense>
#include <string>

#include "hrcb/common.hpp"

namespace hrcb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class SpaceKind { Euclidean, PoincareBall, Hyperboloid };

std::string to_string(SpaceKind k);
SpaceKind space_kind_from_string(const std::string& s);

// A manifold space. c is the absolute curvature (> 0); K = 1/c is derived,
// never stored. Euclidean ignores c.
struct Space {
    SpaceKind kind = SpaceKind::Euclidean;
    double c = 1.0;

    Space() = default;
    Space(SpaceKind k, double curv = 1.0) : kind(k), c(curv) {
        if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("Space: curvature must be positive and finite");
    }
    double K() const { return 1.0 / c; }
    bool hyperbolic() const { return kind != SpaceKind::Euclidean; }
    // ambient coordinate count for an intrinsic dimension d
    int ambient_dim(int d) const { return kind == SpaceKind::Hyperboloid ? d + 1 : d; }
    int intrinsic_dim(int ambient) const { return kind == SpaceKind::Hyperboloid ? ambient - 1 : ambient; }
    bool operator==(const Space& o) const { return kind == o.kind && c == o.c; }
};

namespace manifold {

constexpr double kAtanhGuard = 1e-15;   // artanh args clamped into (-1+g, 1-g)
constexpr double kBallMargin = 1e-5;    // Poincare points kept at radius <= (1-margin)/sqrt(c)
constexpr double kNormGuard = 1e-15;    // v/|v| guards

inline double clamp_atanh_arg(double t) {
    return std::clamp(t, -1.0 + kAtanhGuard, 1.0 - kAtanhGuard);
}
inline double acosh_clamped(double z) { return std::acosh(std::max(z, 1.0)); }

// Minkowski bilinear form <x,y> - 2*x0*y0 (equals -x0*y0 + sum_i>=1 xi*yi).
double minkowski_dot(const Vec& x, const Vec& y);

// Origin point: 0 for Euclidean/Poincare, [sqrt(K),0,...,0] for Hyperboloid
// (the constraint-consistent base point with <x0,x0>_L = -K).
Vec origin(const Space& s, int intrinsic_dim);

// Numerical stabilization: pulls a raw ambient vector onto the manifold.
// Poincare: rescale into the open ball if at/outside the boundary.
// Hyperboloid: recompute x0 = sqrt(K + |spatial|^2).
Vec project(const Vec& p, const Space& s);

bool on_manifold(const Vec& x, const Space& s, double tol = 1e-9);
// Tangency check at base x (Hyperboloid: |<x,v>_L| small; others always true).
bool is_tangent(const Vec& x, const Vec& v, const Space& s, double tol = 1e-6);
// Force tangency at x (Hyperboloid orthogonal projection; identity otherwise).
Vec project_tangent(const Vec& x, const Vec& v, const Space& s);

Vec mobius_add(const Vec& x, const Vec& y, const Space& s);
Vec mobius_matvec(const Mat& W, const Vec& x, const Space& s);

Vec exp_map(const Vec& x, const Vec& v, const Space& s);
Vec log_map(const Vec& x, const Vec& y, const Space& s);
// Parallel transport of tangent v at x to the tangent space at y.
// Rejects v that is not tangent at x (Hyperboloid) beyond tolerance.
Vec transport(const Vec& x, const Vec& y, const Vec& v, const Space& s);

double distance(const Vec& x, const Vec& y, const Space& s);

// Metric ("tangent") norm of v at x: equals distance(x, exp_x(v)).
double tangent_norm(const Vec& x, const Vec& v, const Space& s);

// Rows of X are points; returns the symmetric matrix of pairwise distances
// with an exactly zero diagonal.
Mat pairwise_distances(const Mat& X, const Space& s);

// Maps between tangent coordinates at the origin. For the hyperboloid the
// tangent space at the origin is {0} x R^d; spatial extracts/extends that.
Vec tangent0_to_ambient(const Vec& z, const Space& s);
Vec ambient_to_tangent0(const Vec& v, const Space& s);

// The standard stereographic correspondence between the two hyperbolic models
// (an isometry for equal c).
Vec poincare_to_hyperboloid(const Vec& p, double c);
Vec hyperboloid_to_poincare(const Vec& x, double c);

}  // namespace manifold

// A point tagged with its space. Thin checked wrapper over the Vec ops.
struct Point {
    Vec x;
    Space space;

    Point() = default;
    Point(Vec coords, Space s) : x(std::move(coords)), space(s) {}
    int ambient() const { return static_cast<int>(x.size()); }
    int dim() const { return space.intrinsic_dim(ambient()); }
};

struct Tangent {
    Vec v;
    Point base;
};

Point make_point(const Vec& raw, const Space& s);
Point origin_point(const Space& s, int dim);
Point mobius_add(const Point& a, const Point& b);
Point mobius_matvec(const Mat& W, const Point& p);
Point exp_map(const Point& p, const Tangent& t);
Tangent log_map(const Point& p, const Point& q);
Tangent transport(const Point& p, const Point& q, const Tangent& t);
double distance(const Point& a, const Point& b);

// One record per node: "id kind c coord..." with 17 significant digits.
struct EmbeddingTable {
    Mat X;  // rows are ambient point coordinates
    Space space;

    int n() const { return static_cast<int>(X.rows()); }
    Vec point(int i) const { return X.row(i).transpose(); }
    void save(const std::string& path) const;
    static EmbeddingTable load(const std::string& path);
};

}  // namespace hrcb
