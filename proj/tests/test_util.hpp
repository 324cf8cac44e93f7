#pragma once

#include <functional>
#include <vector>

#include "hrcb/common.hpp"
#include "hrcb/manifold.hpp"
#include "hrcb/tree.hpp"

namespace testutil {

inline hrcb::Vec random_ball_point(hrcb::Rng& rng, int d, double c, double max_frac = 0.8) {
    hrcb::Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.gaussian();
    double r = rng.uniform(0.05, max_frac) / std::sqrt(c);
    return v * (r / v.norm());
}

inline hrcb::Vec random_point(hrcb::Rng& rng, const hrcb::Space& s, int d) {
    using namespace hrcb;
    switch (s.kind) {
        case SpaceKind::Euclidean: {
            Vec v(d);
            for (int i = 0; i < d; ++i) v(i) = rng.gaussian(0.0, 1.5);
            return v;
        }
        case SpaceKind::PoincareBall: return random_ball_point(rng, d, s.c);
        case SpaceKind::Hyperboloid: {
            Vec sp(d);
            for (int i = 0; i < d; ++i) sp(i) = rng.gaussian(0.0, 1.2);
            Vec raw(d + 1);
            raw(0) = 0.0;
            raw.tail(d) = sp;
            return manifold::project(raw, s);
        }
    }
    throw hrcb::ConfigError("bad space");
}

inline hrcb::Vec random_tangent(hrcb::Rng& rng, const hrcb::Vec& x, const hrcb::Space& s,
                                double scl = 0.5) {
    using namespace hrcb;
    Vec v(x.size());
    for (int i = 0; i < x.size(); ++i) v(i) = rng.gaussian(0.0, scl);
    if (s.kind == SpaceKind::Hyperboloid) return manifold::project_tangent(x, v, s);
    return v;
}

// Uniform random tree on n nodes: parent of v drawn among earlier nodes.
inline hrcb::Hierarchy random_tree(hrcb::Rng& rng, int n) {
    std::vector<int> parent(n, -1);
    for (int v = 1; v < n; ++v) parent[v] = static_cast<int>(rng.below(v));
    return hrcb::Hierarchy::from_parents(parent);
}

// central finite differences of f at x, step h
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace testutil
