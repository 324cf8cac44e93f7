#pragma once

#include <boost/multiprecision/mpfr.hpp>
#include <string>
#include <vector>

#include "hrcb/metrics.hpp"
#include "hrcb/tree.hpp"

namespace hrcb {

// Arbitrary-precision real; precision is set per thread in decimal digits
// derived from a bit count (mpfr significand semantics underneath).
using BigReal = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                              boost::multiprecision::et_off>;

// Thread-local working precision for subsequently constructed values.
void set_working_precision_bits(unsigned bits);
// Round an existing value to exactly `bits` significand bits in place.
void round_to_bits(BigReal& x, unsigned bits);

struct CombConfig {
    unsigned bits = 3000;  // significand bits; 32 is the degraded mode
    double tau = 1.0;      // hyperbolic edge length of the construction
    // child-cone policy: children occupy (-cone, +cone) around the direction
    // opposite the parent; narrower cones tighten sibling clusters
    double cone = M_PI / 2.0;
};

struct BigPoint {
    BigReal re, im;
};

// 2-d unit-disk embedding at explicit precision (curvature fixed at 1).
struct BigEmbedding {
    unsigned bits = 3000;
    std::vector<BigPoint> pts;

    int n() const { return static_cast<int>(pts.size()); }
    void save(const std::string& path) const;
    static BigEmbedding load(const std::string& path);
    // lossy conversion for double-precision consumers
    EmbeddingTable to_table() const;
};

// Combinatorial construction: root at the origin, children of the root
// spread uniformly over 2*pi, deeper children spread over the half-plane
// cone facing away from the parent, every edge of hyperbolic length tau.
BigEmbedding comb_embed(const Hierarchy& h, const CombConfig& cfg);

// Round every coordinate to `bits` significand bits, re-projecting into the
// open disk when rounding lands on or outside the boundary.
BigEmbedding downcast(const BigEmbedding& E, unsigned bits);

BigReal big_disk_distance(const BigPoint& a, const BigPoint& b);

// Pairs of nodes whose coordinates became exactly equal (distance zero).
long count_coincident_pairs(const BigEmbedding& E);

// Full-precision metric evaluation (distances never leave BigReal).
HrcScores<BigReal> evaluate_big(const Hierarchy& h, const BigEmbedding& E,
                                const MetricOptions& opt = {});

HrcScores<double> to_double_scores(const HrcScores<BigReal>& s);

}  // namespace hrcb
