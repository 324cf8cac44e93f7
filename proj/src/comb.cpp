#include "hrcb/comb.hpp"

#include <boost/math/constants/constants.hpp>

#include <fstream>
#include <sstream>

namespace hrcb {

namespace {

unsigned digits_for_bits(unsigned bits) {
    return static_cast<unsigned>(std::ceil(bits * 0.30103)) + 4;
}

struct C {
    BigReal re, im;
    C operator+(const C& o) const { return {re + o.re, im + o.im}; }
    C operator-(const C& o) const { return {re - o.re, im - o.im}; }
    C operator*(const C& o) const { return {re * o.re - im * o.im, re * o.im + im * o.re}; }
    C conj() const { return {re, -im}; }
    BigReal norm2() const { return re * re + im * im; }
};

C cdiv(const C& a, const C& b) {
    BigReal d = b.norm2();
    return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
}

// Mobius translation taking 0 to a: z -> (z + a) / (1 + conj(a) z)
C translate(const C& a, const C& z) {
    C one{BigReal(1), BigReal(0)};
    return cdiv(z + a, one + a.conj() * z);
}

// frame centered at a: z -> (z - a) / (1 - conj(a) z)
C to_frame(const C& a, const C& z) {
    C one{BigReal(1), BigReal(0)};
    return cdiv(z - a, one - a.conj() * z);
}

}  // namespace

void set_working_precision_bits(unsigned bits) {
    BigReal::default_precision(digits_for_bits(bits));
}

void round_to_bits(BigReal& x, unsigned bits) {
    mpfr_prec_round(x.backend().data(), static_cast<mpfr_prec_t>(bits), MPFR_RNDN);
}

BigEmbedding comb_embed(const Hierarchy& h, const CombConfig& cfg) {
    if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw ConfigError("comb: tau must be positive");
    if (!(cfg.cone > 0.0) || cfg.cone > M_PI / 2.0 + 1e-12)
        throw ConfigError("comb: cone half-width must lie in (0, pi/2]");
    if (!h.origin_tag.empty()) throw ConfigError("comb: input must be a single tree");
    h.validate();
    set_working_precision_bits(cfg.bits);

    const BigReal pi = boost::math::constants::pi<BigReal>();
    const BigReal r = tanh(BigReal(cfg.tau) / 2);

    BigEmbedding E;
    E.bits = cfg.bits;
    E.pts.assign(h.n, BigPoint{BigReal(0), BigReal(0)});

    std::vector<int> order = h.bfs_order();
    for (int v : order) {
        const auto& kids = h.children[v];
        if (kids.empty()) continue;
        C zv{E.pts[v].re, E.pts[v].im};
        long k = static_cast<long>(kids.size());
        for (long i = 0; i < k; ++i) {
            BigReal theta;
            if (v == h.root) {
                theta = 2 * pi * BigReal(i) / BigReal(k);
            } else {
                const C zp{E.pts[h.parent[v]].re, E.pts[h.parent[v]].im};
                C pf = to_frame(zv, zp);
                BigReal theta_in = atan2(pf.im, pf.re);
                // cone centered opposite the parent, children at cell centers
                BigReal delta = BigReal(cfg.cone) * BigReal(2 * i + 1 - k) / BigReal(k);
                theta = theta_in + pi + delta;
            }
            C w{r * cos(theta), r * sin(theta)};
            C zc = translate(zv, w);
            // stored coordinates carry exactly cfg.bits significand bits
            round_to_bits(zc.re, cfg.bits);
            round_to_bits(zc.im, cfg.bits);
            E.pts[kids[i]] = BigPoint{zc.re, zc.im};
        }
    }
    return E;
}

BigEmbedding downcast(const BigEmbedding& E, unsigned bits) {
    set_working_precision_bits(std::max(E.bits, bits));
    BigEmbedding out;
    out.bits = bits;
    out.pts = E.pts;
    for (auto& p : out.pts) {
        round_to_bits(p.re, bits);
        round_to_bits(p.im, bits);
        BigReal n2 = p.re * p.re + p.im * p.im;
        if (n2 >= 1) {
            BigReal f = (1 - BigReal("1e-5")) / sqrt(n2);
            p.re *= f;
            p.im *= f;
            round_to_bits(p.re, bits);
            round_to_bits(p.im, bits);
        }
    }
    return out;
}

BigReal big_disk_distance(const BigPoint& a, const BigPoint& b) {
    BigReal dx = a.re - b.re, dy = a.im - b.im;
    BigReal d2 = dx * dx + dy * dy;
    if (d2 == 0) return BigReal(0);
    BigReal ua = 1 - (a.re * a.re + a.im * a.im);
    BigReal ub = 1 - (b.re * b.re + b.im * b.im);
    BigReal z = 1 + 2 * d2 / (ua * ub);
    if (z < 1) z = 1;
    return acosh(z);
}

long count_coincident_pairs(const BigEmbedding& E) {
    long cnt = 0;
    for (int i = 0; i < E.n(); ++i)
        for (int j = i + 1; j < E.n(); ++j)
            if (E.pts[i].re == E.pts[j].re && E.pts[i].im == E.pts[j].im) ++cnt;
    return cnt;
}

HrcScores<BigReal> evaluate_big(const Hierarchy& h, const BigEmbedding& E,
                                const MetricOptions& opt) {
    if (E.n() != h.n) throw DataError("evaluate_big: node count mismatch");
    // evaluation precision never below the table's own precision
    set_working_precision_bits(std::max(E.bits, 256u));
    auto dist = [&](int i, int j) { return big_disk_distance(E.pts[i], E.pts[j]); };
    auto odist = [&](int i) {
        BigPoint o{BigReal(0), BigReal(0)};
        return big_disk_distance(E.pts[i], o);
    };
    return evaluate_hierarchy<BigReal>(h, dist, odist, opt);
}

HrcScores<double> to_double_scores(const HrcScores<BigReal>& s) {
    HrcScores<double> d;
    d.m_root = s.m_root.convert_to<double>();
    d.m_origin = s.m_origin.convert_to<double>();
    d.m_parent = s.m_parent.convert_to<double>();
    d.m_sibling = s.m_sibling.convert_to<double>();
    d.m_dist = s.m_dist.convert_to<double>();
    d.m_dist_norm = s.m_dist_norm.convert_to<double>();
    return d;
}

void BigEmbedding::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    unsigned digits = digits_for_bits(bits) + 4;
    f << "# bits " << bits << " n " << pts.size() << '\n';
    for (size_t i = 0; i < pts.size(); ++i)
        f << i << ' ' << pts[i].re.str(digits) << ' ' << pts[i].im.str(digits) << '\n';
}

BigEmbedding BigEmbedding::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    std::string hash, bitsw, nw;
    unsigned bits;
    size_t n;
    f >> hash >> bitsw >> bits >> nw >> n;
    if (hash != "#" || bitsw != "bits" || nw != "n") throw DataError(path + ": bad header");
    set_working_precision_bits(bits);
    BigEmbedding E;
    E.bits = bits;
    E.pts.resize(n);
    for (size_t i = 0; i < n; ++i) {
        size_t id;
        std::string re, im;
        if (!(f >> id >> re >> im)) throw DataError(path + ": truncated record");
        E.pts[i].re = BigReal(re);
        E.pts[i].im = BigReal(im);
        round_to_bits(E.pts[i].re, bits);
        round_to_bits(E.pts[i].im, bits);
    }
    return E;
}

EmbeddingTable BigEmbedding::to_table() const {
    EmbeddingTable t;
    t.space = Space(SpaceKind::PoincareBall, 1.0);
    t.X = Mat(n(), 2);
    for (int i = 0; i < n(); ++i) {
        t.X(i, 0) = pts[i].re.convert_to<double>();
        t.X(i, 1) = pts[i].im.convert_to<double>();
        t.X.row(i) = manifold::project(t.X.row(i).transpose(), t.space).transpose();
    }
    return t;
}

}  // namespace hrcb
