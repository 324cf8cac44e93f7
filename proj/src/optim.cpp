#include "hrcb/optim.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace hrcb {

using json = nlohmann::json;
using ad::Mat;

int ModelParams::find(const std::string& name) const {
    for (size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].name == name) return static_cast<int>(i);
    return -1;
}

TensorSpec& ModelParams::at(const std::string& name) {
    int i = find(name);
    if (i < 0) throw ConfigError("no tensor named " + name);
    return tensors[i];
}

const TensorSpec& ModelParams::at(const std::string& name) const {
    int i = find(name);
    if (i < 0) throw ConfigError("no tensor named " + name);
    return tensors[i];
}

void ModelParams::save(const std::string& path, const std::string& fingerprint) const {
    json j;
    j["fingerprint"] = fingerprint;
    json ts = json::array();
    for (const auto& t : tensors) {
        json tj;
        tj["name"] = t.name;
        tj["trainable"] = t.trainable;
        tj["on_manifold"] = t.on_manifold;
        tj["space"] = to_string(t.space.kind);
        tj["c"] = t.space.c;
        tj["rows"] = t.value.rows();
        tj["cols"] = t.value.cols();
        json vals = json::array();
        for (long r = 0; r < t.value.rows(); ++r)
            for (long c = 0; c < t.value.cols(); ++c) vals.push_back(fmt17(t.value(r, c)));
        tj["values"] = vals;
        ts.push_back(tj);
    }
    j["tensors"] = ts;
    std::ofstream f(path);
    if (!f) throw DataError("cannot open for write: " + path);
    f << j.dump() << '\n';
}

ModelParams ModelParams::load(const std::string& path, std::string* fingerprint) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open: " + path);
    json j = json::parse(f);
    if (fingerprint) *fingerprint = j.value("fingerprint", "");
    ModelParams p;
    for (const auto& tj : j.at("tensors")) {
        TensorSpec t;
        t.name = tj.at("name");
        t.trainable = tj.at("trainable");
        t.on_manifold = tj.at("on_manifold");
        t.space = Space(space_kind_from_string(tj.at("space")), tj.at("c"));
        long rows = tj.at("rows"), cols = tj.at("cols");
        t.value = Mat(rows, cols);
        const auto& vals = tj.at("values");
        size_t k = 0;
        for (long r = 0; r < rows; ++r)
            for (long c = 0; c < cols; ++c) t.value(r, c) = std::stod(vals.at(k++).get<std::string>());
        p.tensors.push_back(std::move(t));
    }
    return p;
}

std::uint64_t ModelParams::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tensors) {
        h = fnv1a64(t.name, h);
        for (long r = 0; r < t.value.rows(); ++r)
            for (long c = 0; c < t.value.cols(); ++c) {
                double v = t.value(r, c);
                std::uint64_t bits;
                std::memcpy(&bits, &v, sizeof(bits));
                for (int b = 0; b < 8; ++b) {
                    h ^= (bits >> (8 * b)) & 0xff;
                    h *= 0x100000001b3ULL;
                }
            }
    }
    return h;
}

void AdamState::init(const ModelParams& p) {
    m.clear();
    v.clear();
    for (const auto& t : p.tensors) {
        m.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
        // Manifold rows carry a scalar second moment (squared metric norm of
        // the Riemannian gradient); elementwise accumulators would be pushed
        // off the tangent plane by the update quotient.
        if (t.on_manifold && t.space.hyperbolic())
            v.push_back(Mat::Zero(t.value.rows(), 1));
        else
            v.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    }
    step = 0;
    skipped = 0;
}

namespace {

// Ambient gradient -> Riemannian gradient, one point per row.
Mat riemannian_gradient(const Mat& x, const Mat& g, const Space& s) {
    switch (s.kind) {
        case SpaceKind::Euclidean: return g;
        case SpaceKind::PoincareBall: {
            Mat out = g;
            for (long r = 0; r < x.rows(); ++r) {
                double f = 1.0 - s.c * x.row(r).squaredNorm();
                out.row(r) *= f * f / 4.0;
            }
            return out;
        }
        case SpaceKind::Hyperboloid: {
            Mat out = g;
            out.col(0) *= -1.0;  // metric correction J*g
            for (long r = 0; r < x.rows(); ++r) {
                Vec xr = x.row(r).transpose();
                Vec vr = out.row(r).transpose();
                out.row(r) = manifold::project_tangent(xr, vr, s).transpose();
            }
            return out;
        }
    }
    throw ConfigError("riemannian_gradient: bad space");
}

}  // namespace

bool adam_step(ModelParams& p, const std::vector<Mat>& grads, AdamState& st, const AdamConfig& cfg) {
    if (grads.size() != p.tensors.size()) throw ConfigError("adam_step: gradient count mismatch");
    if (st.m.size() != p.tensors.size()) throw ConfigError("adam_step: state not initialized");
    for (size_t i = 0; i < p.tensors.size(); ++i) {
        if (!p.tensors[i].trainable) continue;
        if (grads[i].size() != 0 && !grads[i].allFinite()) {
            ++st.skipped;
            return false;  // NaN guard: skip the whole step
        }
    }
    st.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));

    for (size_t i = 0; i < p.tensors.size(); ++i) {
        TensorSpec& t = p.tensors[i];
        if (!t.trainable) continue;
        Mat g = grads[i].size() == 0 ? Mat::Zero(t.value.rows(), t.value.cols()) : grads[i];
        bool riemannian = t.on_manifold && t.space.hyperbolic() && cfg.mode == AdamMode::RiemannianAdam;
        if (!riemannian && st.v[i].cols() != t.value.cols())
            st.v[i] = Mat::Zero(t.value.rows(), t.value.cols());

        if (!riemannian) {
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
            Mat mhat = st.m[i] / bc1;
            Mat vhat = st.v[i] / bc2;
            Mat denom = (vhat.array().sqrt() + cfg.eps).matrix();
            t.value += -cfg.lr * mhat.cwiseQuotient(denom);
        } else {
            Mat rg = riemannian_gradient(t.value, g, t.space);
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * rg;
            for (long r = 0; r < t.value.rows(); ++r) {
                Vec x = t.value.row(r).transpose();
                Vec rgr = rg.row(r).transpose();
                double n2 = t.space.kind == SpaceKind::Hyperboloid
                                ? std::max(manifold::minkowski_dot(rgr, rgr), 0.0)
                                : rgr.squaredNorm();
                st.v[i](r, 0) = cfg.beta2 * st.v[i](r, 0) + (1.0 - cfg.beta2) * n2;
                double vhat = st.v[i](r, 0) / bc2;
                Vec mhat = st.m[i].row(r).transpose() / bc1;
                Vec u = -cfg.lr / (std::sqrt(vhat) + cfg.eps) * mhat;
                u = manifold::project_tangent(x, u, t.space);
                Vec nx = manifold::project(manifold::exp_map(x, u, t.space), t.space);
                Vec mrow = manifold::project_tangent(x, st.m[i].row(r).transpose(), t.space);
                st.m[i].row(r) = manifold::transport(x, nx, mrow, t.space).transpose();
                t.value.row(r) = nx.transpose();
            }
        }
    }
    return true;
}

}  // namespace hrcb
