#pragma once

#include <string>
#include <vector>

#include "hrcb/diff.hpp"
#include "hrcb/manifold.hpp"

namespace hrcb {

// One named parameter tensor. Manifold-valued tensors hold one point per row
// and are updated with the Riemannian rule; everything else is flat.
struct TensorSpec {
    std::string name;
    ad::Mat value;
    bool trainable = true;
    bool on_manifold = false;
    Space space;
};

struct ModelParams {
    std::vector<TensorSpec> tensors;

    int find(const std::string& name) const;
    TensorSpec& at(const std::string& name);
    const TensorSpec& at(const std::string& name) const;
    // 17-digit decimal checkpoint with trainable/frozen flags
    void save(const std::string& path, const std::string& fingerprint = "") const;
    static ModelParams load(const std::string& path, std::string* fingerprint = nullptr);
    std::uint64_t checksum() const;  // bit-exact content hash
};

enum class AdamMode { EuclideanAdam, RiemannianAdam };

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    AdamMode mode = AdamMode::RiemannianAdam;
};

struct AdamState {
    std::vector<ad::Mat> m, v;  // shaped like their parameters
    long step = 0;
    int skipped = 0;  // steps rejected by the non-finite-gradient guard

    void init(const ModelParams& p);
};

// One update over all trainable tensors. grads[i] pairs with p.tensors[i]
// (empty matrices allowed for frozen tensors). Returns false when the step
// was skipped because a gradient was not finite.
bool adam_step(ModelParams& p, const std::vector<ad::Mat>& grads, AdamState& st,
               const AdamConfig& cfg);

}  // namespace hrcb
