#pragma once

// Named parameter registry, global-norm clipping, and Adam.

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "bmgf/error.hpp"
#include "bmgf/tensor.hpp"

namespace bmgf {

struct Param {
    std::string name;
    Tensor tensor;
    bool decay;  // false for biases and gains, which skip weight decay
};

class ParamSet {
public:
    void add(const std::string& name, Tensor t, bool decay) {
        if (index_.count(name)) throw ContractError("ParamSet: duplicate parameter " + name);
        t.set_requires_grad(true);
        index_[name] = items_.size();
        items_.push_back({name, std::move(t), decay});
    }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Tensor& find(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ContractError("ParamSet: unknown parameter " + name);
        return items_[it->second].tensor;
    }

    const std::vector<Param>& all() const { return items_; }
    std::vector<Param>& all() { return items_; }
    size_t size() const { return items_.size(); }

    void zero_grads() {
        for (auto& p : items_) p.tensor.zero_grad();
    }

    std::vector<Tensor> tensors() const {
        std::vector<Tensor> out;
        out.reserve(items_.size());
        for (const auto& p : items_) out.push_back(p.tensor);
        return out;
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& p : items_) n += p.tensor.numel();
        return n;
    }

private:
    std::vector<Param> items_;
    std::unordered_map<std::string, size_t> index_;
};

// Scales every gradient by max_norm/norm when the global L2 norm exceeds
// max_norm. Returns the norm before clipping.
inline double clip_grad_l2(ParamSet& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params.all()) {
        for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& p : params.all()) {
            for (double& g : p.tensor.mutable_grad()) g *= scale;
        }
    }
    return norm;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // added to the effective gradient of decay-flagged params
};

struct AdamState {
    struct Moments {
        std::vector<double> m, v;
    };
    int64_t step = 0;
    std::unordered_map<std::string, Moments> moments;
};

// One Adam update over every parameter. Weight decay is folded into the
// gradient seen by the moment estimates; the stored grad buffers are not
// modified, so clipping before this call sees the raw loss gradients.
inline void adam_step(ParamSet& params, AdamState& state, const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& p : params.all()) {
        auto& mom = state.moments[p.name];
        const int n = p.tensor.numel();
        if (mom.m.empty()) {
            mom.m.assign(n, 0.0);
            mom.v.assign(n, 0.0);
        }
        const auto& grad = p.tensor.grad();
        auto& value = p.tensor.mutable_values();
        const double wd = p.decay ? cfg.weight_decay : 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = grad[i] + wd * value[i];
            mom.m[i] = cfg.beta1 * mom.m[i] + (1.0 - cfg.beta1) * g;
            mom.v[i] = cfg.beta2 * mom.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace bmgf
