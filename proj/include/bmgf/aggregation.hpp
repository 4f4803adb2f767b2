#pragma once

// Aggregation and prediction. Each argument's fused token sequence is
// summarized by banks of 1-D convolutions (kernel sizes 1..z, s filters
// each, ReLU, max over time) into a (1 x z*s) vector, refined by a highway
// layer with a scalar transform gate shared between the two arguments, and
// the concatenated pair goes through a two-layer softmax classifier.

#include <string>
#include <vector>

#include "bmgf/config.hpp"
#include "bmgf/error.hpp"
#include "bmgf/init.hpp"
#include "bmgf/ops.hpp"
#include "bmgf/optim.hpp"

namespace bmgf {

class Aggregator {
public:
    // width: per-token input dimensionality; classes: output label count.
    Aggregator(const ModelConfig& cfg, int width, int classes, ParamSet& params, Rng& rng)
        : width_(width),
          z_(cfg.conv_max_kernel),
          s_(cfg.conv_filters),
          hidden_(cfg.hidden_dim),
          classes_(classes),
          dropout_(cfg.dropout),
          params_(&params) {
        if (classes_ < 2) throw ConfigError("aggregation: need at least 2 classes");
        for (int c = 1; c <= z_; ++c) {
            const std::string p = "agg.conv.k" + std::to_string(c);
            params.add(p + ".w", init::fan_in_rows(rng, s_, c * width_, c * width_), true);
            params.add(p + ".b", init::zeros_vec(s_), false);
        }
        const int zs = z_ * s_;
        params.add("agg.highway.wh", init::linear(rng, zs, zs), true);
        params.add("agg.highway.bh", init::zeros_vec(zs), false);
        params.add("agg.highway.wg", init::linear(rng, zs, 1), true);
        params.add("agg.highway.bg", init::zeros_vec(1), false);
        params.add("head.w1", init::linear(rng, 2 * zs, hidden_), true);
        params.add("head.b1", init::zeros_vec(hidden_), false);
        params.add("head.w2", init::linear(rng, hidden_, classes_), true);
        params.add("head.b2", init::zeros_vec(classes_), false);
    }

    int summary_width() const { return z_ * s_; }

    // (T x width) fused tokens -> (1 x z*s) summary.
    Tensor summarize(const Tensor& o_in, Rng& rng, bool training) const {
        if (o_in.cols() != width_) {
            throw ShapeError("aggregation: expected width " + std::to_string(width_) + ", got " +
                             detail::shape_str(o_in.shape()));
        }
        ParamSet& ps = *params_;
        Tensor o = dropout(o_in, 1.0 - dropout_, rng, training);
        if (o.rows() < z_) {
            // Short views are zero-padded so every kernel size stays applicable.
            Tensor pad = Tensor({z_ - o.rows(), width_},
                                std::vector<double>(static_cast<size_t>(z_ - o.rows()) * width_, 0.0));
            o = concat_rows({o, pad});
        }
        std::vector<Tensor> pooled;
        pooled.reserve(z_);
        for (int c = 1; c <= z_; ++c) {
            const std::string p = "agg.conv.k" + std::to_string(c);
            Tensor r = relu(conv1d(o, ps.find(p + ".w"), ps.find(p + ".b"), c));
            pooled.push_back(colwise_max(r));
        }
        Tensor u = z_ == 1 ? pooled[0] : concat_cols(pooled);
        return highway(u);
    }

    // Class probabilities (1 x classes) from the two summaries.
    Tensor predict(const Tensor& u1, const Tensor& u2, Rng& rng, bool training) const {
        ParamSet& ps = *params_;
        Tensor x = concat_cols({u1, u2});
        x = dropout(x, 1.0 - dropout_, rng, training);
        Tensor h = relu(add_bias(matmul(x, ps.find("head.w1")), ps.find("head.b1")));
        h = dropout(h, 1.0 - dropout_, rng, training);
        Tensor logits = add_bias(matmul(h, ps.find("head.w2")), ps.find("head.b2"));
        return softmax_rows(logits);
    }

    // Scalar transform gate per summary: output between u and relu(W u + b).
    Tensor highway(const Tensor& u) const {
        ParamSet& ps = *params_;
        Tensor t = relu(add_bias(matmul(u, ps.find("agg.highway.wh")), ps.find("agg.highway.bh")));
        Tensor g = sigmoid(add_bias(matmul(u, ps.find("agg.highway.wg")), ps.find("agg.highway.bg")));
        return add(mul_col(t, g), mul_col(u, affine(g, -1.0, 1.0)));
    }

private:
    int width_, z_, s_, hidden_, classes_;
    double dropout_;
    ParamSet* params_;
};

}  // namespace bmgf
