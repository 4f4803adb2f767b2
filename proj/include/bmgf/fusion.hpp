#pragma once

// Gated multi-head fusion. The per-token concatenation of contextual state
// and match features goes through one round of multi-head self-attention
// (no residual, no layer norm, no projection biases), then a per-position
// scalar gate blends the attended representation with the original:
//   q' = MultiHead(x);  a = sigmoid([x, q'] w);  out = a*q' + (1-a)*x
// The leading row of each view (<cls> or the duplicated <sep>) is dropped
// from the output unless configured otherwise.

#include <string>
#include <vector>

#include "bmgf/config.hpp"
#include "bmgf/error.hpp"
#include "bmgf/init.hpp"
#include "bmgf/ops.hpp"
#include "bmgf/optim.hpp"

namespace bmgf {

class Fusion {
public:
    // width: dimensionality of the per-token input (d_model plus match
    // features when matching is enabled).
    Fusion(const ModelConfig& cfg, int width, ParamSet& params, Rng& rng)
        : width_(width),
          heads_(cfg.fusion_heads),
          include_first_(cfg.fusion_include_first_row),
          dropout_(cfg.dropout),
          params_(&params) {
        if (width_ % heads_ != 0) {
            throw ConfigError("fusion: " + std::to_string(heads_) + " heads do not divide width " +
                              std::to_string(width_));
        }
        for (const char* w : {"wq", "wk", "wv", "wo"})
            params.add(std::string("fusion.") + w, init::linear(rng, width_, width_), true);
        params.add("fusion.gate", init::linear(rng, 2 * width_, 1), true);
    }

    int out_width() const { return width_; }

    Tensor fuse(const Tensor& x_in, Rng& rng, bool training) const {
        if (x_in.cols() != width_) {
            throw ShapeError("fusion: expected width " + std::to_string(width_) + ", got " +
                             detail::shape_str(x_in.shape()));
        }
        if (x_in.rows() < 2 && !include_first_) {
            throw ContractError("fusion: view of " + std::to_string(x_in.rows()) +
                                " rows leaves nothing after dropping the first");
        }
        ParamSet& ps = *params_;
        Tensor x = dropout(x_in, 1.0 - dropout_, rng, training);
        Tensor q = matmul(x, ps.find("fusion.wq"));
        Tensor k = matmul(x, ps.find("fusion.wk"));
        Tensor v = matmul(x, ps.find("fusion.wv"));
        const int dh = width_ / heads_;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<Tensor> head_out;
        head_out.reserve(heads_);
        for (int h = 0; h < heads_; ++h) {
            Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
            Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
            Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
            Tensor p = softmax_rows(affine(matmul(qh, transpose(kh)), scale, 0.0));
            head_out.push_back(matmul(p, vh));
        }
        Tensor attended = heads_ == 1 ? head_out[0] : concat_cols(head_out);
        Tensor qp = matmul(attended, ps.find("fusion.wo"));
        Tensor out = blend(x, qp);
        if (include_first_) return out;
        return slice_rows(out, 1, out.rows());
    }

    // Scalar per-position gate between the attended rows and the input
    // rows; each output row lies on the segment between its two sources.
    Tensor blend(const Tensor& x, const Tensor& attended_proj) const {
        Tensor a = sigmoid(matmul(concat_cols({x, attended_proj}), params_->find("fusion.gate")));
        return add(mul_col(attended_proj, a), mul_col(x, affine(a, -1.0, 1.0)));
    }

private:
    int width_, heads_;
    bool include_first_;
    double dropout_;
    ParamSet* params_;
};

}  // namespace bmgf
