#pragma once

// Bilateral multi-perspective matching. Each token of one argument view is
// compared against the other argument under l learned perspectives, four
// ways, giving 5l match features per token:
//   full      (2l): against the other view's first and last rows
//   maxpool    (l): elementwise max over all of the other view's rows
//   attentive  (l): against the cosine-weighted mean of the other view
//   max-att    (l): against the other view's best-cosine row
// The five perspective matrices are shared between the two directions.

#include <utility>
#include <vector>

#include "bmgf/config.hpp"
#include "bmgf/init.hpp"
#include "bmgf/ops.hpp"
#include "bmgf/optim.hpp"

namespace bmgf {

class Matcher {
public:
    Matcher(const ModelConfig& cfg, ParamSet& params, Rng& rng)
        : l_(cfg.perspectives), d_(cfg.d_model), params_(&params) {
        for (const char* name : {"w_full_first", "w_full_last", "w_maxpool", "w_attentive", "w_max_attentive"}) {
            params.add(std::string("match.") + name, init::fan_in_rows(rng, l_, d_, d_), true);
        }
    }

    int out_width() const { return 5 * l_; }

    // h1: (M+2 x d) view, h2: (N+2 x d) view. Returns per-token match
    // features for both directions, (M+2 x 5l) and (N+2 x 5l).
    std::pair<Tensor, Tensor> match(const Tensor& h1, const Tensor& h2) const {
        if (h1.cols() != d_ || h2.cols() != d_) {
            throw ShapeError("match: expected width " + std::to_string(d_) + ", got " +
                             detail::shape_str(h1.shape()) + " and " + detail::shape_str(h2.shape()));
        }
        // Plain cosine grid feeds both attentive variants in both directions.
        Tensor c12 = cosine_pairwise(h1, h2);
        Tensor c21 = transpose(c12);
        return {one_direction(h1, h2, c12), one_direction(h2, h1, c21)};
    }

private:
    Tensor one_direction(const Tensor& a, const Tensor& b, const Tensor& cos_ab) const {
        ParamSet& ps = *params_;
        Tensor first = slice_rows(b, 0, 1);
        Tensor last = slice_rows(b, b.rows() - 1, b.rows());
        Tensor m_first = multicos_one(a, first, ps.find("match.w_full_first"));
        Tensor m_last = multicos_one(a, last, ps.find("match.w_full_last"));
        Tensor m_max = multicos_max(a, b, ps.find("match.w_maxpool"));
        Tensor mean_b = attentive_average(cos_ab, b);
        Tensor m_att = multicos_rows(a, mean_b, ps.find("match.w_attentive"));
        Tensor best_b = gather_rows(b, rowwise_argmax(cos_ab));
        Tensor m_maxatt = multicos_rows(a, best_b, ps.find("match.w_max_attentive"));
        return concat_cols({m_first, m_last, m_max, m_att, m_maxatt});
    }

    int l_, d_;
    ParamSet* params_;
};

}  // namespace bmgf
