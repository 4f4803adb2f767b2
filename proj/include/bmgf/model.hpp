#pragma once

// Full classifier: encoder -> bilateral matching -> gated fusion ->
// conv/highway aggregation -> softmax head. The matching and fusion stages
// and the segment embeddings can each be switched off for ablations; the
// parameter set contains only what the active wiring uses.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bmgf/aggregation.hpp"
#include "bmgf/config.hpp"
#include "bmgf/encoder.hpp"
#include "bmgf/fusion.hpp"
#include "bmgf/matching.hpp"
#include "bmgf/optim.hpp"
#include "bmgf/schema.hpp"
#include "bmgf/vocab.hpp"

namespace bmgf {

class Model {
public:
    Model(const ModelConfig& cfg, const Schema& schema, Rng& rng)
        : cfg_(cfg), schema_(schema) {
        cfg_.validate();
        encoder_.emplace(cfg_, params_, rng);
        int width = cfg_.d_model;
        if (cfg_.use_bm) {
            matcher_.emplace(cfg_, params_, rng);
            width += matcher_->out_width();
        }
        if (cfg_.use_gf) fusion_.emplace(cfg_, width, params_, rng);
        aggregator_.emplace(cfg_, width, schema_.num_classes(), params_, rng);
    }

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    // Class probabilities (1 x num_classes).
    Tensor forward(const TokenizedPair& pair, Rng& rng, bool training) const {
        Tensor h = encoder_->encode(pair, rng, training);
        auto [h1, h2] = split_args(h, pair);
        Tensor x1 = h1, x2 = h2;
        if (cfg_.use_bm) {
            auto [m1, m2] = matcher_->match(h1, h2);
            x1 = concat_cols({h1, m1});
            x2 = concat_cols({h2, m2});
        }
        Tensor o1 = cfg_.use_gf ? fusion_->fuse(x1, rng, training) : x1;
        Tensor o2 = cfg_.use_gf ? fusion_->fuse(x2, rng, training) : x2;
        Tensor u1 = aggregator_->summarize(o1, rng, training);
        Tensor u2 = aggregator_->summarize(o2, rng, training);
        return aggregator_->predict(u1, u2, rng, training);
    }

    // Cross-entropy against the gold set: uniform mixture over the golds,
    // or the first gold alone when configured.
    Tensor loss(const Tensor& probs, const std::vector<int>& golds) const {
        if (golds.empty()) throw ContractError("loss: empty gold set");
        std::vector<double> target(schema_.num_classes(), 0.0);
        if (cfg_.first_label_only) {
            target.at(golds[0]) = 1.0;
        } else {
            const double w = 1.0 / golds.size();
            for (int g : golds) target.at(g) += w;
        }
        return cross_entropy(probs, target);
    }

    int predict_class(const TokenizedPair& pair, Rng& rng) const {
        Tensor probs = forward(pair, rng, false);
        return rowwise_argmax(probs)[0];
    }

    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }
    const ModelConfig& config() const { return cfg_; }
    const Schema& schema() const { return schema_; }

private:
    ModelConfig cfg_;
    Schema schema_;
    ParamSet params_;
    std::optional<Encoder> encoder_;
    std::optional<Matcher> matcher_;
    std::optional<Fusion> fusion_;
    std::optional<Aggregator> aggregator_;
};

// Tokenizes one example pair; an argument with no tokens becomes a single
// <unk> so every view has at least one real row.
inline TokenizedPair tokenize_pair(const Vocabulary& vocab, const std::string& arg1,
                                   const std::string& arg2, int max_len) {
    std::vector<int> a = vocab.encode(arg1);
    std::vector<int> b = vocab.encode(arg2);
    if (a.empty()) a.push_back(tok::kUnk);
    if (b.empty()) b.push_back(tok::kUnk);
    return make_token_pair(a, b, max_len);
}

}  // namespace bmgf
