#pragma once

// Joint contextual encoder for an argument pair: token, position, and
// segment embeddings into a pre-norm transformer stack. Both arguments go
// through the same weights in one sequence:
//   <cls> a1 ... aM <sep> <sep> b1 ... bN <eos>
// Segment 0 covers everything through the first <sep>, segment 1 starts at
// the second <sep>.

#include <string>
#include <vector>

#include "bmgf/config.hpp"
#include "bmgf/error.hpp"
#include "bmgf/init.hpp"
#include "bmgf/ops.hpp"
#include "bmgf/optim.hpp"
#include "bmgf/rng.hpp"
#include "bmgf/vocab.hpp"

namespace bmgf {

struct TokenizedPair {
    std::vector<int> ids;
    std::vector<int> segments;  // 0 or 1 per position
    int m = 0;                  // kept arg1 tokens
    int n = 0;                  // kept arg2 tokens

    int length() const { return static_cast<int>(ids.size()); }
    // Boundary between the argument views: arg1 view is rows [0, m+2),
    // arg2 view is rows [m+2, m+n+4).
    int split_point() const { return m + 2; }
};

// Lays out the joint sequence, truncating from the right proportionally to
// the argument lengths when the pair exceeds max_len.
inline TokenizedPair make_token_pair(const std::vector<int>& arg1, const std::vector<int>& arg2,
                                     int max_len) {
    if (max_len < 8) throw ContractError("make_token_pair: max_len must be at least 8");
    const int budget = max_len - 4;
    int m = static_cast<int>(arg1.size());
    int n = static_cast<int>(arg2.size());
    if (m + n > budget) {
        int keep_m = static_cast<int>(static_cast<int64_t>(budget) * m / (m + n));
        if (m > 0 && keep_m < 1) keep_m = 1;
        if (n > 0 && budget - keep_m < 1) keep_m = budget - 1;
        if (keep_m > m) keep_m = m;
        if (budget - keep_m > n) keep_m = budget - n;
        m = keep_m;
        n = budget - keep_m;
    }
    TokenizedPair p;
    p.m = m;
    p.n = n;
    p.ids.reserve(m + n + 4);
    p.ids.push_back(tok::kCls);
    p.ids.insert(p.ids.end(), arg1.begin(), arg1.begin() + m);
    p.ids.push_back(tok::kSep);
    p.ids.push_back(tok::kSep);
    p.ids.insert(p.ids.end(), arg2.begin(), arg2.begin() + n);
    p.ids.push_back(tok::kEos);
    p.segments.assign(p.ids.size(), 1);
    for (int t = 0; t <= m + 1; ++t) p.segments[t] = 0;
    return p;
}

class Encoder {
public:
    Encoder(const ModelConfig& cfg, ParamSet& params, Rng& rng)
        : cfg_(cfg), params_(&params) {
        if (cfg.vocab_size < tok::kReserved) {
            throw ConfigError("encoder: vocab_size must cover the reserved tokens");
        }
        const int d = cfg.d_model;
        params.add("encoder.tok_emb", init::embedding(rng, cfg.vocab_size, d), true);
        params.add("encoder.pos_emb", init::embedding(rng, cfg.max_len, d), true);
        if (cfg.use_se) params.add("encoder.seg_emb", init::embedding(rng, 2, d), true);
        for (int i = 0; i < cfg.n_layers; ++i) {
            const std::string p = "encoder.l" + std::to_string(i) + ".";
            params.add(p + "ln1.gain", init::ones_vec(d), false);
            params.add(p + "ln1.bias", init::zeros_vec(d), false);
            for (const char* w : {"wq", "wk", "wv", "wo"})
                params.add(p + "attn." + w, init::linear(rng, d, d), true);
            for (const char* b : {"bq", "bk", "bv", "bo"})
                params.add(p + "attn." + b, init::zeros_vec(d), false);
            params.add(p + "ln2.gain", init::ones_vec(d), false);
            params.add(p + "ln2.bias", init::zeros_vec(d), false);
            params.add(p + "ffn.w1", init::linear(rng, d, cfg.d_ffn), true);
            params.add(p + "ffn.b1", init::zeros_vec(cfg.d_ffn), false);
            params.add(p + "ffn.w2", init::linear(rng, cfg.d_ffn, d), true);
            params.add(p + "ffn.b2", init::zeros_vec(d), false);
        }
        params.add("encoder.ln_f.gain", init::ones_vec(d), false);
        params.add("encoder.ln_f.bias", init::zeros_vec(d), false);
    }

    // Contextual states (length x d_model). Attention never reads from
    // <pad> columns and <pad> rows are zeroed in the output.
    Tensor encode(const TokenizedPair& pair, Rng& rng, bool training) const {
        const int T = pair.length();
        if (T > cfg_.max_len) {
            throw InputError("encoder: sequence of " + std::to_string(T) + " exceeds max_len " +
                             std::to_string(cfg_.max_len));
        }
        if (pair.segments.size() != pair.ids.size()) {
            throw ContractError("encoder: segment row count does not match ids");
        }
        ParamSet& ps = *params_;
        Tensor x = embedding_rows(ps.find("encoder.tok_emb"), pair.ids);
        std::vector<int> positions(T);
        for (int t = 0; t < T; ++t) positions[t] = t;
        x = add(x, embedding_rows(ps.find("encoder.pos_emb"), positions));
        if (cfg_.use_se) x = add(x, embedding_rows(ps.find("encoder.seg_emb"), pair.segments));
        x = dropout(x, 1.0 - cfg_.dropout, rng, training);

        std::vector<uint8_t> valid(T);
        bool any_pad = false;
        for (int t = 0; t < T; ++t) {
            valid[t] = pair.ids[t] != tok::kPad;
            any_pad = any_pad || !valid[t];
        }

        for (int i = 0; i < cfg_.n_layers; ++i) {
            const std::string p = "encoder.l" + std::to_string(i) + ".";
            Tensor h = layer_norm(x, ps.find(p + "ln1.gain"), ps.find(p + "ln1.bias"));
            h = dropout(h, 1.0 - cfg_.dropout, rng, training);
            x = add(x, attention(h, p, valid));
            Tensor f = layer_norm(x, ps.find(p + "ln2.gain"), ps.find(p + "ln2.bias"));
            f = dropout(f, 1.0 - cfg_.dropout, rng, training);
            Tensor mid = relu(add_bias(matmul(f, ps.find(p + "ffn.w1")), ps.find(p + "ffn.b1")));
            x = add(x, add_bias(matmul(mid, ps.find(p + "ffn.w2")), ps.find(p + "ffn.b2")));
        }
        x = layer_norm(x, ps.find("encoder.ln_f.gain"), ps.find("encoder.ln_f.bias"));
        if (any_pad) {
            std::vector<double> mask(T);
            for (int t = 0; t < T; ++t) mask[t] = valid[t] ? 1.0 : 0.0;
            x = mul_col(x, Tensor::vec(mask));
        }
        return x;
    }

    const ModelConfig& config() const { return cfg_; }

private:
    Tensor attention(const Tensor& h, const std::string& prefix, const std::vector<uint8_t>& valid) const {
        ParamSet& ps = *params_;
        const int d = cfg_.d_model;
        const int nh = cfg_.n_heads;
        const int dh = d / nh;
        Tensor q = add_bias(matmul(h, ps.find(prefix + "attn.wq")), ps.find(prefix + "attn.bq"));
        Tensor k = add_bias(matmul(h, ps.find(prefix + "attn.wk")), ps.find(prefix + "attn.bk"));
        Tensor v = add_bias(matmul(h, ps.find(prefix + "attn.wv")), ps.find(prefix + "attn.bv"));
        std::vector<Tensor> heads;
        heads.reserve(nh);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int hd = 0; hd < nh; ++hd) {
            Tensor qh = slice_cols(q, hd * dh, (hd + 1) * dh);
            Tensor kh = slice_cols(k, hd * dh, (hd + 1) * dh);
            Tensor vh = slice_cols(v, hd * dh, (hd + 1) * dh);
            Tensor scores = affine(matmul(qh, transpose(kh)), scale, 0.0);
            heads.push_back(matmul(softmax_rows(scores, valid), vh));
        }
        Tensor cat = nh == 1 ? heads[0] : concat_cols(heads);
        return add_bias(matmul(cat, ps.find(prefix + "attn.wo")), ps.find(prefix + "attn.bo"));
    }

    ModelConfig cfg_;
    ParamSet* params_;
};

// Views of the joint encoding: (m+2 x d) rows for the first argument
// (<cls> through the first <sep>) and (n+2 x d) for the second (second
// <sep> through <eos>).
inline std::pair<Tensor, Tensor> split_args(const Tensor& h, const TokenizedPair& pair) {
    if (h.rows() != pair.length()) {
        throw ContractError("split_args: " + std::to_string(h.rows()) + " rows vs sequence of " +
                            std::to_string(pair.length()));
    }
    const int cut = pair.split_point();
    return {slice_rows(h, 0, cut), slice_rows(h, cut, h.rows())};
}

}  // namespace bmgf
