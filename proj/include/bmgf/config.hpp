#pragma once

// Model and training configuration with JSON round-trip.

#include <string>

#include <json.hpp>

#include "bmgf/error.hpp"

namespace bmgf {

struct ModelConfig {
    std::string schema = "pdtb4";

    // encoder
    int vocab_size = 0;  // cap when building the vocabulary; 0 = unlimited
    int d_model = 128;
    int n_layers = 2;
    int n_heads = 8;
    int d_ffn = 256;
    int max_len = 128;

    // matching
    int perspectives = 16;

    // fusion
    int fusion_heads = 16;
    bool fusion_include_first_row = false;  // keep the leading summary row in the fused output

    // aggregation
    int conv_max_kernel = 2;
    int conv_filters = 64;
    int hidden_dim = 128;

    // regularization and optimization
    double dropout = 0.2;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 5e-4;
    double clip_norm = 2.0;
    int batch_size = 32;
    int epochs = 50;

    // component switches
    bool use_bm = true;  // bilateral matching
    bool use_gf = true;  // gated fusion
    bool use_se = true;  // segment embeddings

    bool first_label_only = false;  // train on the first gold label instead of the mixture

    void validate() const {
        auto pos = [](int v, const char* name) {
            if (v <= 0) throw ConfigError(std::string(name) + " must be positive");
        };
        pos(d_model, "d_model");
        pos(n_layers, "n_layers");
        pos(n_heads, "n_heads");
        pos(d_ffn, "d_ffn");
        pos(perspectives, "perspectives");
        pos(fusion_heads, "fusion_heads");
        pos(conv_max_kernel, "conv_max_kernel");
        pos(conv_filters, "conv_filters");
        pos(hidden_dim, "hidden_dim");
        pos(batch_size, "batch_size");
        if (vocab_size < 0) throw ConfigError("vocab_size must be >= 0");
        if (epochs < 0) throw ConfigError("epochs must be >= 0");
        if (max_len < 8) throw ConfigError("max_len must be at least 8");
        if (d_model % n_heads != 0) throw ConfigError("n_heads must divide d_model");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
        if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
        if (lr <= 0.0) throw ConfigError("lr must be positive");
    }
};

inline nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["schema"] = c.schema;
    j["vocab_size"] = c.vocab_size;
    j["d_model"] = c.d_model;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["d_ffn"] = c.d_ffn;
    j["max_len"] = c.max_len;
    j["perspectives"] = c.perspectives;
    j["fusion_heads"] = c.fusion_heads;
    j["fusion_include_first_row"] = c.fusion_include_first_row;
    j["conv_max_kernel"] = c.conv_max_kernel;
    j["conv_filters"] = c.conv_filters;
    j["hidden_dim"] = c.hidden_dim;
    j["dropout"] = c.dropout;
    j["lr"] = c.lr;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["weight_decay"] = c.weight_decay;
    j["clip_norm"] = c.clip_norm;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["use_bm"] = c.use_bm;
    j["use_gf"] = c.use_gf;
    j["use_se"] = c.use_se;
    j["first_label_only"] = c.first_label_only;
    return j;
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    ModelConfig defaults;
    nlohmann::json known = config_to_json(defaults);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.contains(it.key())) throw ConfigError("unknown config key: " + it.key());
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) {
            try {
                field = j.at(key).get<std::decay_t<decltype(field)>>();
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
            }
        }
    };
    get("schema", c.schema);
    get("vocab_size", c.vocab_size);
    get("d_model", c.d_model);
    get("n_layers", c.n_layers);
    get("n_heads", c.n_heads);
    get("d_ffn", c.d_ffn);
    get("max_len", c.max_len);
    get("perspectives", c.perspectives);
    get("fusion_heads", c.fusion_heads);
    get("fusion_include_first_row", c.fusion_include_first_row);
    get("conv_max_kernel", c.conv_max_kernel);
    get("conv_filters", c.conv_filters);
    get("hidden_dim", c.hidden_dim);
    get("dropout", c.dropout);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("adam_eps", c.adam_eps);
    get("weight_decay", c.weight_decay);
    get("clip_norm", c.clip_norm);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("use_bm", c.use_bm);
    get("use_gf", c.use_gf);
    get("use_se", c.use_se);
    get("first_label_only", c.first_label_only);
    c.validate();
    return c;
}

}  // namespace bmgf
