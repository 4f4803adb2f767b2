#pragma once

// Self-describing JSON checkpoint: format tag, version, config, vocabulary,
// and every named parameter with its shape. Doubles survive the round trip
// bit for bit (shortest-round-trip serialization).

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bmgf/config.hpp"
#include "bmgf/error.hpp"
#include "bmgf/model.hpp"
#include "bmgf/optim.hpp"
#include "bmgf/schema.hpp"
#include "bmgf/vocab.hpp"

namespace bmgf {

inline constexpr const char* kCheckpointFormat = "bmgf-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json checkpoint_to_json(const ModelConfig& cfg, const Vocabulary& vocab,
                                                 const ParamSet& params) {
    nlohmann::ordered_json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["config"] = config_to_json(cfg);
    j["vocab"] = vocab.tokens();
    nlohmann::ordered_json pj;
    for (const auto& p : params.all()) {
        pj[p.name] = {{"shape", p.tensor.shape()}, {"decay", p.decay}, {"values", p.tensor.values()}};
    }
    j["params"] = pj;
    return j;
}

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg, const Vocabulary& vocab,
                            const ParamSet& params) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out << checkpoint_to_json(cfg, vocab, params).dump();
    out << '\n';
    if (!out) throw DataError("failed writing checkpoint " + path);
}

// A model restored from disk together with everything needed to use it.
struct LoadedModel {
    ModelConfig config;
    Schema schema;
    Vocabulary vocab;
    std::unique_ptr<Model> model;
};

inline LoadedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("format") || j["format"] != kCheckpointFormat) {
        throw DataError("checkpoint " + path + " has no recognizable format tag");
    }
    if (!j.contains("version")) throw DataError("checkpoint " + path + " is missing the version");
    if (j["version"] != kCheckpointVersion) {
        throw DataError("checkpoint " + path + " has version " + j["version"].dump() + ", expected " +
                        std::to_string(kCheckpointVersion));
    }

    LoadedModel lm;
    lm.config = config_from_json(j.at("config"));
    lm.schema = Schema::parse(lm.config.schema);
    lm.vocab = Vocabulary::from_lines(j.at("vocab").get<std::vector<std::string>>());
    if (lm.vocab.size() != lm.config.vocab_size) {
        throw DataError("checkpoint " + path + ": vocabulary of " + std::to_string(lm.vocab.size()) +
                        " entries vs configured " + std::to_string(lm.config.vocab_size));
    }

    // Build with the architecture from the config, then overwrite values.
    Rng scratch(0);
    lm.model = std::make_unique<Model>(lm.config, lm.schema, scratch);
    const auto& pj = j.at("params");
    ParamSet& ps = lm.model->params();
    for (const auto& p : ps.all()) {
        if (!pj.contains(p.name)) throw DataError("checkpoint " + path + " is missing parameter " + p.name);
    }
    if (pj.size() != ps.size()) {
        for (auto it = pj.begin(); it != pj.end(); ++it) {
            if (!ps.has(it.key())) {
                throw DataError("checkpoint " + path + " has unexpected parameter " + it.key());
            }
        }
    }
    for (auto& p : ps.all()) {
        const auto& entry = pj.at(p.name);
        auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape != p.tensor.shape()) {
            throw DataError("checkpoint " + path + ": parameter " + p.name + " has shape " +
                            detail::shape_str(shape) + ", expected " + detail::shape_str(p.tensor.shape()));
        }
        auto values = entry.at("values").get<std::vector<double>>();
        if (static_cast<int>(values.size()) != p.tensor.numel()) {
            throw DataError("checkpoint " + path + ": parameter " + p.name + " has wrong element count");
        }
        p.tensor.mutable_values() = std::move(values);
    }
    return lm;
}

}  // namespace bmgf
