#pragma once

// Synthetic argument pairs with a planted signal: the second argument
// opens with a cue word that determines the class. Useful for smoke tests
// and overfitting runs without any licensed corpus.

#include <string>
#include <vector>

#include "bmgf/data.hpp"
#include "bmgf/rng.hpp"
#include "bmgf/schema.hpp"

namespace bmgf {

struct SynthOptions {
    std::string schema = "pdtb4";
    int train = 200;
    int valid = 60;
    int test = 60;
    uint64_t seed = 7;
    double multi_gold_frac = 0.0;  // fraction of rows that get a second gold label
};

namespace detail {

inline const std::vector<std::string>& synth_fillers() {
    static const std::vector<std::string> f = {
        "the",    "market", "report",  "price",  "company", "analyst", "figure", "quarter",
        "growth", "share",  "board",   "plan",   "deal",    "profit",  "sector", "output",
        "trade",  "index",  "rate",    "move",   "value",   "policy",  "group",  "result",
        "demand", "supply", "capital", "budget", "volume",  "target",  "record", "level"};
    return f;
}

inline std::vector<std::string> synth_cues(const Schema& schema, int cls) {
    if (schema.name() == "pdtb4") {
        static const std::vector<std::vector<std::string>> cues = {
            {"but", "however", "although", "yet"},
            {"because", "since", "therefore", "thus"},
            {"and", "also", "furthermore", "moreover"},
            {"then", "later", "before", "meanwhile"}};
        return cues[cls];
    }
    std::string base = "cue" + std::to_string(cls);
    return {base + "x", base + "y", base + "z"};
}

inline std::string synth_sentence(Rng& rng, int words) {
    const auto& fillers = synth_fillers();
    std::string out;
    for (int i = 0; i < words; ++i) {
        if (i) out += ' ';
        out += fillers[static_cast<size_t>(rng.next_below(fillers.size()))];
    }
    return out;
}

}  // namespace detail

inline Dataset make_synthetic(const SynthOptions& opt) {
    Schema schema = Schema::parse(opt.schema);
    const int classes = schema.num_classes();
    Rng rng(opt.seed);
    Dataset ds;
    auto emit = [&](const std::string& split, int count) {
        for (int i = 0; i < count; ++i) {
            const int cls = i % classes;
            Example ex;
            ex.split = split;
            ex.arg1 = detail::synth_sentence(rng, 3 + static_cast<int>(rng.next_below(6)));
            auto cues = detail::synth_cues(schema, cls);
            ex.arg2 = cues[static_cast<size_t>(rng.next_below(cues.size()))] + " " +
                      detail::synth_sentence(rng, 2 + static_cast<int>(rng.next_below(6)));
            ex.raw_labels.push_back(schema.label(cls));
            if (opt.multi_gold_frac > 0.0 && rng.uniform(0.0, 1.0) < opt.multi_gold_frac && classes > 1) {
                int other = (cls + 1 + static_cast<int>(rng.next_below(classes - 1))) % classes;
                ex.raw_labels.push_back(schema.label(other));
            }
            ds.rows.push_back(std::move(ex));
        }
    };
    emit("train", opt.train);
    emit("valid", opt.valid);
    emit("test", opt.test);
    return ds;
}

}  // namespace bmgf
