#pragma once

// Label schemas for discourse relation classification. Raw labels may be
// finer-grained than the schema (e.g. a three-level sense); projection
// truncates to the schema's granularity.

#include <algorithm>
#include <string>
#include <vector>

#include "bmgf/error.hpp"

namespace bmgf {

class Schema {
public:
    // Accepts "pdtb4", "pdtb11", "conll15", or "binary:<Class>".
    static Schema parse(const std::string& name) {
        Schema s;
        s.name_ = name;
        if (name == "pdtb4") {
            s.labels_ = {"Comparison", "Contingency", "Expansion", "Temporal"};
            s.depth_ = 1;
        } else if (name == "pdtb11") {
            s.labels_ = {"Comparison.Concession", "Comparison.Contrast",
                         "Contingency.Cause", "Contingency.Pragmatic cause",
                         "Expansion.Alternative", "Expansion.Conjunction",
                         "Expansion.Instantiation", "Expansion.List",
                         "Expansion.Restatement", "Temporal.Asynchronous",
                         "Temporal.Synchrony"};
            s.depth_ = 2;
        } else if (name == "conll15") {
            s.labels_ = {"Comparison.Concession", "Comparison.Contrast",
                         "Contingency.Cause.Reason", "Contingency.Cause.Result",
                         "Contingency.Condition", "EntRel",
                         "Expansion.Alternative", "Expansion.Alternative.Chosen alternative",
                         "Expansion.Conjunction", "Expansion.Exception",
                         "Expansion.Instantiation", "Expansion.Restatement",
                         "Temporal.Asynchronous.Precedence", "Temporal.Asynchronous.Succession",
                         "Temporal.Synchrony"};
            s.depth_ = 0;  // exact senses, no truncation
        } else if (name.rfind("binary:", 0) == 0) {
            s.positive_ = name.substr(7);
            if (s.positive_.empty()) throw ConfigError("binary schema needs a class: binary:<Class>");
            s.labels_ = {s.positive_, "Rest"};
            s.depth_ = -1;
        } else {
            throw ConfigError("unknown schema: " + name +
                              " (expected pdtb4, pdtb11, conll15, or binary:<Class>)");
        }
        return s;
    }

    const std::string& name() const { return name_; }
    const std::vector<std::string>& labels() const { return labels_; }
    int num_classes() const { return static_cast<int>(labels_.size()); }

    const std::string& label(int idx) const {
        if (idx < 0 || idx >= num_classes()) {
            throw ContractError("schema " + name_ + ": class index " + std::to_string(idx) + " out of range");
        }
        return labels_[idx];
    }

    int index_of(const std::string& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) throw DataError("schema " + name_ + ": unknown label " + label);
        return static_cast<int>(it - labels_.begin());
    }

    // Projects a raw (possibly deeper) label into this schema's classes.
    int project(const std::string& raw) const {
        if (raw.empty()) throw DataError("schema " + name_ + ": empty label");
        if (depth_ == -1) {
            bool hit = raw == positive_ || raw.rfind(positive_ + ".", 0) == 0;
            return hit ? 0 : 1;
        }
        std::string key = raw;
        if (depth_ > 0) {
            size_t pos = 0;
            int seen = 0;
            while (pos < key.size()) {
                if (key[pos] == '.') {
                    ++seen;
                    if (seen == depth_) break;
                }
                ++pos;
            }
            key = key.substr(0, pos);
        }
        auto it = std::find(labels_.begin(), labels_.end(), key);
        if (it == labels_.end()) {
            throw DataError("schema " + name_ + ": label " + raw + " does not map to any class");
        }
        return static_cast<int>(it - labels_.begin());
    }

    // Projects a pipe-joined multi-label cell, deduplicating while keeping
    // first-appearance order.
    std::vector<int> project_all(const std::vector<std::string>& raws) const {
        std::vector<int> out;
        for (const auto& r : raws) {
            int idx = project(r);
            if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
        }
        if (out.empty()) throw DataError("schema " + name_ + ": no labels after projection");
        return out;
    }

private:
    std::string name_;
    std::string positive_;
    std::vector<std::string> labels_;
    int depth_ = 0;
};

}  // namespace bmgf
