#pragma once

// Scoring. An example with several gold labels counts as correct when the
// prediction matches any of them; its confusion row uses the matched gold,
// or the first gold on a miss.

#include <string>
#include <vector>

#include <json.hpp>

#include "bmgf/error.hpp"
#include "bmgf/schema.hpp"

namespace bmgf {

struct ClassScore {
    std::string label;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    int support = 0;  // examples whose attributed gold is this class
};

struct EvalReport {
    int n = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<ClassScore> per_class;
    std::vector<std::vector<int>> confusion;  // [gold][pred]
    std::vector<std::string> labels;
};

inline double macro_f1_of(const std::vector<std::vector<int>>& confusion) {
    const int c = static_cast<int>(confusion.size());
    double sum = 0.0;
    for (int k = 0; k < c; ++k) {
        int tp = confusion[k][k], fp = 0, fn = 0;
        for (int j = 0; j < c; ++j) {
            if (j != k) {
                fn += confusion[k][j];
                fp += confusion[j][k];
            }
        }
        double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        sum += p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return c > 0 ? sum / c : 0.0;
}

inline EvalReport evaluate(const std::vector<std::vector<int>>& golds, const std::vector<int>& preds,
                           const Schema& schema) {
    if (golds.size() != preds.size()) {
        throw ContractError("evaluate: " + std::to_string(golds.size()) + " gold sets vs " +
                            std::to_string(preds.size()) + " predictions");
    }
    const int c = schema.num_classes();
    EvalReport rep;
    rep.n = static_cast<int>(golds.size());
    rep.labels = schema.labels();
    rep.confusion.assign(c, std::vector<int>(c, 0));
    int correct = 0;
    for (size_t i = 0; i < golds.size(); ++i) {
        if (golds[i].empty()) throw ContractError("evaluate: example " + std::to_string(i) + " has no gold");
        int pred = preds[i];
        if (pred < 0 || pred >= c) {
            throw ContractError("evaluate: prediction " + std::to_string(pred) + " out of range");
        }
        int attributed = golds[i][0];
        bool hit = false;
        for (int g : golds[i]) {
            if (g < 0 || g >= c) throw ContractError("evaluate: gold " + std::to_string(g) + " out of range");
            if (g == pred) {
                attributed = g;
                hit = true;
                break;
            }
        }
        correct += hit ? 1 : 0;
        rep.confusion[attributed][pred] += 1;
    }
    rep.accuracy = rep.n > 0 ? static_cast<double>(correct) / rep.n : 0.0;
    rep.macro_f1 = macro_f1_of(rep.confusion);
    for (int k = 0; k < c; ++k) {
        ClassScore cs;
        cs.label = schema.label(k);
        int tp = rep.confusion[k][k], fp = 0, fn = 0;
        for (int j = 0; j < c; ++j) {
            if (j != k) {
                fn += rep.confusion[k][j];
                fp += rep.confusion[j][k];
            }
        }
        cs.support = tp + fn;
        cs.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        cs.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        cs.f1 = cs.precision + cs.recall > 0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
        rep.per_class.push_back(cs);
    }
    return rep;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& rep) {
    nlohmann::ordered_json j;
    j["n"] = rep.n;
    j["accuracy"] = rep.accuracy;
    j["macro_f1"] = rep.macro_f1;
    nlohmann::ordered_json pc;
    for (const auto& cs : rep.per_class) {
        pc[cs.label] = {{"precision", cs.precision},
                        {"recall", cs.recall},
                        {"f1", cs.f1},
                        {"support", cs.support}};
    }
    j["per_class"] = pc;
    j["confusion"] = rep.confusion;
    j["labels"] = rep.labels;
    return j;
}

inline std::string report_to_text(const EvalReport& rep) {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "n=%d accuracy=%.4f macro_f1=%.4f\n", rep.n, rep.accuracy,
                  rep.macro_f1);
    out += buf;
    for (const auto& cs : rep.per_class) {
        std::snprintf(buf, sizeof(buf), "  %-40s P=%.4f R=%.4f F1=%.4f n=%d\n", cs.label.c_str(),
                      cs.precision, cs.recall, cs.f1, cs.support);
        out += buf;
    }
    return out;
}

}  // namespace bmgf
