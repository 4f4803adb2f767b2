#pragma once

// Mini-batch training loop. Instances are processed one at a time at their
// natural length; gradients accumulate across the batch and are rescaled
// to the batch mean before clipping and the Adam step. The best validation
// epoch's parameters are restored into the model when training ends.

#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "bmgf/data.hpp"
#include "bmgf/log.hpp"
#include "bmgf/metrics.hpp"
#include "bmgf/model.hpp"
#include "bmgf/optim.hpp"

namespace bmgf {

struct PreparedExample {
    TokenizedPair tokens;
    std::vector<int> golds;
};

inline std::vector<PreparedExample> prepare_examples(const std::vector<Example>& rows,
                                                     const Vocabulary& vocab, const Schema& schema,
                                                     int max_len) {
    std::vector<PreparedExample> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        PreparedExample pe;
        pe.tokens = tokenize_pair(vocab, r.arg1, r.arg2, max_len);
        pe.golds = schema.project_all(r.raw_labels);
        out.push_back(std::move(pe));
    }
    return out;
}

inline std::vector<int> predict_all(const Model& model, const std::vector<PreparedExample>& examples) {
    Rng eval_rng(0);  // eval path never draws from it
    std::vector<int> preds;
    preds.reserve(examples.size());
    for (const auto& ex : examples) preds.push_back(model.predict_class(ex.tokens, eval_rng));
    return preds;
}

inline EvalReport evaluate_model(const Model& model, const std::vector<PreparedExample>& examples) {
    std::vector<std::vector<int>> golds;
    golds.reserve(examples.size());
    for (const auto& ex : examples) golds.push_back(ex.golds);
    return evaluate(golds, predict_all(model, examples), model.schema());
}

// Validation selects on macro-F1 for the four-way schema, accuracy otherwise.
inline const char* validation_metric_name(const Schema& schema) {
    return schema.name() == "pdtb4" ? "macro_f1" : "accuracy";
}

struct TrainResult {
    std::string metric_name;
    double best_metric = 0.0;
    int best_epoch = -1;  // stays -1 when no epoch ran
    std::vector<double> epoch_train_loss;
    std::vector<double> epoch_valid_metric;
};

inline TrainResult train_model(Model& model, const std::vector<PreparedExample>& train,
                               const std::vector<PreparedExample>& valid, uint64_t seed) {
    if (train.empty()) throw InputError("train_model: no training examples");
    const ModelConfig& cfg = model.config();
    Rng rng(seed);
    AdamConfig adam;
    adam.lr = cfg.lr;
    adam.beta1 = cfg.beta1;
    adam.beta2 = cfg.beta2;
    adam.eps = cfg.adam_eps;
    adam.weight_decay = cfg.weight_decay;
    AdamState state;

    TrainResult result;
    result.metric_name = validation_metric_name(model.schema());
    double best = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best_values;

    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        size_t pos = 0;
        while (pos < order.size()) {
            const size_t end = std::min(pos + static_cast<size_t>(cfg.batch_size), order.size());
            const double inv_batch = 1.0 / static_cast<double>(end - pos);
            model.params().zero_grads();
            for (size_t i = pos; i < end; ++i) {
                const PreparedExample& ex = train[order[i]];
                Tensor probs = model.forward(ex.tokens, rng, true);
                Tensor l = model.loss(probs, ex.golds);
                backward(l);
                loss_sum += l.scalar_value();
            }
            for (auto& p : model.params().all()) {
                for (double& g : p.tensor.mutable_grad()) g *= inv_batch;
            }
            clip_grad_l2(model.params(), cfg.clip_norm);
            adam_step(model.params(), state, adam);
            pos = end;
        }
        const double mean_loss = loss_sum / train.size();
        result.epoch_train_loss.push_back(mean_loss);

        double metric = 0.0;
        if (!valid.empty()) {
            EvalReport rep = evaluate_model(model, valid);
            metric = result.metric_name == "macro_f1" ? rep.macro_f1 : rep.accuracy;
        }
        result.epoch_valid_metric.push_back(metric);
        if (metric > best) {
            best = metric;
            result.best_epoch = epoch;
            result.best_metric = metric;
            best_values.clear();
            for (const auto& p : model.params().all()) best_values.push_back(p.tensor.values());
        }
        log::info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) +
                  " loss=" + std::to_string(mean_loss) + " valid_" + result.metric_name + "=" +
                  std::to_string(metric));
    }

    if (!best_values.empty()) {
        auto& ps = model.params().all();
        for (size_t i = 0; i < ps.size(); ++i) ps[i].tensor.mutable_values() = best_values[i];
    }
    return result;
}

}  // namespace bmgf
