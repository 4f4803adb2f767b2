// Command-line front end: train/eval/predict on TSV argument-pair data,
// plus gradient verification, an ablation grid, and a synthetic data
// generator. Logging level comes from the BMGF_LOG environment variable.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bmgf/checkpoint.hpp"
#include "bmgf/data.hpp"
#include "bmgf/gradcheck.hpp"
#include "bmgf/log.hpp"
#include "bmgf/metrics.hpp"
#include "bmgf/model.hpp"
#include "bmgf/schema.hpp"
#include "bmgf/synth.hpp"
#include "bmgf/train.hpp"

namespace fs = std::filesystem;
using namespace bmgf;

namespace {

ModelConfig read_config(const std::string& path, const std::string& schema_override) {
    ModelConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config " + path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + path + " is not valid JSON: " + e.what());
        }
        cfg = config_from_json(j);
    }
    if (!schema_override.empty()) cfg.schema = schema_override;
    Schema::parse(cfg.schema);  // validate early
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
}

nlohmann::ordered_json train_summary_json(const TrainResult& res) {
    nlohmann::ordered_json j;
    j["metric"] = res.metric_name;
    j["best_metric"] = res.best_metric;
    j["best_epoch"] = res.best_epoch;
    j["train_loss"] = res.epoch_train_loss;
    j["valid_metric"] = res.epoch_valid_metric;
    return j;
}

struct TrainedArtifacts {
    ModelConfig cfg;
    Vocabulary vocab;
    TrainResult result;
};

// Shared by train and ablate: fit one model on the train/valid splits of a
// dataset and leave the best-epoch weights in `model_out`.
TrainedArtifacts fit(ModelConfig cfg, const Dataset& ds, uint64_t seed,
                     std::unique_ptr<Model>& model_out) {
    Schema schema = Schema::parse(cfg.schema);
    auto train_rows = ds.of_split("train");
    auto valid_rows = ds.of_split("valid");
    if (train_rows.empty()) throw InputError("dataset has no rows with split=train");
    std::vector<std::string> texts;
    for (const auto& r : train_rows) {
        texts.push_back(r.arg1);
        texts.push_back(r.arg2);
    }
    Vocabulary vocab = Vocabulary::build(texts, cfg.vocab_size);
    cfg.vocab_size = vocab.size();
    cfg.validate();

    Rng rng(seed);
    model_out = std::make_unique<Model>(cfg, schema, rng);
    auto train_ex = prepare_examples(train_rows, vocab, schema, cfg.max_len);
    auto valid_ex = prepare_examples(valid_rows, vocab, schema, cfg.max_len);
    log::info("training on " + std::to_string(train_ex.size()) + " examples, validating on " +
              std::to_string(valid_ex.size()) + ", " + std::to_string(model_out->params().total_elements()) +
              " parameters");
    TrainResult res = train_model(*model_out, train_ex, valid_ex, seed);
    return {cfg, vocab, res};
}

int cmd_train(const std::string& data, const std::string& out, const std::string& config,
              const std::string& schema, uint64_t seed) {
    ModelConfig cfg = read_config(config, schema);
    Dataset ds = load_tsv(data);
    std::unique_ptr<Model> model;
    TrainedArtifacts art = fit(cfg, ds, seed, model);
    ensure_dir(out);
    save_checkpoint(join_path(out, "checkpoint.json"), art.cfg, art.vocab, model->params());
    art.vocab.save(join_path(out, "vocab.txt"));
    write_json(join_path(out, "config.json"), config_to_json(art.cfg));
    write_json(join_path(out, "train_summary.json"), train_summary_json(art.result));
    std::cout << "best " << art.result.metric_name << " " << art.result.best_metric << " at epoch "
              << art.result.best_epoch << "\n";
    std::cout << "checkpoint " << join_path(out, "checkpoint.json") << "\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out,
             const std::string& split) {
    LoadedModel lm = load_checkpoint(checkpoint);
    Dataset ds = load_tsv(data);
    auto rows = ds.of_split(split);
    if (rows.empty()) throw InputError("dataset has no rows with split=" + split);
    auto examples = prepare_examples(rows, lm.vocab, lm.schema, lm.config.max_len);
    EvalReport rep = evaluate_model(*lm.model, examples);
    std::cout << report_to_text(rep);
    if (!out.empty()) {
        ensure_dir(out);
        write_json(join_path(out, "eval_report.json"), report_to_json(rep));
        std::cout << "report " << join_path(out, "eval_report.json") << "\n";
    }
    return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& data, const std::string& out) {
    LoadedModel lm = load_checkpoint(checkpoint);
    Rng eval_rng(0);
    auto predict_one = [&](const std::string& arg1, const std::string& arg2) {
        TokenizedPair pair = tokenize_pair(lm.vocab, arg1, arg2, lm.config.max_len);
        Tensor probs = lm.model->forward(pair, eval_rng, false);
        int cls = rowwise_argmax(probs)[0];
        return std::make_pair(lm.schema.label(cls), probs.at(0, cls));
    };

    if (data.empty()) {
        // One pair per stdin line: arg1 <TAB> arg2.
        std::string line;
        while (std::getline(std::cin, line)) {
            auto tab = line.find('\t');
            if (tab == std::string::npos) {
                throw InputError("predict: stdin line needs arg1<TAB>arg2");
            }
            auto [label, p] = predict_one(line.substr(0, tab), line.substr(tab + 1));
            std::cout << label << '\t' << p << '\n';
        }
        return 0;
    }

    Dataset ds = load_tsv(data);
    std::ostream* sink = &std::cout;
    std::ofstream file;
    if (!out.empty()) {
        ensure_dir(out);
        file.open(join_path(out, "predictions.tsv"));
        if (!file) throw DataError("cannot write predictions");
        sink = &file;
    }
    *sink << "pred\tprob\tsplit\targ1\targ2\n";
    for (const auto& r : ds.rows) {
        auto [label, p] = predict_one(r.arg1, r.arg2);
        *sink << label << '\t' << p << '\t' << r.split << '\t' << r.arg1 << '\t' << r.arg2 << '\n';
    }
    if (!out.empty()) std::cout << "predictions " << join_path(out, "predictions.tsv") << "\n";
    return 0;
}

// Verifies analytic gradients of the full model (small dimensions) against
// central differences on one synthetic instance per seed.
int cmd_gradcheck(uint64_t seed, const std::string& config, const std::string& schema) {
    ModelConfig cfg;
    if (!config.empty()) {
        cfg = read_config(config, schema);
    } else {
        cfg.d_model = 8;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_ffn = 12;
        cfg.max_len = 16;
        cfg.perspectives = 2;
        cfg.fusion_heads = 2;  // width 8 + 10 = 18
        cfg.conv_max_kernel = 2;
        cfg.conv_filters = 3;
        cfg.hidden_dim = 6;
        cfg.dropout = 0.0;
        if (!schema.empty()) cfg.schema = schema;
    }
    cfg.dropout = 0.0;  // finite differences need a deterministic forward
    Schema sch = Schema::parse(cfg.schema);
    Vocabulary vocab = Vocabulary::build({"one two three four five six seven eight"});
    cfg.vocab_size = vocab.size();
    cfg.validate();
    Rng rng(seed);
    Model model(cfg, sch, rng);
    // Nudge every parameter off its initial value so no relu sits exactly
    // at its kink, where the two-sided difference quotient is not a valid
    // derivative estimate.
    Rng jitter(seed + 9000);
    for (const auto& p : model.params().all()) {
        Tensor t = p.tensor;  // shared handle; mutates the model's parameter
        for (auto& v : t.mutable_values()) v += jitter.uniform(-0.05, 0.05);
    }
    auto pair = tokenize_pair(vocab, "one two three", "four five", cfg.max_len);
    std::vector<int> golds = {static_cast<int>(seed % sch.num_classes())};
    auto loss_fn = [&]() {
        Rng fwd(1);
        Tensor probs = model.forward(pair, fwd, false);
        return model.loss(probs, golds);
    };
    auto rep = check_gradients(loss_fn, model.params().tensors());
    std::cout << "checked " << rep.checked << " partials, max |analytic - numeric| = " << rep.max_abs_err
              << " (worst " << rep.worst << ")\n";
    if (rep.max_abs_err >= 1e-4) {
        std::cout << "FAIL: tolerance 1e-4 exceeded\n";
        return 1;
    }
    std::cout << "OK\n";
    return 0;
}

int cmd_ablate(const std::string& data, const std::string& out, const std::string& config,
               const std::string& schema, uint64_t seed, const std::string& variants_csv) {
    ModelConfig base = read_config(config, schema);
    Dataset ds = load_tsv(data);
    auto test_rows = ds.of_split("test");

    std::vector<std::string> variants;
    {
        std::stringstream ss(variants_csv);
        std::string v;
        while (std::getline(ss, v, ',')) {
            if (!v.empty()) variants.push_back(v);
        }
    }
    nlohmann::ordered_json report;
    for (const auto& v : variants) {
        ModelConfig cfg = base;
        if (v == "full") {
        } else if (v == "wo_se") {
            cfg.use_se = false;
        } else if (v == "wo_gf") {
            cfg.use_gf = false;
        } else if (v == "wo_bm") {
            cfg.use_bm = false;
        } else if (v == "wo_se_gf") {
            cfg.use_se = cfg.use_gf = false;
        } else if (v == "wo_se_bm") {
            cfg.use_se = cfg.use_bm = false;
        } else if (v == "wo_bm_gf") {
            cfg.use_bm = cfg.use_gf = false;
        } else if (v == "wo_se_bm_gf") {
            cfg.use_se = cfg.use_bm = cfg.use_gf = false;
        } else {
            throw InputError("unknown ablation variant " + v);
        }
        log::info("ablation variant " + v);
        std::unique_ptr<Model> model;
        TrainedArtifacts art = fit(cfg, ds, seed, model);
        nlohmann::ordered_json entry;
        entry["metric"] = art.result.metric_name;
        entry["best_valid"] = art.result.best_metric;
        entry["best_epoch"] = art.result.best_epoch;
        if (!test_rows.empty()) {
            auto test_ex = prepare_examples(test_rows, art.vocab, Schema::parse(art.cfg.schema),
                                            art.cfg.max_len);
            EvalReport rep = evaluate_model(*model, test_ex);
            entry["test_accuracy"] = rep.accuracy;
            entry["test_macro_f1"] = rep.macro_f1;
        }
        report[v] = entry;
        std::cout << v << ": best_valid " << art.result.best_metric << "\n";
    }
    if (!out.empty()) {
        ensure_dir(out);
        write_json(join_path(out, "ablation_report.json"), report);
        std::cout << "report " << join_path(out, "ablation_report.json") << "\n";
    }
    return 0;
}

int cmd_synth(const std::string& out, const std::string& schema, uint64_t seed, int n_train,
              int n_valid, int n_test, double multi_gold) {
    SynthOptions opt;
    opt.schema = schema.empty() ? "pdtb4" : schema;
    opt.seed = seed;
    opt.train = n_train;
    opt.valid = n_valid;
    opt.test = n_test;
    opt.multi_gold_frac = multi_gold;
    Dataset ds = make_synthetic(opt);
    save_tsv(out, ds);
    std::cout << "wrote " << ds.rows.size() << " rows to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sentence-pair discourse relation classifier"};
    app.require_subcommand(1);

    std::string config, data, out, schema, checkpoint, split = "test";
    std::string variants = "full,wo_se,wo_gf,wo_bm";
    uint64_t seed = 1;
    int n_train = 200, n_valid = 60, n_test = 60;
    double multi_gold = 0.0;

    auto* t = app.add_subcommand("train", "fit a model on a TSV dataset");
    t->add_option("--data", data, "dataset TSV with train/valid splits")->required();
    t->add_option("--out", out, "output directory")->required();
    t->add_option("--config", config, "model config JSON");
    t->add_option("--schema", schema, "label schema override");
    t->add_option("--seed", seed, "random seed");

    auto* e = app.add_subcommand("eval", "score a checkpoint on a dataset split");
    e->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    e->add_option("--data", data, "dataset TSV")->required();
    e->add_option("--out", out, "directory for eval_report.json");
    e->add_option("--split", split, "dataset split to score (default test)");

    auto* p = app.add_subcommand("predict", "label pairs from a dataset or stdin");
    p->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
    p->add_option("--data", data, "dataset TSV (omit to read arg1<TAB>arg2 lines from stdin)");
    p->add_option("--out", out, "directory for predictions.tsv");

    auto* g = app.add_subcommand("gradcheck", "verify gradients against central differences");
    g->add_option("--seed", seed, "random seed");
    g->add_option("--config", config, "model config JSON (small dimensions recommended)");
    g->add_option("--schema", schema, "label schema override");

    auto* a = app.add_subcommand("ablate", "train component-switch variants and compare");
    a->add_option("--data", data, "dataset TSV")->required();
    a->add_option("--out", out, "directory for ablation_report.json");
    a->add_option("--config", config, "model config JSON");
    a->add_option("--schema", schema, "label schema override");
    a->add_option("--seed", seed, "random seed");
    a->add_option("--variants", variants, "comma list: full,wo_se,wo_gf,wo_bm,wo_se_gf,wo_se_bm,wo_bm_gf,wo_se_bm_gf");

    auto* s = app.add_subcommand("synth", "generate a synthetic cue-word dataset");
    s->add_option("--out", out, "output TSV path")->required();
    s->add_option("--schema", schema, "label schema (default pdtb4)");
    s->add_option("--seed", seed, "random seed");
    s->add_option("--n-train", n_train, "train rows");
    s->add_option("--n-valid", n_valid, "valid rows");
    s->add_option("--n-test", n_test, "test rows");
    s->add_option("--multi-gold", multi_gold, "fraction of rows with a second gold label");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*t) return cmd_train(data, out, config, schema, seed);
        if (*e) return cmd_eval(checkpoint, data, out, split);
        if (*p) return cmd_predict(checkpoint, data, out);
        if (*g) return cmd_gradcheck(seed, config, schema);
        if (*a) return cmd_ablate(data, out, config, schema, seed, variants);
        if (*s) return cmd_synth(out, schema, seed, n_train, n_valid, n_test, multi_gold);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "unexpected error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
