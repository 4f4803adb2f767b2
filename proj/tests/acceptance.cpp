// Acceptance gate: one line per criterion, [PASS]/[FAIL]/[WARN]/[SKIP].
// Exit status is the number of hard failures (warnings and skips don't count).
//
// Heavier criteria (overfit, ablation sweep) train real models, so the whole
// binary takes a few minutes; everything is single-threaded and seeded.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "bmgf/checkpoint.hpp"
#include "bmgf/gradcheck.hpp"
#include "bmgf/model.hpp"
#include "bmgf/synth.hpp"
#include "bmgf/train.hpp"
#include "oracles.hpp"

using namespace bmgf;

namespace {

int g_failures = 0;
int g_warnings = 0;

struct Outcome {
    std::string status;  // PASS, FAIL, WARN, SKIP
    std::string detail;
};

void run(const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {"FAIL", std::string("exception: ") + e.what()};
    }
    if (o.status == "FAIL") ++g_failures;
    if (o.status == "WARN") ++g_warnings;
    std::printf("[%s] %s: %s\n", o.status.c_str(), name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig tiny_config() {
    ModelConfig cfg;
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
    return cfg;
}

Tensor random_matrix(Rng& rng, int m, int n, double lo = -1.5, double hi = 1.5) {
    std::vector<double> v(static_cast<size_t>(m) * n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor({m, n}, v);
}

// Gradients of every parameter group against central differences, on a full
// forward pass, across 10 seeds.
Outcome gradient_suite() {
    auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    std::string worst_at = "-";
    long checked = 0;
    const std::vector<std::string> groups = {"encoder.", "match.", "fusion.", "agg.", "head."};
    for (uint64_t seed = 1; seed <= 10; ++seed) {
        ModelConfig cfg = tiny_config();
        Vocabulary vocab = Vocabulary::build({"north wind and sun were disputing which was stronger"});
        cfg.vocab_size = vocab.size();
        Schema sch = Schema::parse("pdtb4");
        Rng rng(seed);
        Model model(cfg, sch, rng);
        // Zero-initialized biases can leave relu units exactly at their
        // kink (no two-sided derivative there, so central differences
        // measure the average of the one-sided slopes). Jitter to a
        // generic point first.
        Rng jitter(seed + 9000);
        for (const auto& p : model.params().all()) {
            Tensor t = p.tensor;  // shared handle; mutates the model's parameter
            for (auto& v : t.mutable_values()) v += jitter.uniform(-0.05, 0.05);
        }
        auto pair = tokenize_pair(vocab, "north wind and sun", "which was stronger", cfg.max_len);
        std::vector<int> golds = {static_cast<int>(seed % 4)};
        auto loss_fn = [&]() {
            Rng fwd(1);
            return model.loss(model.forward(pair, fwd, false), golds);
        };
        for (const auto& prefix : groups) {
            std::vector<Tensor> group;
            for (const auto& p : model.params().all()) {
                if (p.name.starts_with(prefix)) group.push_back(p.tensor);
            }
            if (group.empty()) return {"FAIL", "no parameters under " + prefix};
            auto rep = check_gradients(loss_fn, group);
            checked += rep.checked;
            if (rep.max_abs_err > worst) {
                worst = rep.max_abs_err;
                worst_at = rep.worst;
            }
        }
    }
    double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf, "max err %.2e at %s over %ld partials, 10 seeds, %.1fs (need < 1e-4, < 60s)",
                  worst, worst_at.c_str(), checked, secs);
    bool ok = worst < 1e-4 && secs < 60.0;
    return {ok ? "PASS" : "FAIL", buf};
}

// Output widths across the whole pipeline for every argument-length pair up
// to 20 tokens and perspective counts 1, 4, 16; plus placement of the two
// whole-vector comparison blocks in the first 2l feature columns.
Outcome shape_suite() {
    long checks = 0;
    for (int l : {1, 4, 16}) {
        ModelConfig cfg = tiny_config();
        cfg.perspectives = l;
        cfg.fusion_heads = 1;
        cfg.conv_filters = 5;
        const int width = cfg.d_model + 5 * l;
        ParamSet params;
        Rng rng(100 + l);
        Matcher matcher(cfg, params, rng);
        Fusion fusion(cfg, width, params, rng);
        Aggregator agg(cfg, width, 4, params, rng);
        Rng data(7), scratch(1);
        for (int m = 1; m <= 20; ++m) {
            for (int n = 1; n <= 20; ++n) {
                // encoded views carry two frame rows around the m/n tokens
                Tensor h1 = random_matrix(data, m + 2, cfg.d_model);
                Tensor h2 = random_matrix(data, n + 2, cfg.d_model);
                auto [m1, m2] = matcher.match(h1, h2);
                if (m1.cols() != 5 * l || m2.cols() != 5 * l || m1.rows() != h1.rows() ||
                    m2.rows() != h2.rows()) {
                    return {"FAIL", "match width wrong at l=" + std::to_string(l)};
                }
                Tensor wf = params.find("match.w_full_first");
                Tensor wl = params.find("match.w_full_last");
                Tensor full = concat_cols({multicos_one(h1, slice_rows(h2, 0, 1), wf),
                                           multicos_one(h1, slice_rows(h2, h2.rows() - 1, h2.rows()), wl)});
                if (full.cols() != 2 * l) return {"FAIL", "full block width wrong"};
                Tensor lead = slice_cols(m1, 0, 2 * l);
                for (int i = 0; i < lead.rows() * lead.cols(); ++i) {
                    if (lead.value_at(i) != full.value_at(i)) {
                        return {"FAIL", "full block misplaced at l=" + std::to_string(l)};
                    }
                }
                Tensor x1 = concat_cols({h1, m1});
                if (x1.cols() != width) return {"FAIL", "concat width wrong"};
                Tensor o1 = fusion.fuse(x1, scratch, false);
                if (o1.cols() != width || o1.rows() != x1.rows() - 1) {
                    return {"FAIL", "fused shape wrong at l=" + std::to_string(l)};
                }
                Tensor u1 = agg.summarize(o1, scratch, false);
                const int zs = cfg.conv_max_kernel * cfg.conv_filters;
                if (u1.rows() != 1 || u1.cols() != zs) return {"FAIL", "summary width wrong"};
                Tensor probs = agg.predict(u1, u1, scratch, false);
                if (probs.rows() != 1 || probs.cols() != 4) return {"FAIL", "class distribution shape wrong"};
                checks += 5;
            }
        }
    }
    return {"PASS", std::to_string(checks) + " exact shape checks across l in {1,4,16}, token counts 1..20"};
}

// Pooled, attentive and best-row matching against an independent scalar-loop
// reference on random instances.
Outcome oracle_equivalence() {
    double worst = 0.0;
    Rng rng(404);
    for (int it = 0; it < 100; ++it) {
        const int l = 1 + static_cast<int>(rng.next_below(3));
        const int d = 3 + static_cast<int>(rng.next_below(3));
        const int m = 1 + static_cast<int>(rng.next_below(5));
        const int n = 1 + static_cast<int>(rng.next_below(5));
        ModelConfig cfg = tiny_config();
        cfg.d_model = d;
        cfg.perspectives = l;
        ParamSet params;
        Rng wgen(1000 + it);
        Matcher matcher(cfg, params, wgen);
        Tensor h1 = random_matrix(rng, m, d);
        Tensor h2 = random_matrix(rng, n, d);
        auto [m1, m2] = matcher.match(h1, h2);
        auto wf = oracle::to_mat(params.find("match.w_full_first"));
        auto wl = oracle::to_mat(params.find("match.w_full_last"));
        auto wmax = oracle::to_mat(params.find("match.w_maxpool"));
        auto watt = oracle::to_mat(params.find("match.w_attentive"));
        auto wmaxatt = oracle::to_mat(params.find("match.w_max_attentive"));
        auto a = oracle::to_mat(h1), b = oracle::to_mat(h2);
        auto ref1 = oracle::match_direction(a, b, wf, wl, wmax, watt, wmaxatt);
        auto ref2 = oracle::match_direction(b, a, wf, wl, wmax, watt, wmaxatt);
        auto cmp = [&](const Tensor& got, const oracle::Mat& want) {
            for (int i = 0; i < got.rows(); ++i) {
                for (int j = 0; j < got.cols(); ++j) {
                    worst = std::max(worst, std::abs(got.at(i, j) - want[i][j]));
                }
            }
        };
        cmp(m1, ref1);
        cmp(m2, ref2);
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "max |lib - reference| %.2e on 100 instances (need < 1e-10)", worst);
    return {worst < 1e-10 ? "PASS" : "FAIL", buf};
}

// Every gated output element must lie between its two mixands.
Outcome convexity() {
    ModelConfig cfg = tiny_config();
    cfg.fusion_heads = 1;
    const int w = 6;
    ParamSet params;
    Rng rng(77);
    Fusion fusion(cfg, w, params, rng);
    Aggregator agg(cfg, w, 4, params, rng);  // highway width = z*s = 6
    const int zs = cfg.conv_max_kernel * cfg.conv_filters;
    long gate_inputs = 0, highway_inputs = 0, violations = 0;
    Rng data(5);
    const double eps = 1e-12;
    for (int it = 0; it < 250; ++it) {
        Tensor x = random_matrix(data, 4, w, -3, 3);
        Tensor q = random_matrix(data, 4, w, -3, 3);
        Tensor out = fusion.blend(x, q);
        for (int i = 0; i < 4 * w; ++i) {
            double lo = std::min(x.value_at(i), q.value_at(i)) - eps;
            double hi = std::max(x.value_at(i), q.value_at(i)) + eps;
            if (out.value_at(i) < lo || out.value_at(i) > hi) ++violations;
        }
        gate_inputs += 4;
        for (int r = 0; r < 4; ++r) {
            Tensor u = random_matrix(data, 1, zs, -3, 3);
            Tensor t = relu(add_bias(matmul(u, params.find("agg.highway.wh")), params.find("agg.highway.bh")));
            Tensor h = agg.highway(u);
            for (int i = 0; i < zs; ++i) {
                double lo = std::min(u.value_at(i), t.value_at(i)) - eps;
                double hi = std::max(u.value_at(i), t.value_at(i)) + eps;
                if (h.value_at(i) < lo || h.value_at(i) > hi) ++violations;
            }
            ++highway_inputs;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%ld violations over %ld gate and %ld highway inputs (need 0)", violations,
                  gate_inputs, highway_inputs);
    return {violations == 0 ? "PASS" : "FAIL", buf};
}

// All perspective-cosine features stay in [-1, 1] up to rounding, including
// zero-vector and zero-weight conventions.
Outcome cosine_bounds() {
    double lo = 1e300, hi = -1e300;
    auto scan = [&](const Tensor& t) {
        for (int i = 0; i < static_cast<int>(t.numel()); ++i) {
            double v = t.value_at(i);
            if (!std::isfinite(v)) hi = 2.0;  // force a failure
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    };
    Rng rng(31);
    for (int it = 0; it < 50; ++it) {
        const int l = 1 + static_cast<int>(rng.next_below(4));
        const int d = 2 + static_cast<int>(rng.next_below(5));
        const int m = 1 + static_cast<int>(rng.next_below(6));
        const int n = 1 + static_cast<int>(rng.next_below(6));
        ModelConfig cfg = tiny_config();
        cfg.d_model = d;
        cfg.perspectives = l;
        ParamSet params;
        Rng wgen(50 + it);
        Matcher matcher(cfg, params, wgen);
        Tensor h1 = random_matrix(rng, m, d, -4, 4);
        Tensor h2 = random_matrix(rng, n, d, -4, 4);
        // plant degenerate rows: a zero token vector and a zero perspective
        if (it % 2 == 0) {
            for (int j = 0; j < d; ++j) h1.mutable_values()[j] = 0.0;
            auto& w = params.find("match.w_maxpool").mutable_values();
            for (int j = 0; j < d; ++j) w[j] = 0.0;
        }
        if (it % 5 == 0) {  // whole second view zero: attentive fallback path
            for (auto& v : h2.mutable_values()) v = 0.0;
        }
        auto [m1, m2] = matcher.match(h1, h2);
        scan(m1);
        scan(m2);
        scan(cosine_pairwise(h1, h2));
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "outputs in [%.12f, %.12f] (need within [-1-1e-9, 1+1e-9])", lo, hi);
    bool ok = lo >= -1.0 - 1e-9 && hi <= 1.0 + 1e-9;
    return {ok ? "PASS" : "FAIL", buf};
}

// Multi-gold hit rule plus a hand-computed two-class macro-F1.
Outcome scoring_rule() {
    Schema four = Schema::parse("pdtb4");
    EvalReport r1 = evaluate({{0, 1}}, {1}, four);  // gold {Comparison, Contingency}, predicted Contingency
    if (r1.accuracy != 1.0 || r1.confusion[1][1] != 1) {
        return {"FAIL", "multi-gold prediction not counted as a hit"};
    }
    Schema two = Schema::parse("binary:Comparison");
    EvalReport r2 = evaluate({{0}, {0}, {1}, {1}}, {0, 1, 1, 1}, two);
    // per-class F1: 2/3 and 4/5, macro 11/15
    double want = 11.0 / 15.0;
    char buf[128];
    std::snprintf(buf, sizeof buf, "multi-gold hit counted, 2-class macro-F1 %.7f (want %.7f +- 1e-6)", r2.macro_f1,
                  want);
    return {std::abs(r2.macro_f1 - want) < 1e-6 ? "PASS" : "FAIL", buf};
}

// A planted-cue 4-class dataset must be learnable to high accuracy at
// moderate size within 50 epochs on one core.
Outcome overfit_check() {
    ModelConfig cfg;
    cfg.d_model = 64;
    cfg.n_layers = 2;
    cfg.n_heads = 8;
    cfg.d_ffn = 128;
    cfg.max_len = 64;
    // everything else at defaults: 16 perspectives, 16 fusion heads,
    // kernels up to 2 with 64 filters, hidden 128, dropout 0.2, lr 1e-3,
    // batch 32, 50 epochs
    Dataset ds = make_synthetic({.schema = "pdtb4", .train = 200, .valid = 60, .test = 60, .seed = 13});
    std::vector<std::string> texts;
    for (const auto& r : ds.of_split("train")) {
        texts.push_back(r.arg1);
        texts.push_back(r.arg2);
    }
    Vocabulary vocab = Vocabulary::build(texts);
    cfg.vocab_size = vocab.size();
    Schema schema = Schema::parse(cfg.schema);
    Rng rng(7);
    Model model(cfg, schema, rng);
    auto train = prepare_examples(ds.of_split("train"), vocab, schema, cfg.max_len);
    auto valid = prepare_examples(ds.of_split("valid"), vocab, schema, cfg.max_len);
    auto t0 = std::chrono::steady_clock::now();
    train_model(model, train, valid, 7);
    double secs = seconds_since(t0);
    double train_acc = evaluate_model(model, train).accuracy;
    double held_out = evaluate_model(model, valid).accuracy;
    char buf[160];
    std::snprintf(buf, sizeof buf, "train acc %.3f, held-out acc %.3f, %d epochs in %.0fs (need >= 0.95 / >= 0.80, < 300s)",
                  train_acc, held_out, cfg.epochs, secs);
    bool ok = train_acc >= 0.95 && held_out >= 0.80 && secs < 300.0;
    return {ok ? "PASS" : "FAIL", buf};
}

// Removing any single component should not help by more than two points of
// held-out accuracy, in at least 2 of 3 seeds. Advisory only.
Outcome ablation_direction() {
    ModelConfig base;
    base.d_model = 32;
    base.n_layers = 1;
    base.n_heads = 4;
    base.d_ffn = 64;
    base.max_len = 48;
    base.perspectives = 4;
    base.fusion_heads = 4;
    base.conv_max_kernel = 2;
    base.conv_filters = 16;
    base.hidden_dim = 32;
    base.dropout = 0.1;
    base.batch_size = 16;
    base.epochs = 45;
    base.lr = 3e-3;
    Dataset ds = make_synthetic({.schema = "pdtb4", .train = 200, .valid = 60, .test = 60, .seed = 13});
    std::vector<std::string> texts;
    for (const auto& r : ds.of_split("train")) {
        texts.push_back(r.arg1);
        texts.push_back(r.arg2);
    }
    Vocabulary vocab = Vocabulary::build(texts);
    base.vocab_size = vocab.size();
    Schema schema = Schema::parse(base.schema);
    auto train = prepare_examples(ds.of_split("train"), vocab, schema, base.max_len);
    auto valid = prepare_examples(ds.of_split("valid"), vocab, schema, base.max_len);
    auto test = prepare_examples(ds.of_split("test"), vocab, schema, base.max_len);

    auto fit_acc = [&](ModelConfig cfg, uint64_t seed) {
        Rng rng(seed);
        Model model(cfg, schema, rng);
        train_model(model, train, valid, seed);
        return evaluate_model(model, test).accuracy;
    };
    const std::vector<uint64_t> seeds = {3, 5, 9};
    const char* names[3] = {"wo_se", "wo_gf", "wo_bm"};
    int wins[3] = {0, 0, 0};
    std::string per_seed;
    for (uint64_t seed : seeds) {
        double full = fit_acc(base, seed);
        ModelConfig a = base, b = base, c = base;
        a.use_se = false;
        b.use_gf = false;
        c.use_bm = false;
        double acc[3] = {fit_acc(a, seed), fit_acc(b, seed), fit_acc(c, seed)};
        char line[128];
        std::snprintf(line, sizeof line, " [seed %llu: full %.2f se %.2f gf %.2f bm %.2f]",
                      static_cast<unsigned long long>(seed), full, acc[0], acc[1], acc[2]);
        per_seed += line;
        for (int i = 0; i < 3; ++i) {
            if (full >= acc[i] - 0.02 - 1e-9) ++wins[i];
        }
    }
    bool ok = wins[0] >= 2 && wins[1] >= 2 && wins[2] >= 2;
    char buf[320];
    std::snprintf(buf, sizeof buf, "full within 2 points of %s/%s/%s in %d/%d/%d of 3 seeds%s", names[0], names[1],
                  names[2], wins[0], wins[1], wins[2], per_seed.c_str());
    return {ok ? "PASS" : "WARN", buf};
}

// Same seed, same data, two independent runs: byte-identical checkpoints.
Outcome determinism() {
    auto run_once = [] {
        ModelConfig cfg = tiny_config();
        cfg.d_model = 16;
        cfg.d_ffn = 24;
        cfg.max_len = 32;
        cfg.conv_filters = 4;
        cfg.dropout = 0.1;
        cfg.batch_size = 8;
        cfg.epochs = 3;
        cfg.lr = 3e-3;
        Dataset ds = make_synthetic({.schema = "pdtb4", .train = 60, .valid = 20, .test = 20, .seed = 11});
        std::vector<std::string> texts;
        for (const auto& r : ds.of_split("train")) {
            texts.push_back(r.arg1);
            texts.push_back(r.arg2);
        }
        Vocabulary vocab = Vocabulary::build(texts);
        cfg.vocab_size = vocab.size();
        Schema schema = Schema::parse(cfg.schema);
        Rng rng(33);
        Model model(cfg, schema, rng);
        auto train = prepare_examples(ds.of_split("train"), vocab, schema, cfg.max_len);
        auto valid = prepare_examples(ds.of_split("valid"), vocab, schema, cfg.max_len);
        train_model(model, train, valid, 33);
        return checkpoint_to_json(cfg, vocab, model.params()).dump();
    };
    std::string first = run_once();
    std::string second = run_once();
    if (first != second) return {"FAIL", "two identically seeded runs produced different checkpoints"};
    return {"PASS", "two identically seeded training runs serialized byte-identical checkpoints (" +
                        std::to_string(first.size()) + " bytes)"};
}

// Split bookkeeping against the published four-way corpus statistics; only
// runs when a local conversion of the licensed corpus is available.
Outcome corpus_bookkeeping() {
    std::vector<std::string> candidates;
    if (const char* env = std::getenv("BMGF_PDTB_TSV"); env && *env) candidates.push_back(env);
    candidates.push_back("data/pdtb.tsv");
    candidates.push_back("../data/pdtb.tsv");
    std::string path;
    for (const auto& c : candidates) {
        if (std::filesystem::exists(c)) {
            path = c;
            break;
        }
    }
    if (path.empty()) {
        return {"SKIP", "no licensed corpus found (set BMGF_PDTB_TSV or place data/pdtb.tsv)"};
    }
    Dataset ds = load_tsv(path);
    Schema four = Schema::parse("pdtb4");
    long n_train = ds.of_split("train").size();
    long n_valid = ds.of_split("valid").size();
    long n_test = ds.of_split("test").size();
    long n_exp_test = 0;
    const int expansion = four.index_of("Expansion");
    for (const auto& r : ds.of_split("test")) {
        auto golds = four.project_all(r.raw_labels);
        for (int g : golds) {
            if (g == expansion) {
                ++n_exp_test;
                break;
            }
        }
    }
    char buf[200];
    std::snprintf(buf, sizeof buf, "train %ld valid %ld test %ld exp-test %ld (want 12362/1183/1046/574)", n_train,
                  n_valid, n_test, n_exp_test);
    bool ok = n_train == 12362 && n_valid == 1183 && n_test == 1046 && n_exp_test == 574;
    return {ok ? "PASS" : "FAIL", buf};
}

}  // namespace

int main() {
    run("gradient-check", gradient_suite);
    run("feature-widths", shape_suite);
    run("matching-oracle", oracle_equivalence);
    run("gate-convexity", convexity);
    run("cosine-bounds", cosine_bounds);
    run("multi-gold-scoring", scoring_rule);
    run("overfit", overfit_check);
    run("ablation-direction", ablation_direction);
    run("determinism", determinism);
    run("corpus-bookkeeping", corpus_bookkeeping);
    std::printf("%d failure(s), %d warning(s)\n", g_failures, g_warnings);
    return g_failures;
}
