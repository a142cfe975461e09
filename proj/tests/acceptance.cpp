// Acceptance suite: one function per criterion, one PASS/FAIL line each.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "seqmatch/trainer.hpp"
#include "test_support.hpp"

using namespace seqmatch;
namespace fs = std::filesystem;

namespace {

struct Checker {
    std::ostringstream detail;
    int failures = 0;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            detail << "    FAILED: " << what << "\n";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vocabulary small_vocab() {
    Vocabulary v;
    for (int i = 0; i < 40; ++i) v.add("w" + std::to_string(i));
    return v;
}

// ---------------------------------------------------------------------------
// 1. gradient correctness: every op in isolation plus both full models

void criterion_gradients(Checker& c) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.2, 1.5);
    auto rand_tensor = [&](std::vector<int> shape) {
        Tensor t(std::move(shape));
        for (auto& v : t.data) v = static_cast<Real>(u(rng)) * (rng() % 2 ? Real(1) : Real(-1));
        return t;
    };
    auto check_op = [&](const std::string& name, const std::function<Var(Graph&, Var)>& wrap,
                        std::vector<int> shape) {
        ParameterStore params;
        params.add(name, rand_tensor(std::move(shape)));
        auto report = grad_check([&](Graph& g) { return g.sum(wrap(g, g.param(0))); }, params,
                                 1e-5, 1e-4);
        c.require(report.pass, "op " + name + " rel error " + std::to_string(report.max_rel_error));
    };

    const Tensor aux32 = rand_tensor({3, 2});
    const Tensor aux23 = rand_tensor({2, 3});
    const Tensor aux3 = rand_tensor({3});
    const Tensor weight23 = rand_tensor({2, 3});

    check_op("matmul", [&](Graph& g, Var x) { return g.matmul(x, g.input(aux32)); }, {2, 3});
    check_op("transpose", [](Graph& g, Var x) { return g.transpose(x); }, {2, 3});
    check_op("add", [&](Graph& g, Var x) { return g.add(x, g.input(aux23)); }, {2, 3});
    check_op("add_bias", [&](Graph& g, Var x) { return g.add(x, g.input(aux3)); }, {2, 3});
    check_op("sub", [&](Graph& g, Var x) { return g.sub(g.input(aux23), x); }, {2, 3});
    check_op("mul", [&](Graph& g, Var x) { return g.mul(x, g.input(aux23)); }, {2, 3});
    check_op("relu", [](Graph& g, Var x) { return g.relu(x); }, {2, 3});
    check_op("tanh", [](Graph& g, Var x) { return g.tanh(x); }, {2, 3});
    check_op("sigmoid", [](Graph& g, Var x) { return g.sigmoid(x); }, {2, 3});
    check_op("abs", [](Graph& g, Var x) { return g.abs(x); }, {2, 3});
    check_op("log", [](Graph& g, Var x) { return g.log(g.mul(x, x)); }, {2, 3});
    check_op("scalar_mul", [](Graph& g, Var x) { return g.scalar_mul(x, Real(0.37)); }, {2, 3});
    check_op("concat0", [&](Graph& g, Var x) { return g.concat({x, g.input(aux23)}, 0); }, {2, 3});
    check_op("concat1", [&](Graph& g, Var x) { return g.concat({x, g.input(aux32)}, 1); }, {3, 2});
    check_op("slice", [](Graph& g, Var x) { return g.slice(x, 1, 1, 2); }, {2, 4});
    check_op("reshape", [](Graph& g, Var x) { return g.reshape(x, {6}); }, {2, 3});
    check_op("rows", [](Graph& g, Var x) { return g.rows(x, {2, 0, 2}); }, {3, 2});
    check_op("masked_softmax_rows",
             [&](Graph& g, Var x) {
                 return g.mul(g.masked_softmax(x, Mask({1, 1, 0}), 1), g.input(weight23));
             },
             {2, 3});
    check_op("masked_softmax_cols",
             [&](Graph& g, Var x) {
                 return g.mul(g.masked_softmax(x, Mask({1, 1}), 0), g.input(weight23));
             },
             {2, 3});
    check_op("masked_max", [](Graph& g, Var x) { return g.masked_max(x, Mask({1, 1, 0})); }, {3, 2});
    check_op("masked_mean", [](Graph& g, Var x) { return g.masked_mean(x, Mask({1, 1, 0})); }, {3, 2});

    Vocabulary vocab = small_vocab();
    // model seeds sit away from max-pool argmax ties, where the loss is not
    // differentiable and finite differences straddle the tie
    {
        EsimConfig cfg;
        cfg.hidden = 3;
        cfg.emb_dims = {4};
        EsimModel m = EsimModel::create(vocab, cfg, 8);
        auto report = grad_check(
            [&](Graph& g) {
                Var p1 = build_esim_scorer(g, m, {4, 5, 6, 7}, {8, 9}, {});
                Var p2 = build_esim_scorer(g, m, {10, 11}, {12, 13, 14}, {});
                return g.average({cross_entropy(g, p1, 1), cross_entropy(g, p2, 0)});
            },
            m.params, 1e-5, 1e-4);
        c.require(report.pass, "full esim loss rel error " + std::to_string(report.max_rel_error));
    }
    {
        SiameseConfig cfg;
        cfg.hidden = 3;
        cfg.heads = 2;
        cfg.attn_dim = 3;
        cfg.mlp_hidden = 4;
        cfg.emb_dims = {4};
        SiameseModel m = SiameseModel::create(vocab, cfg, 8);
        auto report = grad_check(
            [&](Graph& g) {
                Var p1 = build_siamese_scorer(g, m, {4, 5, 6, 7}, {8, 9});
                Var p2 = build_siamese_scorer(g, m, {10, 11}, {12, 13, 14});
                return g.average({cross_entropy(g, p1, 1), cross_entropy(g, p2, 0)});
            },
            m.params, 1e-5, 1e-4);
        c.require(report.pass, "full siamese loss rel error " + std::to_string(report.max_rel_error));
    }
    const double elapsed = seconds_since(start);
    c.require(elapsed < 120.0, "runtime " + std::to_string(elapsed) + "s exceeds 2 min");
}

// ---------------------------------------------------------------------------
// 2. metric oracle equivalence on 500 random pools

void criterion_metric_oracle(Checker& c) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<RankedList> lists;
    std::vector<testsup::OraclePool> oracle_pools;
    for (int p = 0; p < 500; ++p) {
        const int n = 1 + static_cast<int>(rng() % 10);
        testsup::OraclePool op;
        PoolRecord pool;
        pool.id = "p" + std::to_string(p);
        pool.context = {{"a", {"q"}}};
        std::unordered_map<std::string, double> scores;
        for (int i = 0; i < n; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "c%02d", i);
            op.ids.push_back(buf);
            op.scores.push_back(std::floor(u(rng) * 5) / 5.0);  // ties on purpose
            scores[buf] = op.scores.back();
            pool.candidates.push_back({buf, {"t"}});
        }
        for (int i = 0; i < n; ++i) {
            if (u(rng) < 0.35) op.golds.push_back(op.ids[static_cast<std::size_t>(i)]);
        }
        pool.gold_ids = op.golds;
        lists.push_back(rank_pool(pool, [&scores](const std::vector<Utterance>&, const Candidate& cand) {
            return scores.at(cand.id);
        }));
        oracle_pools.push_back(std::move(op));
    }
    for (int n : {1, 2, 3, 5, 10, 50}) {
        c.require(recall_at_n(lists, n) == testsup::oracle_recall_at_n(oracle_pools, n),
                  "recall@" + std::to_string(n) + " differs from the oracle");
    }
    c.require(mrr(lists) == testsup::oracle_mrr(oracle_pools), "mrr differs from the oracle");
    c.require(mean_average_precision(lists) == testsup::oracle_map(oracle_pools),
              "map differs from the oracle");
    const double elapsed = seconds_since(start);
    c.require(elapsed < 10.0, "runtime " + std::to_string(elapsed) + "s exceeds 10 s");
}

// ---------------------------------------------------------------------------
// 3. augmentation and sampling counts

void criterion_augmentation(Checker& c) {
    for (int length = 2; length <= 12; ++length) {
        Dialogue d;
        d.id = "d";
        for (int i = 0; i < length; ++i) {
            d.utterances.push_back({i % 2 == 0 ? "a" : "b", {"t" + std::to_string(i)}});
        }
        c.require(augment(d).size() == static_cast<std::size_t>(length - 1),
                  "augment count for L=" + std::to_string(length));
    }

    std::vector<Example> positives;
    std::vector<std::vector<std::string>> pool;
    for (int i = 0; i < 50; ++i) {
        Example ex;
        ex.context = {"c"};
        ex.response = {"r" + std::to_string(i)};
        ex.label = 1;
        positives.push_back(ex);
        pool.push_back(ex.response);
    }
    auto mixed = sample_negatives(positives, pool, 4.0, 9);
    int run = -1;
    bool exact = true;
    for (const auto& ex : mixed) {
        if (ex.label == 1) {
            if (run >= 0) exact = exact && run == 4;
            run = 0;
        } else {
            ++run;
        }
    }
    exact = exact && run == 4;
    c.require(exact, "ratio 4 must draw exactly 4 negatives per positive");
    c.require(mixed.size() == 50 * 5, "ratio 4 total count");

    std::vector<Example> many(10000);
    std::vector<std::vector<std::string>> big_pool;
    for (int i = 0; i < 10000; ++i) {
        many[static_cast<std::size_t>(i)].context = {"c"};
        many[static_cast<std::size_t>(i)].response = {"r" + std::to_string(i)};
        many[static_cast<std::size_t>(i)].label = 1;
        big_pool.push_back(many[static_cast<std::size_t>(i)].response);
    }
    auto frac = sample_negatives(many, big_pool, 4.33, 17);
    const double mean_ratio = (static_cast<double>(frac.size()) - 10000.0) / 10000.0;
    c.require(std::fabs(mean_ratio - 4.33) <= 0.1,
              "fractional ratio mean " + std::to_string(mean_ratio));
}

// ---------------------------------------------------------------------------
// 4. truncation directionality, exhaustive

void criterion_truncation(Checker& c) {
    const int max_c = 7, max_r = 5;
    for (int cl = 0; cl <= 2 * max_c; ++cl) {
        for (int rl = 0; rl <= 2 * max_r; ++rl) {
            std::vector<std::string> ctx, resp;
            for (int i = 0; i < cl; ++i) ctx.push_back("c" + std::to_string(i));
            for (int i = 0; i < rl; ++i) resp.push_back("r" + std::to_string(i));
            auto [tc, tr] = truncate(ctx, resp, max_c, max_r);
            const int keep_c = std::min(cl, max_c);
            const int keep_r = std::min(rl, max_r);
            bool ok = static_cast<int>(tc.size()) == keep_c && static_cast<int>(tr.size()) == keep_r;
            for (int i = 0; ok && i < keep_c; ++i) {
                ok = tc[static_cast<std::size_t>(i)] == "c" + std::to_string(cl - keep_c + i);
            }
            for (int i = 0; ok && i < keep_r; ++i) {
                ok = tr[static_cast<std::size_t>(i)] == "r" + std::to_string(i);
            }
            c.require(ok, "lengths (" + std::to_string(cl) + "," + std::to_string(rl) + ")");
            if (!ok) return;
        }
    }
}

// ---------------------------------------------------------------------------
// 5. overfit integration: ESIM to R@1 = 1.0, Siamese to R@1 >= 0.9

struct OverfitSetup {
    TrainData data;
    Vocabulary vocab;
};

OverfitSetup overfit_setup(std::uint64_t seed, int max_c, int max_r, bool ctx_keep_last = true) {
    auto corpus = testsup::make_synth_corpus(20, 160, seed, /*pool_size=*/10);
    OverfitSetup s;
    s.data.train = testsup::pool_training_examples(corpus.pools, max_c, max_r, ctx_keep_last);
    s.data.dev = corpus.pools;
    s.vocab = testsup::vocab_from_examples(s.data.train);
    return s;
}

void criterion_overfit(Checker& c) {
    OverfitSetup s = overfit_setup(/*seed=*/5, /*max_c=*/40, /*max_r=*/8);

    Hyperparams hp;
    hp.epochs = 30;
    hp.batch_size = 16;
    hp.lr = 0.003;
    hp.seed = 5;
    hp.hidden = 32;
    hp.max_context_len = 40;
    hp.max_response_len = 8;

    {
        const auto start = std::chrono::steady_clock::now();
        EsimConfig cfg;
        cfg.hidden = 32;
        cfg.emb_dims = {32};
        EsimModel model = EsimModel::create(s.vocab, cfg, 5);
        EsimScorer scorer(model, {});
        TrainResult r = train(scorer, s.data, s.vocab, hp, "");
        double best_r1 = 0;
        for (const auto& e : r.log) best_r1 = std::max(best_r1, e.dev.recall_at_1);
        const double elapsed = seconds_since(start);
        c.require(best_r1 == 1.0, "esim best R@1 " + std::to_string(best_r1));
        c.require(elapsed < 300.0, "esim runtime " + std::to_string(elapsed) + "s exceeds 5 min");
    }
    {
        const auto start = std::chrono::steady_clock::now();
        SiameseConfig cfg;
        cfg.hidden = 32;
        cfg.heads = 2;
        cfg.attn_dim = 16;
        cfg.mlp_hidden = 32;
        cfg.emb_dims = {32};
        SiameseModel model = SiameseModel::create(s.vocab, cfg, 5);
        SiameseScorer scorer(model);
        TrainResult r = train(scorer, s.data, s.vocab, hp, "");
        double best_r1 = 0;
        for (const auto& e : r.log) best_r1 = std::max(best_r1, e.dev.recall_at_1);
        const double elapsed = seconds_since(start);
        c.require(best_r1 >= 0.9, "siamese best R@1 " + std::to_string(best_r1));
        c.require(elapsed < 300.0, "siamese runtime " + std::to_string(elapsed) + "s exceeds 5 min");
    }
}

// ---------------------------------------------------------------------------
// 6. ablation machinery: context-side composition parameters stay frozen

void criterion_ablation(Checker& c) {
    OverfitSetup s = overfit_setup(11, 40, 8);
    EsimConfig cfg;
    cfg.hidden = 8;
    cfg.emb_dims = {8};
    EsimModel model = EsimModel::create(s.vocab, cfg, 11);

    const std::uint64_t ctx_match_before = model.params.checksum_prefix("match.ctx");
    const std::uint64_t ctx_comp_before = model.params.checksum_prefix("comp.ctx");
    const std::uint64_t resp_match_before = model.params.checksum_prefix("match.resp");
    const std::uint64_t resp_comp_before = model.params.checksum_prefix("comp.resp");

    AdamState adam = AdamState::create(model.params);
    auto batches = batchify(s.data.train, 8, s.vocab);
    AblationFlags off{false};
    for (int step = 0; step < 5; ++step) {
        const Batch& batch = batches[static_cast<std::size_t>(step)];
        model.params.zero_grads();
        Graph g(&model.params);
        std::vector<Var> losses;
        for (int i = 0; i < batch.size(); ++i) {
            Var probs = build_esim_scorer(g, model, batch.context_ids[static_cast<std::size_t>(i)],
                                          batch.response_ids[static_cast<std::size_t>(i)], off);
            losses.push_back(cross_entropy(g, probs, batch.labels[static_cast<std::size_t>(i)]));
        }
        g.backward(g.average(losses));
        adam_step(adam, model.params, 0.003);
    }

    c.require(model.params.checksum_prefix("match.ctx") == ctx_match_before,
              "context matching parameters changed");
    c.require(model.params.checksum_prefix("comp.ctx") == ctx_comp_before,
              "context composition parameters changed");
    c.require(model.params.checksum_prefix("match.resp") != resp_match_before,
              "response matching parameters did not change");
    c.require(model.params.checksum_prefix("comp.resp") != resp_comp_before,
              "response composition parameters did not change");
}

// ---------------------------------------------------------------------------
// 7. two-stage consistency

void criterion_two_stage(Checker& c) {
    Vocabulary vocab = small_vocab();
    EsimConfig ecfg;
    ecfg.hidden = 4;
    ecfg.emb_dims = {4};
    EsimModel esim = EsimModel::create(vocab, ecfg, 31);
    SiameseConfig scfg;
    scfg.hidden = 4;
    scfg.heads = 2;
    scfg.attn_dim = 4;
    scfg.mlp_hidden = 6;
    scfg.emb_dims = {4};
    SiameseModel siamese = SiameseModel::create(vocab, scfg, 31);

    std::mt19937_64 rng(404);
    auto rand_tokens = [&](int n) {
        std::vector<std::string> t;
        for (int i = 0; i < n; ++i) t.push_back("w" + std::to_string(rng() % 36));
        return t;
    };

    std::vector<PoolRecord> pools;
    std::vector<std::pair<std::string, std::vector<int>>> sentences;
    for (int p = 0; p < 100; ++p) {
        PoolRecord pool;
        pool.id = "p" + std::to_string(p);
        pool.context = {{"a", rand_tokens(4)}, {"b", rand_tokens(3)}};
        for (int i = 0; i < 50; ++i) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "p%03d_c%02d", p, i);
            Candidate cand{buf, rand_tokens(2 + static_cast<int>(rng() % 3))};
            sentences.push_back({cand.id, vocab.encode(cand.tokens)});
            pool.candidates.push_back(std::move(cand));
        }
        for (int i = 0; i < 3; ++i) {
            pool.gold_ids.push_back(pool.candidates[rng() % 50].id);
        }
        pools.push_back(std::move(pool));
    }

    EncodedCorpus cache = encode_corpus(siamese, sentences);
    CandidateScorer stage1 = make_cached_siamese_scorer(siamese, cache, vocab, 40, 8);
    CandidateScorer stage2 = make_esim_scorer(esim, vocab, 40, 8);

    // N = pool size: two_stage ordering equals the pure ESIM ordering
    for (int p = 0; p < 10; ++p) {
        RankedList fused = two_stage(pools[static_cast<std::size_t>(p)], stage1, stage2, 50);
        RankedList pure = rank_pool(pools[static_cast<std::size_t>(p)], stage2);
        c.require(fused.candidate_ids == pure.candidate_ids,
                  "N=pool two_stage differs from pure reranker on pool " + std::to_string(p));
        if (fused.candidate_ids != pure.candidate_ids) return;
    }

    const int top_n = 25;
    std::vector<RankedList> fused_lists;
    std::vector<RankedList> stage1_lists;
    for (const auto& pool : pools) {
        fused_lists.push_back(two_stage(pool, stage1, stage2, top_n));
        stage1_lists.push_back(rank_pool(pool, stage1));
    }
    const double stage1_at_n = recall_at_n(stage1_lists, top_n);
    for (int k = 1; k <= top_n; ++k) {
        const double fused_at_k = recall_at_n(fused_lists, k);
        c.require(fused_at_k <= stage1_at_n + 1e-12,
                  "recall@" + std::to_string(k) + " exceeds the stage-1 ceiling");
        if (fused_at_k > stage1_at_n + 1e-12) return;
    }
}

// ---------------------------------------------------------------------------
// 8. ensemble contract

void criterion_ensemble(Checker& c) {
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScoreEntry> a, b;
    for (int p = 0; p < 20; ++p) {
        for (int i = 0; i < 10; ++i) {
            const std::string ctx = "p" + std::to_string(p);
            const std::string cand = "c" + std::to_string(i);
            a.push_back({ctx, cand, u(rng)});
            b.push_back({ctx, cand, u(rng)});
        }
    }
    auto no_golds = [](const std::string&) { return std::vector<std::string>{}; };

    auto self_merged = ensemble({a, a});
    auto self_lists = rank_from_scores(self_merged, no_golds);
    auto orig_lists = rank_from_scores(a, no_golds);
    bool same_ranking = self_lists.size() == orig_lists.size();
    for (std::size_t i = 0; same_ranking && i < self_lists.size(); ++i) {
        same_ranking = self_lists[i].candidate_ids == orig_lists[i].candidate_ids;
    }
    c.require(same_ranking, "self-ensemble changed a ranking");

    auto merged = ensemble({a, b});
    std::map<std::pair<std::string, std::string>, double> expect;
    for (std::size_t i = 0; i < a.size(); ++i) {
        expect[{a[i].context_id, a[i].candidate_id}] = (a[i].score + b[i].score) / 2.0;
    }
    double worst = 0;
    for (const auto& e : merged) {
        worst = std::max(worst, std::fabs(e.score - expect.at({e.context_id, e.candidate_id})));
    }
    c.require(worst <= 1e-12, "mean deviates from the oracle by " + std::to_string(worst));
}

// ---------------------------------------------------------------------------
// 9. directional sanity on the overfit corpus, averaged over 5 seeds

void criterion_directional(Checker& c) {
    const int n_seeds = 5;
    double esim_sum = 0, ctxdec_sum = 0, rev_sum = 0, ensemble_sum = 0;

    for (int si = 0; si < n_seeds; ++si) {
        const std::uint64_t seed = 100 + static_cast<std::uint64_t>(si);
        auto corpus = testsup::make_synth_corpus(20, 160, seed, 10);

        Hyperparams hp;
        hp.epochs = 30;
        hp.batch_size = 16;
        hp.lr = 0.003;
        hp.seed = seed;
        hp.hidden = 32;
        hp.max_context_len = 18;  // short enough that truncation direction matters
        hp.max_response_len = 8;

        struct Member {
            AblationFlags flags;
            bool keep_last;
        };
        const Member members[3] = {{{true}, true}, {{false}, true}, {{false}, false}};

        std::vector<std::vector<ScoreEntry>> member_scores;
        std::vector<double> member_criteria;
        auto gold_lookup = [&corpus](const std::string& id) {
            for (const auto& p : corpus.pools) {
                if (p.id == id) return p.gold_ids;
            }
            return std::vector<std::string>{};
        };

        for (const Member& member : members) {
            TrainData data;
            data.train = testsup::pool_training_examples(corpus.pools, hp.max_context_len,
                                                         hp.max_response_len, member.keep_last);
            Vocabulary vocab = testsup::vocab_from_examples(data.train);
            EsimConfig cfg;
            cfg.hidden = hp.hidden;
            cfg.emb_dims = {32};
            EsimModel model = EsimModel::create(vocab, cfg, seed);
            Hyperparams hp_member = hp;
            hp_member.flags = member.flags;
            hp_member.ctx_truncate_keep_last = member.keep_last;
            EsimScorer scorer(model, member.flags);
            train(scorer, data, vocab, hp_member, "");  // no dev: score the final weights

            CandidateScorer cand_scorer = make_esim_scorer(model, vocab, hp.max_context_len,
                                                           hp.max_response_len, member.flags,
                                                           member.keep_last);
            std::vector<ScoreEntry> scores;
            for (const auto& pool : corpus.pools) {
                RankedList list = rank_pool(pool, cand_scorer);
                for (std::size_t i = 0; i < list.candidate_ids.size(); ++i) {
                    scores.push_back({list.context_id, list.candidate_ids[i], list.scores[i]});
                }
            }
            member_criteria.push_back(
                compute_metrics(rank_from_scores(scores, gold_lookup)).criterion);
            member_scores.push_back(std::move(scores));
        }

        const double ens_criterion =
            compute_metrics(rank_from_scores(ensemble(member_scores), gold_lookup)).criterion;
        esim_sum += member_criteria[0];
        ctxdec_sum += member_criteria[1];
        rev_sum += member_criteria[2];
        ensemble_sum += ens_criterion;
    }

    const double esim_avg = esim_sum / n_seeds;
    const double ctxdec_avg = ctxdec_sum / n_seeds;
    const double rev_avg = rev_sum / n_seeds;
    const double ens_avg = ensemble_sum / n_seeds;
    std::ostringstream lvl;
    lvl << "esim " << esim_avg << ", -CtxDec " << ctxdec_avg << ", -CtxDec&-Rev " << rev_avg
        << ", ensemble " << ens_avg;
    c.detail << "    criteria: " << lvl.str() << "\n";
    c.require(ens_avg >= esim_avg - 1e-12, "ensemble below the full model: " + lvl.str());
    c.require(ens_avg >= ctxdec_avg - 1e-12, "ensemble below -CtxDec: " + lvl.str());
    c.require(ens_avg >= rev_avg - 1e-12, "ensemble below -CtxDec&-Rev: " + lvl.str());
    c.require(esim_avg >= ctxdec_avg - 1e-12, "full model below -CtxDec: " + lvl.str());
}

// ---------------------------------------------------------------------------
// 10. CLI determinism: identical seeds give bit-identical checkpoints

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_determinism(Checker& c) {
    const char* cli = std::getenv("SEQMATCH_CLI");
    if (!cli || !*cli) {
        c.require(false, "SEQMATCH_CLI is not set; run through ctest");
        return;
    }
    const std::string dir = testsup::temp_dir("accept_cli");
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto corpus = testsup::make_synth_corpus(8, 80, 9, 6);
    testsup::write_dialogues_jsonl(dir + "/dialogues.jsonl", corpus.dialogues);
    testsup::write_pools_jsonl(dir + "/pools.jsonl", corpus.pools);

    auto run = [&](const std::string& out) {
        const std::string quiet = " >/dev/null 2>&1";
        std::string cmd = std::string(cli) + " prepare --data " + dir + "/dialogues.jsonl --ratio 2" +
                          " --max-context-len 30 --max-response-len 8 --seed 77 --out " + out + quiet;
        if (std::system(cmd.c_str()) != 0) return false;
        cmd = std::string(cli) + " train --model esim --train " + out + "/examples.jsonl --dev " +
              dir + "/pools.jsonl --hidden 8 --emb-dims 8 --epochs 2 --batch-size 16 --lr 0.003" +
              " --max-context-len 30 --max-response-len 8 --seed 77 --out " + out + quiet;
        return std::system(cmd.c_str()) == 0;
    };
    const bool ok1 = run(dir + "/run1");
    const bool ok2 = run(dir + "/run2");
    c.require(ok1 && ok2, "cli runs failed");
    if (ok1 && ok2) {
        const std::string ck1 = read_bytes(dir + "/run1/model.ckpt");
        const std::string ck2 = read_bytes(dir + "/run2/model.ckpt");
        c.require(!ck1.empty() && ck1 == ck2, "checkpoints differ between identical runs");
        c.require(read_bytes(dir + "/run1/train_log.jsonl") == read_bytes(dir + "/run2/train_log.jsonl"),
                  "training logs differ between identical runs");
        c.require(read_bytes(dir + "/run1/examples.jsonl") == read_bytes(dir + "/run2/examples.jsonl"),
                  "prepared examples differ between identical runs");
    }
    fs::remove_all(dir);
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void(Checker&)> fn;
    };
    const Criterion criteria[] = {
        {"gradient-correctness", criterion_gradients},
        {"metric-oracle-equivalence", criterion_metric_oracle},
        {"augmentation-sampling-counts", criterion_augmentation},
        {"truncation-directionality", criterion_truncation},
        {"overfit-integration", criterion_overfit},
        {"ablation-zero-gradient", criterion_ablation},
        {"two-stage-consistency", criterion_two_stage},
        {"ensemble-contract", criterion_ensemble},
        {"directional-sanity", criterion_directional},
        {"seeded-determinism", criterion_determinism},
    };

    int failed = 0;
    int index = 0;
    for (const auto& criterion : criteria) {
        ++index;
        Checker checker;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.fn(checker);
        } catch (const std::exception& e) {
            checker.require(false, std::string("exception: ") + e.what());
        }
        const double elapsed = seconds_since(start);
        const bool pass = checker.failures == 0;
        failed += pass ? 0 : 1;
        std::printf("[%2d/10] %-30s %s (%.1fs)\n", index, criterion.name, pass ? "PASS" : "FAIL",
                    elapsed);
        if (!pass) std::fputs(checker.detail.str().c_str(), stdout);
        std::fflush(stdout);
    }
    std::printf("%d/10 criteria passed\n", 10 - failed);
    return failed;
}
