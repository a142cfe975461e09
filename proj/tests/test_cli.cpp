// Drives the installed binary end to end; needs SEQMATCH_CLI (set by ctest).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace seqmatch;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli() {
    const char* path = std::getenv("SEQMATCH_CLI");
    REQUIRE_MESSAGE(path != nullptr, "SEQMATCH_CLI must point at the binary (run via ctest)");
    return path;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const std::string& path) {
    return json::parse(slurp(path));
}

struct Workspace {
    std::string dir;
    Workspace() : dir(testsup::temp_dir("cli")) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return dir + "/" + name; }
};

}  // namespace

TEST_CASE("prepare counts: one dialogue of length 10 at ratio 4") {
    Workspace ws;
    Dialogue d;
    d.id = "d0";
    for (int i = 0; i < 10; ++i) {
        d.utterances.push_back({i % 2 ? "b" : "a", {"u" + std::to_string(i), "t"}});
    }
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), {d});
    REQUIRE(run("prepare --data " + ws.p("dialogues.jsonl") + " --ratio 4 --seed 3 --out " +
                ws.p("out")) == 0);
    const json stats = read_json(ws.p("out/stats.json"));
    CHECK(stats.at("positives") == 9);
    CHECK(stats.at("negatives") == 36);
    CHECK(stats.at("examples") == 45);
}

TEST_CASE("prepare reports ratio 1.0 when asked for ratio 1") {
    Workspace ws;
    auto corpus = testsup::make_synth_corpus(4, 40, 2, 4);
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), corpus.dialogues);
    REQUIRE(run("prepare --data " + ws.p("dialogues.jsonl") + " --ratio 1 --seed 3 --out " +
                ws.p("out")) == 0);
    const json stats = read_json(ws.p("out/stats.json"));
    CHECK(stats.at("ratio_achieved").get<double>() == doctest::Approx(1.0));
}

TEST_CASE("a missing input path fails before any output is written") {
    Workspace ws;
    CHECK(run("prepare --data " + ws.p("nope.jsonl") + " --out " + ws.p("out")) != 0);
    CHECK_FALSE(fs::exists(ws.p("out/examples.jsonl")));
}

TEST_CASE("prepare artifacts are byte-identical for a fixed seed") {
    Workspace ws;
    auto corpus = testsup::make_synth_corpus(5, 50, 4, 4);
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), corpus.dialogues);
    const std::string base = "prepare --data " + ws.p("dialogues.jsonl") + " --ratio 2 --seed 11 --out ";
    REQUIRE(run(base + ws.p("a")) == 0);
    REQUIRE(run(base + ws.p("b")) == 0);
    CHECK(slurp(ws.p("a/examples.jsonl")) == slurp(ws.p("b/examples.jsonl")));
    CHECK(slurp(ws.p("a/stats.json")) == slurp(ws.p("b/stats.json")));
}

TEST_CASE("eval reproduces the metric oracle from a score file") {
    Workspace ws;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<PoolRecord> pools;
    std::vector<testsup::OraclePool> oracle_pools;
    std::ofstream scores(ws.p("scores.jsonl"), std::ios::binary);
    for (int p = 0; p < 30; ++p) {
        PoolRecord pool;
        pool.id = "p" + std::to_string(p);
        pool.context = {{"a", {"q"}}};
        testsup::OraclePool op;
        const int n = 2 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "c%02d", i);
            const double s = std::floor(u(rng) * 8) / 8.0;
            pool.candidates.push_back({buf, {"t"}});
            op.ids.push_back(buf);
            op.scores.push_back(s);
            json j;
            j["context_id"] = pool.id;
            j["candidate_id"] = buf;
            j["score"] = s;
            scores << j.dump() << "\n";
        }
        op.golds.push_back(op.ids[rng() % static_cast<std::size_t>(n)]);
        pool.gold_ids = op.golds;
        pools.push_back(pool);
        oracle_pools.push_back(op);
    }
    scores.close();
    testsup::write_pools_jsonl(ws.p("pools.jsonl"), pools);
    REQUIRE(run("eval --scores " + ws.p("scores.jsonl") + " --pools " + ws.p("pools.jsonl") +
                " --out " + ws.p("out")) == 0);
    const json report = read_json(ws.p("out/report.json"));
    CHECK(report.at("recall_at_1").get<double>() == testsup::oracle_recall_at_n(oracle_pools, 1));
    CHECK(report.at("recall_at_10").get<double>() == testsup::oracle_recall_at_n(oracle_pools, 10));
    CHECK(report.at("mrr").get<double>() == testsup::oracle_mrr(oracle_pools));
    CHECK(report.at("map").get<double>() == testsup::oracle_map(oracle_pools));
}

TEST_CASE("ensembling a score file with itself is byte-stable") {
    Workspace ws;
    std::ofstream scores(ws.p("s.jsonl"), std::ios::binary);
    for (int i = 0; i < 10; ++i) {
        json j;
        j["context_id"] = "p0";
        j["candidate_id"] = "c" + std::to_string(i);
        j["score"] = 0.1 * i;
        scores << j.dump() << "\n";
    }
    scores.close();
    REQUIRE(run("ensemble --inputs " + ws.p("s.jsonl") + " --out " + ws.p("once")) == 0);
    REQUIRE(run("ensemble --inputs " + ws.p("s.jsonl") + " " + ws.p("s.jsonl") + " --out " +
                ws.p("twice")) == 0);
    CHECK(slurp(ws.p("once/ensemble_ranked.jsonl")) == slurp(ws.p("twice/ensemble_ranked.jsonl")));
    CHECK(slurp(ws.p("once/ensemble_scores.jsonl")) == slurp(ws.p("twice/ensemble_scores.jsonl")));
}

TEST_CASE("train, rank and the ablation flag work end to end") {
    Workspace ws;
    auto corpus = testsup::make_synth_corpus(5, 50, 6, 5);
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), corpus.dialogues);
    testsup::write_pools_jsonl(ws.p("pools.jsonl"), corpus.pools);
    REQUIRE(run("prepare --data " + ws.p("dialogues.jsonl") + " --ratio 2 --seed 5" +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("prep")) == 0);
    REQUIRE(run("train --model esim --train " + ws.p("prep/examples.jsonl") + " --dev " +
                ws.p("pools.jsonl") +
                " --hidden 8 --emb-dims 8 --epochs 2 --batch-size 16 --seed 5" +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("m")) == 0);
    REQUIRE(run("rank --checkpoint " + ws.p("m/model.ckpt") + " --vocab " + ws.p("m/vocab.txt") +
                " --pools " + ws.p("pools.jsonl") +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("full")) == 0);
    REQUIRE(run("rank --checkpoint " + ws.p("m/model.ckpt") + " --vocab " + ws.p("m/vocab.txt") +
                " --pools " + ws.p("pools.jsonl") + " --no-ctx-compose" +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("ablated")) == 0);
    // same checkpoint, different architecture path: the scores must differ
    CHECK(slurp(ws.p("full/scores.jsonl")) != slurp(ws.p("ablated/scores.jsonl")));
    CHECK(read_json(ws.p("full/report.json")).contains("criterion"));
}

TEST_CASE("prefilter and two-stage ranking work; clashing candidate ids are rejected") {
    Workspace ws;
    auto corpus = testsup::make_synth_corpus(5, 50, 8, 6);
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), corpus.dialogues);
    testsup::write_pools_jsonl(ws.p("pools.jsonl"), corpus.pools);
    REQUIRE(run("prepare --data " + ws.p("dialogues.jsonl") + " --ratio 2 --seed 5" +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("prep")) == 0);
    const std::string common =
        " --max-context-len 30 --max-response-len 8 --batch-size 16 --epochs 1 --seed 5 --emb-dims 8";
    REQUIRE(run("train --model siamese --train " + ws.p("prep/examples.jsonl") +
                " --hidden 8 --heads 2 --attn-dim 8 --mlp-hidden 8" + common + " --out " +
                ws.p("siam")) == 0);
    REQUIRE(run("train --model esim --train " + ws.p("prep/examples.jsonl") + " --hidden 8" + common +
                " --out " + ws.p("esim")) == 0);

    REQUIRE(run("prefilter --checkpoint " + ws.p("siam/model.ckpt") + " --vocab " +
                ws.p("siam/vocab.txt") + " --pools " + ws.p("pools.jsonl") +
                " --top 3 --max-context-len 30 --max-response-len 8 --out " + ws.p("pre")) == 0);
    CHECK(fs::exists(ws.p("pre/encodings.cache")));
    CHECK(fs::exists(ws.p("pre/pruned_pools.jsonl")));
    auto pruned = ingest_pools(ws.p("pre/pruned_pools.jsonl"));
    for (const auto& pool : pruned) CHECK(pool.candidates.size() == 3);

    REQUIRE(run("rank --checkpoint " + ws.p("esim/model.ckpt") + " --vocab " + ws.p("esim/vocab.txt") +
                " --pools " + ws.p("pools.jsonl") + " --siamese-checkpoint " + ws.p("siam/model.ckpt") +
                " --top 3 --cache " + ws.p("ts.cache") +
                " --max-context-len 30 --max-response-len 8 --out " + ws.p("two")) == 0);
    CHECK(fs::exists(ws.p("two/scores.jsonl")));

    // the same candidate id with different tokens cannot be cache-keyed
    auto clashing = corpus.pools;
    for (auto& pool : clashing) {
        for (auto& cand : pool.candidates) cand.id = "shared";
        pool.candidates.resize(1);
        pool.gold_ids.clear();
    }
    testsup::write_pools_jsonl(ws.p("clash.jsonl"), clashing);
    CHECK(run("prefilter --checkpoint " + ws.p("siam/model.ckpt") + " --vocab " +
              ws.p("siam/vocab.txt") + " --pools " + ws.p("clash.jsonl") +
              " --top 1 --max-context-len 30 --max-response-len 8 --out " + ws.p("clash_out")) != 0);
}

TEST_CASE("every command offers help and rejects unknown flags") {
    for (const char* cmd : {"prepare", "train", "eval", "rank", "prefilter", "ensemble"}) {
        CHECK(run(std::string(cmd) + " --help") == 0);
        CHECK(run(std::string(cmd) + " --not-a-real-flag") != 0);
    }
}

TEST_CASE("config file values apply beneath command-line flags") {
    Workspace ws;
    Dialogue d;
    d.id = "d0";
    for (int i = 0; i < 6; ++i) d.utterances.push_back({i % 2 ? "b" : "a", {"u" + std::to_string(i)}});
    testsup::write_dialogues_jsonl(ws.p("dialogues.jsonl"), {d});
    std::ofstream conf(ws.p("conf.txt"), std::ios::binary);
    conf << "# settings\nprepare.ratio = 3\nprepare.seed = 9\n";
    conf.close();

    REQUIRE(run("prepare --config " + ws.p("conf.txt") + " --data " + ws.p("dialogues.jsonl") +
                " --out " + ws.p("from_config")) == 0);
    CHECK(read_json(ws.p("from_config/stats.json")).at("negatives") == 15);  // 5 positives * 3

    REQUIRE(run("prepare --config " + ws.p("conf.txt") + " --ratio 1 --data " +
                ws.p("dialogues.jsonl") + " --out " + ws.p("overridden")) == 0);
    CHECK(read_json(ws.p("overridden/stats.json")).at("negatives") == 5);  // flag wins
}
