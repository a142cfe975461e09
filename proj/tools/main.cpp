#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqmatch/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seqmatch;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "flat key=value config file (keys <command>.<flag>)");
    cmd->add_option("--seed", opts.seed, "master random seed");
    cmd->add_option("--out", opts.out_dir, "output directory");
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Config precedence is: command-line flag > config file > built-in default.
// Keys are dotted paths (train.lr = 0.0004); entries for other commands are
// ignored, entries already set on the command line are not overridden.
std::vector<std::string> merge_config_args(const std::vector<std::string>& args) {
    std::string command;
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (command.empty() && !args[i].empty() && args[i][0] != '-') command = args[i];
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty() || command.empty()) return args;

    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read config file: " + config_path);

    std::vector<std::string> merged = args;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) throw ParseError("config line is not key = value", line_no);
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto dot = key.find('.');
        if (dot == std::string::npos) throw ParseError("config key '" + key + "' is not a dotted path", line_no);
        if (key.substr(0, dot) != command) continue;
        const std::string flag = "--" + key.substr(dot + 1);
        bool given = false;
        for (const auto& a : merged) {
            if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
        }
        if (!given) merged.push_back(flag + "=" + value);
    }
    return merged;
}

void ensure_out_dir(const CommonOpts& opts) {
    if (!fs::exists(opts.out_dir)) fs::create_directories(opts.out_dir);
}

std::string out_path(const CommonOpts& opts, const std::string& name) {
    return (fs::path(opts.out_dir) / name).string();
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_examples(const std::string& path, const std::vector<Example>& examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& ex : examples) {
        json j;
        j["context"] = ex.context;
        j["response"] = ex.response;
        j["label"] = ex.label;
        j["dialogue_id"] = ex.dialogue_id;
        j["turn"] = ex.turn;
        out << j.dump() << "\n";
    }
}

std::vector<Example> read_examples(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<Example> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        Example ex;
        ex.context = j.at("context").get<std::vector<std::string>>();
        ex.response = j.at("response").get<std::vector<std::string>>();
        ex.label = j.at("label").get<int>();
        ex.dialogue_id = j.value("dialogue_id", std::string{});
        ex.turn = j.value("turn", 0);
        if (ex.context.empty() || ex.response.empty()) {
            throw ParseError("example with an empty sequence", line_no);
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

json metrics_json(const MetricReport& report) {
    json j;
    j["recall_at_1"] = report.recall_at_1;
    j["recall_at_10"] = report.recall_at_10;
    j["recall_at_50"] = report.recall_at_50;
    j["mrr"] = report.mrr;
    if (report.map) j["map"] = *report.map;
    j["criterion"] = report.criterion;
    j["contexts"] = report.contexts;
    return j;
}

void write_ranked_lists(const std::string& path, const std::vector<RankedList>& lists) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& list : lists) {
        json j;
        j["context_id"] = list.context_id;
        j["ranking"] = list.candidate_ids;
        j["scores"] = list.scores;
        j["gold_ids"] = list.gold_ids;
        out << j.dump() << "\n";
    }
}

std::vector<ScoreEntry> scores_from_lists(const std::vector<RankedList>& lists) {
    std::vector<ScoreEntry> entries;
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.candidate_ids.size(); ++i) {
            entries.push_back({list.context_id, list.candidate_ids[i], list.scores[i]});
        }
    }
    return entries;
}

std::function<std::vector<std::string>(const std::string&)> gold_lookup_from_pools(
    const std::vector<PoolRecord>& pools) {
    auto table = std::make_shared<std::unordered_map<std::string, std::vector<std::string>>>();
    for (const auto& p : pools) (*table)[p.id] = p.gold_ids;
    return [table](const std::string& context_id) {
        auto it = table->find(context_id);
        return it == table->end() ? std::vector<std::string>{} : it->second;
    };
}

/// Candidate sentences for the encoding cache. The cache is keyed by candidate
/// id, so an id reappearing with different tokens would silently score with
/// another sentence's vector; reject that outright.
std::vector<std::pair<std::string, std::vector<int>>> collect_cache_sentences(
    const std::vector<PoolRecord>& pools, const Vocabulary& vocab, int max_response_len) {
    std::vector<std::pair<std::string, std::vector<int>>> sentences;
    std::unordered_map<std::string, std::vector<std::string>> seen;
    for (const auto& pool : pools) {
        for (const auto& c : pool.candidates) {
            auto resp = c.tokens;
            if (static_cast<int>(resp.size()) > max_response_len) {
                resp.resize(static_cast<std::size_t>(max_response_len));
            }
            auto it = seen.find(c.id);
            if (it != seen.end()) {
                if (it->second != resp) {
                    throw PreconditionError(
                        "candidate id '" + c.id +
                        "' appears with different tokens; ids must identify sentences globally "
                        "when an encoding cache is used");
                }
                continue;
            }
            seen[c.id] = resp;
            sentences.push_back({c.id, vocab.encode(resp)});
        }
    }
    return sentences;
}

Vocabulary build_vocabulary(const std::vector<Example>& examples) {
    Vocabulary vocab;
    for (const auto& ex : examples) {
        for (const auto& t : ex.context) vocab.add(t);
        for (const auto& t : ex.response) vocab.add(t);
    }
    return vocab;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string item = csv.substr(start, comma == std::string::npos ? csv.size() - start
                                                                              : comma - start);
        if (!item.empty()) out.push_back(std::stoi(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareOpts {
    CommonOpts common;
    std::string data_path;
    double ratio = 4.0;
    int max_context_len = 300;
    int max_response_len = 30;
    bool ctx_keep_first = false;
};

int cmd_prepare(const PrepareOpts& opts) {
    ensure_out_dir(opts.common);
    const std::vector<Dialogue> dialogues = ingest_dialogues(opts.data_path);

    std::vector<Example> positives;
    std::size_t eligible = 0;
    for (const auto& d : dialogues) {
        if (d.utterances.size() < 2) continue;
        ++eligible;
        auto exs = augment(d);
        positives.insert(positives.end(), exs.begin(), exs.end());
    }
    std::vector<std::vector<std::string>> response_pool;
    response_pool.reserve(positives.size());
    for (const auto& ex : positives) response_pool.push_back(ex.response);

    std::vector<Example> mixed =
        sample_negatives(positives, response_pool, opts.ratio, opts.common.seed);
    std::size_t negatives = mixed.size() - positives.size();
    for (auto& ex : mixed) {
        auto [ctx, resp] = truncate_directional(std::move(ex.context), std::move(ex.response),
                                                opts.max_context_len, opts.max_response_len,
                                                !opts.ctx_keep_first);
        ex.context = std::move(ctx);
        ex.response = std::move(resp);
    }
    write_examples(out_path(opts.common, "examples.jsonl"), mixed);

    json stats;
    stats["dialogues"] = dialogues.size();
    stats["eligible_dialogues"] = eligible;
    stats["positives"] = positives.size();
    stats["negatives"] = negatives;
    stats["examples"] = mixed.size();
    stats["ratio_requested"] = opts.ratio;
    stats["ratio_achieved"] =
        positives.empty() ? 0.0 : static_cast<double>(negatives) / static_cast<double>(positives.size());
    write_json_file(out_path(opts.common, "stats.json"), stats);
    std::cout << stats.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    CommonOpts common;
    std::string model = "esim";
    std::string train_path;
    std::string dev_path;
    std::vector<std::string> embedding_files;
    std::string emb_dims_csv;
    int hidden = -1;  // model default: 300 for esim, 400 for the siamese prefilter
    int heads = 4;
    int attn_dim = 256;
    int mlp_hidden = 256;
    double lr = 4e-4;
    int batch_size = 128;
    int epochs = 10;
    double dropout = 0.0;
    double clip_norm = 0.0;
    int max_context_len = 300;
    int max_response_len = 30;
    bool freeze_embeddings = false;
    bool no_ctx_compose = false;
    bool ctx_keep_first = false;
};

int cmd_train(const TrainOpts& opts) {
    ensure_out_dir(opts.common);
    const int hidden = opts.hidden > 0 ? opts.hidden : (opts.model == "siamese" ? 400 : 300);
    TrainData data;
    data.train = read_examples(opts.train_path);
    if (!opts.dev_path.empty()) data.dev = ingest_pools(opts.dev_path);

    Vocabulary vocab = build_vocabulary(data.train);
    vocab.save(out_path(opts.common, "vocab.txt"));

    std::vector<int> emb_dims =
        opts.emb_dims_csv.empty() ? std::vector<int>{300} : parse_int_list(opts.emb_dims_csv);
    if (!opts.embedding_files.empty() && opts.embedding_files.size() != emb_dims.size()) {
        throw PreconditionError("--emb-dims must list one dimension per embedding file");
    }

    Hyperparams hp;
    hp.lr = opts.lr;
    hp.batch_size = opts.batch_size;
    hp.epochs = opts.epochs;
    hp.seed = opts.common.seed;
    hp.hidden = hidden;
    hp.max_context_len = opts.max_context_len;
    hp.max_response_len = opts.max_response_len;
    hp.flags.ctx_compose = !opts.no_ctx_compose;
    hp.dropout = opts.dropout;
    hp.clip_norm = opts.clip_norm;
    hp.ctx_truncate_keep_last = !opts.ctx_keep_first;

    const std::string ckpt = out_path(opts.common, "model.ckpt");
    const std::string log = out_path(opts.common, "train_log.jsonl");
    TrainResult result;
    std::size_t parameter_count = 0;

    if (opts.model == "esim") {
        EsimConfig cfg;
        cfg.hidden = hidden;
        cfg.emb_dims = emb_dims;
        cfg.emb_trainable = !opts.freeze_embeddings;
        cfg.dropout = static_cast<Real>(opts.dropout);
        EsimModel model = EsimModel::create(vocab, cfg, opts.common.seed);
        for (std::size_t i = 0; i < opts.embedding_files.size(); ++i) {
            auto stats = load_embedding_file(opts.embedding_files[i], emb_dims[i], vocab, model.params,
                                             model.embeddings.tables[i]);
            std::cout << "loaded " << stats.loaded << " rows (" << stats.skipped << " skipped) from "
                      << opts.embedding_files[i] << "\n";
        }
        parameter_count = model.parameter_count();
        EsimScorer scorer(model, hp.flags);
        result = train(scorer, data, vocab, hp, ckpt, log);
    } else if (opts.model == "siamese") {
        SiameseConfig cfg;
        cfg.hidden = hidden;
        cfg.heads = opts.heads;
        cfg.attn_dim = opts.attn_dim;
        cfg.mlp_hidden = opts.mlp_hidden;
        cfg.emb_dims = emb_dims;
        cfg.emb_trainable = !opts.freeze_embeddings;
        SiameseModel model = SiameseModel::create(vocab, cfg, opts.common.seed);
        for (std::size_t i = 0; i < opts.embedding_files.size(); ++i) {
            auto stats = load_embedding_file(opts.embedding_files[i], emb_dims[i], vocab, model.params,
                                             model.embeddings.tables[i]);
            std::cout << "loaded " << stats.loaded << " rows (" << stats.skipped << " skipped) from "
                      << opts.embedding_files[i] << "\n";
        }
        parameter_count = model.parameter_count();
        SiameseScorer scorer(model);
        result = train(scorer, data, vocab, hp, ckpt, log);
    } else {
        throw PreconditionError("--model must be esim or siamese");
    }

    json summary;
    summary["model"] = opts.model;
    summary["parameters"] = parameter_count;
    summary["epochs"] = opts.epochs;
    summary["best_epoch"] = result.best_epoch;
    summary["best_criterion"] = result.best_criterion;
    write_json_file(out_path(opts.common, "train_summary.json"), summary);
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// rank (single model or two-stage)

struct RankOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string vocab_path;
    std::string pools_path;
    std::string siamese_checkpoint;  // enables two-stage
    std::string cache_path;
    int top_n = 100;
    int max_context_len = 300;
    int max_response_len = 30;
    bool no_ctx_compose = false;
    bool ctx_keep_first = false;
};

int cmd_rank(const RankOpts& opts) {
    ensure_out_dir(opts.common);
    const Vocabulary vocab = Vocabulary::load(opts.vocab_path);
    const std::vector<PoolRecord> pools = ingest_pools(opts.pools_path);
    AblationFlags flags{!opts.no_ctx_compose};

    std::vector<RankedList> lists;
    const CheckpointHeader header = read_checkpoint_header(opts.checkpoint);

    if (!opts.siamese_checkpoint.empty()) {
        if (header.kind != "esim") {
            throw IncompatibleError("two-stage reranking expects an esim checkpoint for stage 2");
        }
        EsimModel esim = load_esim(opts.checkpoint, vocab);
        SiameseModel siamese = load_siamese(opts.siamese_checkpoint, vocab);

        EncodedCorpus cache;
        if (!opts.cache_path.empty() && fs::exists(opts.cache_path)) {
            cache = EncodedCorpus::load(opts.cache_path);
        } else {
            cache = encode_corpus(siamese,
                                  collect_cache_sentences(pools, vocab, opts.max_response_len));
            if (!opts.cache_path.empty()) cache.save(opts.cache_path);
        }

        CandidateScorer stage1 = make_cached_siamese_scorer(siamese, cache, vocab,
                                                            opts.max_context_len, opts.max_response_len);
        CandidateScorer stage2 = make_esim_scorer(esim, vocab, opts.max_context_len,
                                                  opts.max_response_len, flags, !opts.ctx_keep_first);
        for (const auto& pool : pools) {
            const int n = std::min<int>(opts.top_n, static_cast<int>(pool.candidates.size()));
            lists.push_back(two_stage(pool, stage1, stage2, n));
        }
    } else if (header.kind == "esim") {
        EsimModel model = load_esim(opts.checkpoint, vocab);
        lists = rank_pools(pools, make_esim_scorer(model, vocab, opts.max_context_len,
                                                   opts.max_response_len, flags, !opts.ctx_keep_first));
    } else {
        SiameseModel model = load_siamese(opts.checkpoint, vocab);
        lists = rank_pools(pools,
                           make_siamese_scorer(model, vocab, opts.max_context_len, opts.max_response_len));
    }

    write_score_file(out_path(opts.common, "scores.jsonl"), scores_from_lists(lists));
    write_ranked_lists(out_path(opts.common, "ranked.jsonl"), lists);
    const bool any_gold =
        std::any_of(lists.begin(), lists.end(), [](const RankedList& l) { return !l.gold_ids.empty(); });
    if (any_gold) {
        write_json_file(out_path(opts.common, "report.json"), metrics_json(compute_metrics(lists)));
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    CommonOpts common;
    std::string scores_path;
    std::string pools_path;
    bool select_thresh = false;
};

int cmd_eval(const EvalOpts& opts) {
    ensure_out_dir(opts.common);
    const std::vector<ScoreEntry> entries = read_score_file(opts.scores_path);
    const std::vector<PoolRecord> pools = ingest_pools(opts.pools_path);
    const std::vector<RankedList> lists = rank_from_scores(entries, gold_lookup_from_pools(pools));

    json report = metrics_json(compute_metrics(lists));
    if (opts.select_thresh) {
        const ThresholdResult t = select_threshold(lists);
        report["threshold"] = t.theta;
        report["threshold_criterion"] = t.criterion;
    }
    write_json_file(out_path(opts.common, "report.json"), report);
    std::cout << report.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// prefilter

struct PrefilterOpts {
    CommonOpts common;
    std::string checkpoint;
    std::string vocab_path;
    std::string pools_path;
    std::string cache_path;
    int top_n = 100;
    int max_context_len = 300;
    int max_response_len = 30;
};

int cmd_prefilter(const PrefilterOpts& opts) {
    ensure_out_dir(opts.common);
    const Vocabulary vocab = Vocabulary::load(opts.vocab_path);
    const std::vector<PoolRecord> pools = ingest_pools(opts.pools_path);
    SiameseModel model = load_siamese(opts.checkpoint, vocab);

    const std::string cache_path =
        opts.cache_path.empty() ? out_path(opts.common, "encodings.cache") : opts.cache_path;
    EncodedCorpus cache;
    if (fs::exists(cache_path)) {
        cache = EncodedCorpus::load(cache_path);
    } else {
        cache = encode_corpus(model, collect_cache_sentences(pools, vocab, opts.max_response_len));
        cache.save(cache_path);
    }

    CandidateScorer stage1 = make_cached_siamese_scorer(model, cache, vocab, opts.max_context_len,
                                                        opts.max_response_len);
    std::vector<RankedList> lists = rank_pools(pools, stage1);
    write_score_file(out_path(opts.common, "stage1_scores.jsonl"), scores_from_lists(lists));

    // pruned pools: stage-1 top-N candidates, original token payloads
    std::ofstream pruned(out_path(opts.common, "pruned_pools.jsonl"), std::ios::binary);
    if (!pruned) throw std::runtime_error("cannot write pruned pools");
    for (std::size_t p = 0; p < pools.size(); ++p) {
        const PoolRecord& pool = pools[p];
        const RankedList& list = lists[p];
        std::unordered_map<std::string, const Candidate*> by_id;
        for (const auto& c : pool.candidates) by_id[c.id] = &c;
        json j;
        j["id"] = pool.id;
        j["context"] = json::array();
        for (const auto& u : pool.context) {
            j["context"].push_back({{"speaker", u.speaker}, {"tokens", u.tokens}});
        }
        j["candidates"] = json::array();
        const int n = std::min<int>(opts.top_n, static_cast<int>(list.candidate_ids.size()));
        for (int i = 0; i < n; ++i) {
            const Candidate* c = by_id.at(list.candidate_ids[static_cast<std::size_t>(i)]);
            j["candidates"].push_back({{"id", c->id}, {"tokens", c->tokens}});
        }
        j["gold_ids"] = pool.gold_ids;
        pruned << j.dump() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleOpts {
    CommonOpts common;
    std::vector<std::string> inputs;
    std::string pools_path;
};

int cmd_ensemble(const EnsembleOpts& opts) {
    ensure_out_dir(opts.common);
    std::vector<std::vector<ScoreEntry>> inputs;
    for (const auto& path : opts.inputs) inputs.push_back(read_score_file(path));
    const std::vector<ScoreEntry> merged = ensemble(inputs);
    write_score_file(out_path(opts.common, "ensemble_scores.jsonl"), merged);

    auto gold_lookup = [&]() -> std::function<std::vector<std::string>(const std::string&)> {
        if (opts.pools_path.empty()) {
            return [](const std::string&) { return std::vector<std::string>{}; };
        }
        return gold_lookup_from_pools(ingest_pools(opts.pools_path));
    }();
    const std::vector<RankedList> lists = rank_from_scores(merged, gold_lookup);
    write_ranked_lists(out_path(opts.common, "ensemble_ranked.jsonl"), lists);
    if (!opts.pools_path.empty()) {
        write_json_file(out_path(opts.common, "report.json"), metrics_json(compute_metrics(lists)));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequential matching pipeline for multi-turn response selection"};
    app.require_subcommand(1);

    PrepareOpts prepare_opts;
    CLI::App* prepare = app.add_subcommand("prepare", "augment dialogues and sample negatives");
    add_common(prepare, prepare_opts.common);
    prepare->add_option("--data", prepare_opts.data_path, "dialogue-json-lines input")->required();
    prepare->add_option("--ratio", prepare_opts.ratio, "negatives per positive (may be fractional)");
    prepare->add_option("--max-context-len", prepare_opts.max_context_len, "context token limit");
    prepare->add_option("--max-response-len", prepare_opts.max_response_len, "response token limit");
    prepare->add_flag("--ctx-keep-first", prepare_opts.ctx_keep_first,
                      "truncate the context keeping its first tokens instead of its last");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "train a scorer");
    add_common(train_cmd, train_opts.common);
    train_cmd->add_option("--model", train_opts.model, "esim or siamese");
    train_cmd->add_option("--train", train_opts.train_path, "prepared examples.jsonl")->required();
    train_cmd->add_option("--dev", train_opts.dev_path, "pool-json-lines dev set");
    train_cmd->add_option("--embeddings", train_opts.embedding_files, "pretrained embedding files");
    train_cmd->add_option("--emb-dims", train_opts.emb_dims_csv, "comma separated table widths");
    train_cmd->add_option("--hidden", train_opts.hidden, "BiLSTM/MLP hidden size");
    train_cmd->add_option("--heads", train_opts.heads, "attention heads (siamese)");
    train_cmd->add_option("--attn-dim", train_opts.attn_dim, "attention dimension (siamese)");
    train_cmd->add_option("--mlp-hidden", train_opts.mlp_hidden, "classifier hidden width (siamese)");
    train_cmd->add_option("--lr", train_opts.lr, "Adam learning rate");
    train_cmd->add_option("--batch-size", train_opts.batch_size, "mini-batch size");
    train_cmd->add_option("--epochs", train_opts.epochs, "training epochs");
    train_cmd->add_option("--dropout", train_opts.dropout, "dropout rate (0 disables)");
    train_cmd->add_option("--clip-norm", train_opts.clip_norm, "global gradient clip (0 disables)");
    train_cmd->add_option("--max-context-len", train_opts.max_context_len, "context token limit");
    train_cmd->add_option("--max-response-len", train_opts.max_response_len, "response token limit");
    train_cmd->add_flag("--freeze-embeddings", train_opts.freeze_embeddings,
                        "keep embedding tables fixed during training");
    train_cmd->add_flag("--no-ctx-compose", train_opts.no_ctx_compose,
                        "skip context-side local matching and composition");
    train_cmd->add_flag("--ctx-keep-first", train_opts.ctx_keep_first,
                        "truncate the context keeping its first tokens");

    RankOpts rank_opts;
    CLI::App* rank_cmd = app.add_subcommand("rank", "score candidate pools with a checkpoint");
    add_common(rank_cmd, rank_opts.common);
    rank_cmd->add_option("--checkpoint", rank_opts.checkpoint, "model checkpoint")->required();
    rank_cmd->add_option("--vocab", rank_opts.vocab_path, "vocabulary file")->required();
    rank_cmd->add_option("--pools", rank_opts.pools_path, "pool-json-lines input")->required();
    rank_cmd->add_option("--siamese-checkpoint", rank_opts.siamese_checkpoint,
                         "prefilter checkpoint; enables two-stage ranking");
    rank_cmd->add_option("--cache", rank_opts.cache_path, "candidate encoding cache file");
    rank_cmd->add_option("--top", rank_opts.top_n, "candidates kept for reranking");
    rank_cmd->add_option("--max-context-len", rank_opts.max_context_len, "context token limit");
    rank_cmd->add_option("--max-response-len", rank_opts.max_response_len, "response token limit");
    rank_cmd->add_flag("--no-ctx-compose", rank_opts.no_ctx_compose,
                       "score with the context-composition ablation");
    rank_cmd->add_flag("--ctx-keep-first", rank_opts.ctx_keep_first,
                       "truncate the context keeping its first tokens");

    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("eval", "compute metrics for a score file");
    add_common(eval_cmd, eval_opts.common);
    eval_cmd->add_option("--scores", eval_opts.scores_path, "score file")->required();
    eval_cmd->add_option("--pools", eval_opts.pools_path, "pool-json-lines with gold ids")->required();
    eval_cmd->add_flag("--select-threshold", eval_opts.select_thresh,
                       "grid-search the no-correct-candidate threshold");

    PrefilterOpts prefilter_opts;
    CLI::App* prefilter_cmd = app.add_subcommand("prefilter", "rank pools with the sentence encoder");
    add_common(prefilter_cmd, prefilter_opts.common);
    prefilter_cmd->add_option("--checkpoint", prefilter_opts.checkpoint, "siamese checkpoint")->required();
    prefilter_cmd->add_option("--vocab", prefilter_opts.vocab_path, "vocabulary file")->required();
    prefilter_cmd->add_option("--pools", prefilter_opts.pools_path, "pool-json-lines input")->required();
    prefilter_cmd->add_option("--top", prefilter_opts.top_n, "candidates kept per pool");
    prefilter_cmd->add_option("--cache", prefilter_opts.cache_path, "encoding cache path");
    prefilter_cmd->add_option("--max-context-len", prefilter_opts.max_context_len, "context token limit");
    prefilter_cmd->add_option("--max-response-len", prefilter_opts.max_response_len,
                              "response token limit");

    EnsembleOpts ensemble_opts;
    CLI::App* ensemble_cmd = app.add_subcommand("ensemble", "average score files");
    add_common(ensemble_cmd, ensemble_opts.common);
    ensemble_cmd->add_option("--inputs", ensemble_opts.inputs, "score files to average")->required();
    ensemble_cmd->add_option("--pools", ensemble_opts.pools_path,
                             "pool-json-lines with gold ids (enables a metric report)");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = merge_config_args(args);
        std::reverse(args.begin(), args.end());  // CLI11's vector overload wants reversed args
        app.parse(std::move(args));
        if (prepare->parsed()) return cmd_prepare(prepare_opts);
        if (train_cmd->parsed()) return cmd_train(train_opts);
        if (rank_cmd->parsed()) return cmd_rank(rank_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts);
        if (prefilter_cmd->parsed()) return cmd_prefilter(prefilter_opts);
        if (ensemble_cmd->parsed()) return cmd_ensemble(ensemble_opts);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        const char* type = "error";
        if (dynamic_cast<const ParseError*>(&e)) type = "parse_error";
        else if (dynamic_cast<const DimensionError*>(&e)) type = "dimension_error";
        else if (dynamic_cast<const PreconditionError*>(&e)) type = "precondition_error";
        else if (dynamic_cast<const IncompatibleError*>(&e)) type = "incompatible_error";
        json err;
        err["error"] = {{"type", type}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
