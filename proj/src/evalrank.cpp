#include "seqmatch/evalrank.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"

namespace seqmatch {

bool RankedList::has_gold(const std::string& candidate_id) const {
    return std::find(gold_ids.begin(), gold_ids.end(), candidate_id) != gold_ids.end();
}

RankedList rank_pool(const PoolRecord& pool, const CandidateScorer& scorer) {
    if (pool.candidates.empty()) throw PreconditionError("rank_pool: empty candidate pool");
    std::set<std::string> seen;
    for (const auto& c : pool.candidates) {
        if (!seen.insert(c.id).second) {
            throw PreconditionError("rank_pool: duplicate candidate id '" + c.id + "'");
        }
    }
    struct Scored {
        const Candidate* cand;
        double score;
    };
    std::vector<Scored> scored;
    scored.reserve(pool.candidates.size());
    for (const auto& c : pool.candidates) scored.push_back({&c, scorer(pool.context, c)});
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.cand->id < b.cand->id;
    });
    RankedList out;
    out.context_id = pool.id;
    out.gold_ids = pool.gold_ids;
    for (const auto& s : scored) {
        out.candidate_ids.push_back(s.cand->id);
        out.scores.push_back(s.score);
    }
    return out;
}

namespace {

/// 1-based rank of the first gold, or 0 if the list holds none.
int first_gold_rank(const RankedList& list) {
    for (std::size_t r = 0; r < list.candidate_ids.size(); ++r) {
        if (list.has_gold(list.candidate_ids[r])) return static_cast<int>(r) + 1;
    }
    return 0;
}

}  // namespace

double recall_at_n(const std::vector<RankedList>& lists, int n) {
    if (n < 1) throw PreconditionError("recall_at_n: n must be >= 1");
    if (lists.empty()) return 0;
    int hits = 0;
    for (const auto& list : lists) {
        const int rank = first_gold_rank(list);
        if (rank >= 1 && rank <= n) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(lists.size());
}

double mrr(const std::vector<RankedList>& lists) {
    if (lists.empty()) return 0;
    double total = 0;
    for (const auto& list : lists) {
        const int rank = first_gold_rank(list);
        if (rank >= 1) total += 1.0 / static_cast<double>(rank);
    }
    return total / static_cast<double>(lists.size());
}

double mean_average_precision(const std::vector<RankedList>& lists) {
    if (lists.empty()) return 0;
    double total = 0;
    for (const auto& list : lists) {
        int hits = 0;
        double ap = 0;
        for (std::size_t r = 0; r < list.candidate_ids.size(); ++r) {
            if (list.has_gold(list.candidate_ids[r])) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(r + 1);
            }
        }
        if (hits > 0) ap /= static_cast<double>(hits);
        total += ap;
    }
    return total / static_cast<double>(lists.size());
}

MetricReport compute_metrics(const std::vector<RankedList>& lists) {
    MetricReport report;
    report.contexts = static_cast<int>(lists.size());
    report.recall_at_1 = recall_at_n(lists, 1);
    report.recall_at_10 = recall_at_n(lists, 10);
    report.recall_at_50 = recall_at_n(lists, 50);
    report.mrr = mrr(lists);
    report.criterion = (report.recall_at_10 + report.mrr) / 2.0;
    const bool all_have_gold =
        !lists.empty() && std::all_of(lists.begin(), lists.end(),
                                      [](const RankedList& l) { return !l.gold_ids.empty(); });
    if (all_have_gold) report.map = mean_average_precision(lists);
    return report;
}

std::vector<double> threshold_grid() {
    std::vector<double> grid;
    for (int i = 0; i < 50; ++i) grid.push_back(0.50 + 0.01 * i);
    return grid;
}

ThresholdResult select_threshold(const std::vector<RankedList>& dev_lists) {
    const bool any_empty_gold = std::any_of(dev_lists.begin(), dev_lists.end(),
                                            [](const RankedList& l) { return l.gold_ids.empty(); });
    if (!any_empty_gold) {
        throw PreconditionError("select_threshold: dev set has no context with empty golds");
    }

    ThresholdResult best;
    best.criterion = -1;
    for (double theta : threshold_grid()) {
        double r10 = 0, rr = 0;
        for (const auto& list : dev_lists) {
            const double max_score = list.scores.empty() ? 0 : list.scores.front();
            if (max_score < theta) {
                // "none" predicted: counts as a rank-1 gold iff it is correct
                if (list.gold_ids.empty()) {
                    r10 += 1;
                    rr += 1;
                }
                continue;
            }
            const int rank = first_gold_rank(list);
            if (rank >= 1) {
                if (rank <= 10) r10 += 1;
                rr += 1.0 / static_cast<double>(rank);
            }
        }
        const double n = static_cast<double>(dev_lists.size());
        const double criterion = (r10 / n + rr / n) / 2.0;
        if (criterion > best.criterion) {
            best.criterion = criterion;
            best.theta = theta;
        }
    }
    return best;
}

std::vector<ScoreEntry> ensemble(const std::vector<std::vector<ScoreEntry>>& inputs) {
    if (inputs.empty()) throw PreconditionError("ensemble: no inputs");
    using Key = std::pair<std::string, std::string>;
    std::map<Key, double> sums;
    for (const auto& e : inputs[0]) sums[{e.context_id, e.candidate_id}] = e.score;
    if (sums.size() != inputs[0].size()) throw PreconditionError("ensemble: duplicate keys in input 0");

    for (std::size_t f = 1; f < inputs.size(); ++f) {
        std::set<Key> covered;
        for (const auto& e : inputs[f]) {
            const Key key{e.context_id, e.candidate_id};
            auto it = sums.find(key);
            if (it == sums.end() || !covered.insert(key).second) {
                throw IncompatibleError("ensemble: input " + std::to_string(f) +
                                        " has extra or duplicate key (" + e.context_id + ", " +
                                        e.candidate_id + ")");
            }
            it->second += e.score;
        }
        if (covered.size() != sums.size()) {
            std::string missing;
            for (const auto& [key, unused] : sums) {
                if (!covered.count(key)) {
                    missing += " (" + key.first + ", " + key.second + ")";
                    if (missing.size() > 200) break;
                }
            }
            throw IncompatibleError("ensemble: input " + std::to_string(f) + " is missing keys:" +
                                    missing);
        }
    }

    std::vector<ScoreEntry> out;
    out.reserve(sums.size());
    const double n = static_cast<double>(inputs.size());
    for (const auto& [key, sum] : sums) out.push_back({key.first, key.second, sum / n});
    return out;
}

std::vector<ScoreEntry> read_score_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read score file: " + path);
    std::vector<ScoreEntry> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        if (!j.contains("context_id") || !j.contains("candidate_id") || !j.contains("score")) {
            throw ParseError("score entry needs context_id, candidate_id and score", line_no);
        }
        ScoreEntry e;
        e.context_id = j.at("context_id").is_string() ? j.at("context_id").get<std::string>()
                                                      : j.at("context_id").dump();
        e.candidate_id = j.at("candidate_id").is_string() ? j.at("candidate_id").get<std::string>()
                                                          : j.at("candidate_id").dump();
        e.score = j.at("score").get<double>();
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_score_file(const std::string& path, const std::vector<ScoreEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write score file: " + path);
    for (const auto& e : entries) {
        nlohmann::json j;
        j["context_id"] = e.context_id;
        j["candidate_id"] = e.candidate_id;
        j["score"] = e.score;
        out << j.dump() << "\n";
    }
}

std::vector<RankedList> rank_from_scores(
    const std::vector<ScoreEntry>& entries,
    const std::function<std::vector<std::string>(const std::string&)>& gold_lookup) {
    std::map<std::string, std::vector<std::pair<std::string, double>>> by_context;
    for (const auto& e : entries) by_context[e.context_id].push_back({e.candidate_id, e.score});

    std::vector<RankedList> lists;
    for (auto& [context_id, cands] : by_context) {
        std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        RankedList list;
        list.context_id = context_id;
        list.gold_ids = gold_lookup(context_id);
        for (auto& [id, score] : cands) {
            list.candidate_ids.push_back(id);
            list.scores.push_back(score);
        }
        lists.push_back(std::move(list));
    }
    return lists;
}

RankedList two_stage(const PoolRecord& pool, const CandidateScorer& stage1,
                     const CandidateScorer& stage2, int top_n) {
    if (top_n < 1 || top_n > static_cast<int>(pool.candidates.size())) {
        throw PreconditionError("two_stage: top_n must be in [1, pool size]");
    }
    RankedList coarse = rank_pool(pool, stage1);

    std::set<std::string> top_ids(coarse.candidate_ids.begin(),
                                  coarse.candidate_ids.begin() + top_n);
    PoolRecord head;
    head.id = pool.id;
    head.context = pool.context;
    head.gold_ids = pool.gold_ids;
    for (const auto& c : pool.candidates) {
        if (top_ids.count(c.id)) head.candidates.push_back(c);
    }
    RankedList fine = rank_pool(head, stage2);

    RankedList out;
    out.context_id = pool.id;
    out.gold_ids = pool.gold_ids;
    for (std::size_t i = 0; i < fine.candidate_ids.size(); ++i) {
        out.candidate_ids.push_back(fine.candidate_ids[i]);
        out.scores.push_back(fine.scores[i] + 1.0);  // keep the column monotone across blocks
    }
    for (std::size_t i = static_cast<std::size_t>(top_n); i < coarse.candidate_ids.size(); ++i) {
        out.candidate_ids.push_back(coarse.candidate_ids[i]);
        out.scores.push_back(coarse.scores[i]);
    }
    return out;
}

namespace {

std::vector<int> encode_pair_side(const Vocabulary& vocab, const std::vector<std::string>& tokens) {
    return vocab.encode(tokens);
}

}  // namespace

CandidateScorer make_esim_scorer(const EsimModel& m, const Vocabulary& vocab, int max_c, int max_r,
                                 AblationFlags flags, bool ctx_keep_last) {
    return [&m, &vocab, max_c, max_r, flags, ctx_keep_last](const std::vector<Utterance>& context,
                                                            const Candidate& cand) {
        auto [ctx, resp] =
            truncate_directional(serialize_context(context), cand.tokens, max_c, max_r, ctx_keep_last);
        return score_pair(m, encode_pair_side(vocab, ctx), encode_pair_side(vocab, resp), flags);
    };
}

CandidateScorer make_siamese_scorer(const SiameseModel& m, const Vocabulary& vocab, int max_c,
                                    int max_r) {
    return [&m, &vocab, max_c, max_r](const std::vector<Utterance>& context, const Candidate& cand) {
        auto [ctx, resp] = truncate(serialize_context(context), cand.tokens, max_c, max_r);
        return siamese_score_pair(m, encode_pair_side(vocab, ctx), encode_pair_side(vocab, resp));
    };
}

CandidateScorer make_cached_siamese_scorer(const SiameseModel& m, const EncodedCorpus& cache,
                                           const Vocabulary& vocab, int max_c, int max_r) {
    if (cache.params_checksum != m.params.checksum()) {
        throw IncompatibleError("encoding cache is stale: parameter checksum mismatch");
    }
    if (cache.hidden != m.cfg.hidden || cache.heads != m.cfg.heads) {
        throw IncompatibleError("encoding cache was built with different model dimensions");
    }
    return [&m, &cache, &vocab, max_c, max_r](const std::vector<Utterance>& context,
                                              const Candidate& cand) {
        auto [ctx, resp] = truncate(serialize_context(context), cand.tokens, max_c, max_r);
        std::vector<float> cand_vec;
        if (const EncodedSentence* hit = cache.find(cand.id)) {
            cand_vec = hit->v;
        } else {
            cand_vec = encode_sentence_values(m, vocab.encode(resp));
        }
        std::vector<Real> ctx_vec;
        {
            Graph g(const_cast<ParameterStore*>(&m.params));
            Var v = encode_sentence(g, m, vocab.encode(ctx));
            ctx_vec = g.value(v).data;
        }
        std::vector<Real> cand_real(cand_vec.begin(), cand_vec.end());
        return pair_classify(m, ctx_vec, cand_real);
    };
}

std::vector<RankedList> rank_pools(const std::vector<PoolRecord>& pools,
                                   const CandidateScorer& scorer) {
    std::vector<RankedList> lists;
    lists.reserve(pools.size());
    for (const auto& pool : pools) lists.push_back(rank_pool(pool, scorer));
    return lists;
}

}  // namespace seqmatch
