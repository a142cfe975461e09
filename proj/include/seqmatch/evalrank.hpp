#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "seqmatch/datapipe.hpp"
#include "seqmatch/esim.hpp"
#include "seqmatch/siamese.hpp"

namespace seqmatch {

/// Candidates of one context ordered by descending score; ties broken by
/// ascending candidate id.
struct RankedList {
    std::string context_id;
    std::vector<std::string> candidate_ids;
    std::vector<double> scores;
    std::vector<std::string> gold_ids;

    bool has_gold(const std::string& candidate_id) const;
};

using CandidateScorer =
    std::function<double(const std::vector<Utterance>& context, const Candidate& candidate)>;

/// Scores every candidate independently and sorts per the RankedList rules.
RankedList rank_pool(const PoolRecord& pool, const CandidateScorer& scorer);

double recall_at_n(const std::vector<RankedList>& lists, int n);
/// Mean reciprocal rank of the first gold; a list without any gold contributes 0.
double mrr(const std::vector<RankedList>& lists);
/// Mean average precision over lists (each scored context should have a gold).
double mean_average_precision(const std::vector<RankedList>& lists);

struct MetricReport {
    double recall_at_1 = 0;
    double recall_at_10 = 0;
    double recall_at_50 = 0;
    double mrr = 0;
    std::optional<double> map;  // present when every list has at least one gold
    double criterion = 0;       // (recall_at_10 + mrr) / 2
    int contexts = 0;
};

MetricReport compute_metrics(const std::vector<RankedList>& lists);

/// Grid search over theta in {0.50, 0.51, ..., 0.99}: a context predicts
/// "no correct candidate" iff its maximum score < theta. A correct "none"
/// prediction scores as a rank-1 gold; an incorrect one contributes nothing.
/// Returns the lowest theta maximizing (R@10 + MRR)/2.
struct ThresholdResult {
    double theta = 0;
    double criterion = 0;
};
ThresholdResult select_threshold(const std::vector<RankedList>& dev_lists);
std::vector<double> threshold_grid();

struct ScoreEntry {
    std::string context_id;
    std::string candidate_id;
    double score = 0;
};

/// Arithmetic mean of scores per (context, candidate) key. All inputs must
/// cover exactly the same key set; the error lists the symmetric difference.
/// Output is sorted by key, so the result is invariant to input file order.
std::vector<ScoreEntry> ensemble(const std::vector<std::vector<ScoreEntry>>& inputs);

/// One JSON object per line: {"context_id", "candidate_id", "score"}.
std::vector<ScoreEntry> read_score_file(const std::string& path);
void write_score_file(const std::string& path, const std::vector<ScoreEntry>& entries);

/// Groups score entries per context and ranks them. gold_lookup maps a
/// context id to its gold candidate ids (missing contexts get none).
std::vector<RankedList> rank_from_scores(
    const std::vector<ScoreEntry>& entries,
    const std::function<std::vector<std::string>(const std::string&)>& gold_lookup);

/// Stage 1 ranks the whole pool with the cheap scorer; stage 2 re-scores only
/// the top N. The final list is the stage-2 order over those N followed by the
/// stage-1 order of the remainder; reranked scores are offset by +1 so the
/// score column stays non-increasing across the two blocks.
RankedList two_stage(const PoolRecord& pool, const CandidateScorer& stage1,
                     const CandidateScorer& stage2, int top_n);

/// Pair scorers over serialized, truncated token sequences.
CandidateScorer make_esim_scorer(const EsimModel& m, const Vocabulary& vocab, int max_c, int max_r,
                                 AblationFlags flags = {}, bool ctx_keep_last = true);
CandidateScorer make_siamese_scorer(const SiameseModel& m, const Vocabulary& vocab, int max_c,
                                    int max_r);
/// Siamese scorer that takes candidate vectors from a cache; the context side
/// is encoded on the fly. Throws IncompatibleError if the cache was built from
/// different parameters; candidates missing from the cache are encoded fresh.
CandidateScorer make_cached_siamese_scorer(const SiameseModel& m, const EncodedCorpus& cache,
                                           const Vocabulary& vocab, int max_c, int max_r);

/// Ranks every pool and merges the metrics; the workhorse behind dev-set
/// evaluation and the eval command.
std::vector<RankedList> rank_pools(const std::vector<PoolRecord>& pools,
                                   const CandidateScorer& scorer);

}  // namespace seqmatch
