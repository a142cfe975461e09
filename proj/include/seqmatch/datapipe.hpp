#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "seqmatch/embedding.hpp"
#include "seqmatch/tensor.hpp"

namespace seqmatch {

struct Utterance {
    std::string speaker;
    std::vector<std::string> tokens;
};

struct Dialogue {
    std::string id;
    std::vector<Utterance> utterances;
};

/// One training pair. Context tokens are serialized (special tokens included);
/// both sequences are non-empty.
struct Example {
    std::vector<std::string> context;
    std::vector<std::string> response;
    int label = 0;
    std::string dialogue_id;
    int turn = 0;  // 1-based index of the response utterance in its dialogue
};

struct Candidate {
    std::string id;
    std::vector<std::string> tokens;
};

/// One evaluation record: a context, its candidate pool and the gold ids
/// (possibly empty for pools that may lack the correct response).
struct PoolRecord {
    std::string id;
    std::vector<Utterance> context;
    std::vector<Candidate> candidates;
    std::vector<std::string> gold_ids;
};

/// dialogue-json-lines: {"id", "utterances": [{"speaker", "tokens"}]}
std::vector<Dialogue> ingest_dialogues(const std::string& path);
/// pool-json-lines: {"id", "context": [{"speaker","tokens"}],
///                   "candidates": [{"id","tokens"}], "gold_ids": [...]}
std::vector<PoolRecord> ingest_pools(const std::string& path);

/// Concatenates utterances in order, appending __eou__ after every utterance
/// and __eot__ additionally after the last utterance of each speaker turn.
std::vector<std::string> serialize_context(const std::vector<Utterance>& utterances);

/// Every utterance from the second onward becomes a positive example with the
/// preceding utterances as its context: a dialogue of length L yields L-1.
std::vector<Example> augment(const Dialogue& dialogue);

/// Per positive, draws negatives uniformly without replacement from the pool,
/// never picking a response token-equal to the gold. Integer ratios draw
/// exactly `ratio` negatives; fractional ratios draw floor(ratio) plus one
/// more with probability frac(ratio). Output order: each positive followed by
/// its negatives. Deterministic for a fixed seed.
std::vector<Example> sample_negatives(const std::vector<Example>& positives,
                                      const std::vector<std::vector<std::string>>& pool,
                                      double ratio, std::uint64_t seed);

/// Context keeps its LAST max_c tokens, response its FIRST max_r tokens.
std::pair<std::vector<std::string>, std::vector<std::string>> truncate(
    std::vector<std::string> context, std::vector<std::string> response, int max_c, int max_r);

/// Truncation with a selectable context direction. ctx_keep_last=false keeps
/// the first tokens instead (drops the most recent utterances).
std::pair<std::vector<std::string>, std::vector<std::string>> truncate_directional(
    std::vector<std::string> context, std::vector<std::string> response, int max_c, int max_r,
    bool ctx_keep_last);

/// Padded ids plus masks for a slice of examples. Padding is trailing; each
/// row keeps at least one real position.
struct Batch {
    std::vector<std::vector<int>> context_ids;
    std::vector<Mask> context_mask;
    std::vector<std::vector<int>> response_ids;
    std::vector<Mask> response_mask;
    std::vector<int> labels;

    int size() const { return static_cast<int>(labels.size()); }
};

/// Looks tokens up (UNK for unknown), pads rows to the per-batch maximum and
/// emits the final partial batch.
std::vector<Batch> batchify(const std::vector<Example>& examples, int batch_size,
                            const Vocabulary& vocab);

}  // namespace seqmatch
