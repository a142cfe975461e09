#pragma once

#include "seqmatch/embedding.hpp"
#include "seqmatch/layers.hpp"

namespace seqmatch {

struct AblationFlags {
    /// When false, context-side local matching and matching composition are
    /// skipped; the context block of the classifier input pools the encoded
    /// states directly.
    bool ctx_compose = true;
};

struct EsimConfig {
    int hidden = 300;  // d_h: BiLSTM and MLP hidden size
    std::vector<int> emb_dims = {300};
    bool emb_trainable = true;
    Real dropout = 0;  // applied to local matching vectors and the pooled vector when > 0
};

/// Cross-attention scorer: input encoding, token-level alignment, local
/// matching, composition and a 2-way classifier. The matching feed-forward
/// and composition BiLSTM are separate per side so the context block can be
/// ablated without touching response-side parameters.
struct EsimModel {
    EsimConfig cfg;
    ParameterStore params;
    EmbeddingSet embeddings;
    FeedForward projection;
    BiLstm encoder;
    FeedForward match_ctx;
    FeedForward match_resp;
    BiLstm compose_ctx;
    BiLstm compose_resp;
    FeedForward cls_hidden;  // 8H -> H, tanh
    FeedForward cls_out;     // H -> 2, softmax

    static EsimModel create(const Vocabulary& vocab, EsimConfig cfg, std::uint64_t seed);
    std::size_t parameter_count() const { return params.trainable_count(); }
};

/// e[i][j] = dot(ctx_state_i, resp_state_j).
Var attention_scores(Graph& g, Var ctx_states, Var resp_states);

struct AlignVars {
    Var alpha;      // softmax of e over response positions
    Var beta;       // softmax of e over context positions
    Var ctx_dual;   // alpha * resp_states
    Var resp_dual;  // beta^T * ctx_states
};
AlignVars align(Graph& g, Var e, Var ctx_states, Var resp_states, const Mask& ctx_mask,
                const Mask& resp_mask);

/// F([s; d; s-d; s*d]) with ReLU, reducing width 8H to H.
Var local_match(Graph& g, const FeedForward& f, Var states, Var dual);

/// Composition BiLSTMs, masked max/mean pooling in the order
/// [ctx_max; ctx_mean; resp_max; resp_mean], then the tanh MLP and softmax.
/// Returns the probability pair [1 x 2] = (p_negative, p_positive).
/// With ctx_compose off, ctx_local is ignored and the context block pools
/// ctx_states instead.
Var compose_and_classify(Graph& g, const EsimModel& m, Var ctx_states, Var ctx_local, Var resp_local,
                         const Mask& ctx_mask, const Mask& resp_mask, const AblationFlags& flags,
                         std::mt19937_64* dropout_rng = nullptr);

/// Full scorer subgraph over raw token ids. Trailing PAD ids are stripped;
/// interior padding or an all-PAD sequence is a precondition error.
Var build_esim_scorer(Graph& g, const EsimModel& m, const std::vector<int>& ctx_ids,
                      const std::vector<int>& resp_ids, const AblationFlags& flags,
                      std::mt19937_64* dropout_rng = nullptr);

/// Deterministic p_positive for one (context, response) pair.
double score_pair(const EsimModel& m, const std::vector<int>& ctx_ids,
                  const std::vector<int>& resp_ids, const AblationFlags& flags = {});

/// Real prefix of an id sequence: validates padding is trailing and that at
/// least one real token remains.
std::vector<int> strip_trailing_pad(const std::vector<int>& ids);

}  // namespace seqmatch
