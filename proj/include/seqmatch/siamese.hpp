#pragma once

#include "seqmatch/embedding.hpp"
#include "seqmatch/layers.hpp"

namespace seqmatch {

struct SiameseConfig {
    int hidden = 400;     // d_h
    int heads = 4;        // d_m
    int attn_dim = 256;   // d_a
    int mlp_hidden = 256; // width of both classifier hidden layers (equal, so the
                          // second layer can carry an additive shortcut)
    std::vector<int> emb_dims = {300};
    bool emb_trainable = true;
};

/// Parameter-tied sentence encoder with multi-head self-attention pooling and
/// a pairwise MLP classifier. One encoder serves both sides of a pair.
struct SiameseModel {
    SiameseConfig cfg;
    ParameterStore params;
    EmbeddingSet embeddings;
    FeedForward projection;
    BiLstm encoder;
    int attn_w1 = -1;  // [d_a x 2H]
    int attn_b1 = -1;  // [d_a]
    int attn_w2 = -1;  // [d_m x d_a]
    int attn_b2 = -1;  // [d_m]
    FeedForward mlp1;  // 4*(2H*d_m) -> mlp_hidden
    FeedForward mlp2;  // mlp_hidden -> mlp_hidden, residual
    FeedForward mlp_out;  // mlp_hidden -> 2

    static SiameseModel create(const Vocabulary& vocab, SiameseConfig cfg, std::uint64_t seed);
    std::size_t parameter_count() const { return params.trainable_count(); }
    int sentence_vector_size() const { return 2 * cfg.hidden * cfg.heads; }
};

/// A = transpose(softmax(W2 ReLU(W1 H^T + b1) + b2)): [T x d_m], one
/// attention distribution over real positions per head.
Var self_attention(Graph& g, const SiameseModel& m, Var hidden_states, const Mask& mask);

/// V = A^T H flattened row-major into a vector of length 2*d_h*d_m.
Var attentive_pool(Graph& g, Var attention, Var hidden_states);

/// Encodes one token sequence into its fixed vector (graph form).
Var encode_sentence(Graph& g, const SiameseModel& m, const std::vector<int>& ids);

/// MLP([v_c; v_r; |v_c - v_r|; v_c * v_r]) -> probability pair [1 x 2].
Var pair_classify_graph(Graph& g, const SiameseModel& m, Var v_ctx, Var v_resp);

/// Full scorer subgraph over raw token ids (both sides share the encoder).
Var build_siamese_scorer(Graph& g, const SiameseModel& m, const std::vector<int>& ctx_ids,
                         const std::vector<int>& resp_ids);

/// p_positive from two precomputed sentence vectors.
double pair_classify(const SiameseModel& m, const std::vector<Real>& v_ctx,
                     const std::vector<Real>& v_resp);

double siamese_score_pair(const SiameseModel& m, const std::vector<int>& ctx_ids,
                          const std::vector<int>& resp_ids);

/// Forward-only sentence vector, rounded to 32-bit floats (the cache payload
/// precision, so cached and freshly encoded candidates score identically).
std::vector<float> encode_sentence_values(const SiameseModel& m, const std::vector<int>& ids);

struct EncodedSentence {
    std::string id;
    std::vector<float> v;
};

/// Sentence-vector cache for a fixed parameter snapshot. The header records
/// the parameter checksum so stale caches are rejected instead of silently
/// producing mismatched rankings.
struct EncodedCorpus {
    int hidden = 0;
    int heads = 0;
    std::uint64_t params_checksum = 0;
    std::vector<EncodedSentence> items;

    const EncodedSentence* find(const std::string& id) const;
    void save(const std::string& path) const;
    static EncodedCorpus load(const std::string& path);

  private:
    mutable std::unordered_map<std::string, int> index_;
};

/// Encodes every (id, token ids) sentence once.
EncodedCorpus encode_corpus(const SiameseModel& m,
                            const std::vector<std::pair<std::string, std::vector<int>>>& sentences);

}  // namespace seqmatch
