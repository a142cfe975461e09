#include "seqmatch/esim.hpp"

namespace seqmatch {

EsimModel EsimModel::create(const Vocabulary& vocab, EsimConfig cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EsimModel m;
    m.cfg = cfg;
    const int h = cfg.hidden;
    m.embeddings = EmbeddingSet::create(m.params, vocab, cfg.emb_dims, cfg.emb_trainable);
    m.projection = FeedForward::create(m.params, "proj", m.embeddings.total_width(), h, h, rng);
    m.encoder = BiLstm::create(m.params, "enc", h, h, rng);
    m.match_ctx = FeedForward::create(m.params, "match.ctx", 8 * h, h, h, rng);
    m.match_resp = FeedForward::create(m.params, "match.resp", 8 * h, h, h, rng);
    m.compose_ctx = BiLstm::create(m.params, "comp.ctx", h, h, rng);
    m.compose_resp = BiLstm::create(m.params, "comp.resp", h, h, rng);
    m.cls_hidden = FeedForward::create(m.params, "cls.hidden", 8 * h, h, h, rng);
    m.cls_out = FeedForward::create(m.params, "cls.out", h, 2, h, rng);
    return m;
}

Var attention_scores(Graph& g, Var ctx_states, Var resp_states) {
    const Tensor& c = g.value(ctx_states);
    const Tensor& r = g.value(resp_states);
    if (c.ndim() != 2 || r.ndim() != 2 || c.cols() != r.cols()) {
        throw DimensionError("attention_scores: state widths differ: " + shape_str(c.shape) +
                             " vs " + shape_str(r.shape));
    }
    return g.matmul(ctx_states, g.transpose(resp_states));
}

AlignVars align(Graph& g, Var e, Var ctx_states, Var resp_states, const Mask& ctx_mask,
                const Mask& resp_mask) {
    AlignVars out;
    out.alpha = g.masked_softmax(e, resp_mask, 1);
    out.beta = g.masked_softmax(e, ctx_mask, 0);
    out.ctx_dual = g.matmul(out.alpha, resp_states);
    out.resp_dual = g.matmul(g.transpose(out.beta), ctx_states);
    return out;
}

Var local_match(Graph& g, const FeedForward& f, Var states, Var dual) {
    const Tensor& s = g.value(states);
    const Tensor& d = g.value(dual);
    if (!s.same_shape(d)) {
        throw DimensionError("local_match: states " + shape_str(s.shape) + " and dual " +
                             shape_str(d.shape) + " differ");
    }
    Var feats = g.concat({states, dual, g.sub(states, dual), g.mul(states, dual)}, 1);
    return affine_relu(g, f, feats);
}

namespace {

Var pooled_block(Graph& g, Var states, const Mask& mask) {
    return g.concat({g.masked_max(states, mask), g.masked_mean(states, mask)}, 0);
}

}  // namespace

Var compose_and_classify(Graph& g, const EsimModel& m, Var ctx_states, Var ctx_local, Var resp_local,
                         const Mask& ctx_mask, const Mask& resp_mask, const AblationFlags& flags,
                         std::mt19937_64* dropout_rng) {
    Var ctx_block;
    if (flags.ctx_compose) {
        Var ctx_composed = bilstm_encode(g, m.compose_ctx, ctx_local, ctx_mask);
        ctx_block = pooled_block(g, ctx_composed, ctx_mask);
    } else {
        ctx_block = pooled_block(g, ctx_states, ctx_mask);
    }
    Var resp_composed = bilstm_encode(g, m.compose_resp, resp_local, resp_mask);
    Var resp_block = pooled_block(g, resp_composed, resp_mask);

    Var pooled = g.reshape(g.concat({ctx_block, resp_block}, 0), {1, 8 * m.cfg.hidden});
    if (m.cfg.dropout > 0 && dropout_rng) pooled = g.dropout(pooled, m.cfg.dropout, *dropout_rng);
    Var hidden = g.tanh(affine(g, m.cls_hidden, pooled));
    Var logits = affine(g, m.cls_out, hidden);
    return g.masked_softmax(logits, Mask::ones(2), 1);
}

std::vector<int> strip_trailing_pad(const std::vector<int>& ids) {
    std::size_t real = 0;
    while (real < ids.size() && ids[real] != Vocabulary::kPad) ++real;
    for (std::size_t i = real; i < ids.size(); ++i) {
        if (ids[i] != Vocabulary::kPad) throw PreconditionError("padding must be trailing");
    }
    if (real == 0) throw PreconditionError("empty sequence");
    return std::vector<int>(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(real));
}

Var build_esim_scorer(Graph& g, const EsimModel& m, const std::vector<int>& ctx_ids,
                      const std::vector<int>& resp_ids, const AblationFlags& flags,
                      std::mt19937_64* dropout_rng) {
    const std::vector<int> ctx = strip_trailing_pad(ctx_ids);
    const std::vector<int> resp = strip_trailing_pad(resp_ids);
    const Mask ctx_mask = Mask::ones(static_cast<int>(ctx.size()));
    const Mask resp_mask = Mask::ones(static_cast<int>(resp.size()));

    Var ctx_enc = project(g, m.projection, lookup_concat(g, m.embeddings, ctx));
    Var resp_enc = project(g, m.projection, lookup_concat(g, m.embeddings, resp));
    Var ctx_states = bilstm_encode(g, m.encoder, ctx_enc, ctx_mask);
    Var resp_states = bilstm_encode(g, m.encoder, resp_enc, resp_mask);

    Var e = attention_scores(g, ctx_states, resp_states);
    Var ctx_local{};
    Var resp_local{};
    if (flags.ctx_compose) {
        AlignVars al = align(g, e, ctx_states, resp_states, ctx_mask, resp_mask);
        ctx_local = local_match(g, m.match_ctx, ctx_states, al.ctx_dual);
        resp_local = local_match(g, m.match_resp, resp_states, al.resp_dual);
        if (m.cfg.dropout > 0 && dropout_rng) {
            ctx_local = g.dropout(ctx_local, m.cfg.dropout, *dropout_rng);
            resp_local = g.dropout(resp_local, m.cfg.dropout, *dropout_rng);
        }
    } else {
        // Response-side alignment still needs beta over context positions.
        Var beta = g.masked_softmax(e, ctx_mask, 0);
        Var resp_dual = g.matmul(g.transpose(beta), ctx_states);
        resp_local = local_match(g, m.match_resp, resp_states, resp_dual);
        if (m.cfg.dropout > 0 && dropout_rng) {
            resp_local = g.dropout(resp_local, m.cfg.dropout, *dropout_rng);
        }
    }
    return compose_and_classify(g, m, ctx_states, ctx_local, resp_local, ctx_mask, resp_mask, flags,
                                dropout_rng);
}

double score_pair(const EsimModel& m, const std::vector<int>& ctx_ids,
                  const std::vector<int>& resp_ids, const AblationFlags& flags) {
    Graph g(const_cast<ParameterStore*>(&m.params));
    Var probs = build_esim_scorer(g, m, ctx_ids, resp_ids, flags);
    return static_cast<double>(g.value(probs).at(0, 1));
}

}  // namespace seqmatch
