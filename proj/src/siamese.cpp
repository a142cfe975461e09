#include "seqmatch/siamese.hpp"

#include <cstring>
#include <fstream>

#include "seqmatch/esim.hpp"  // strip_trailing_pad

namespace seqmatch {

SiameseModel SiameseModel::create(const Vocabulary& vocab, SiameseConfig cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SiameseModel m;
    m.cfg = cfg;
    const int h = cfg.hidden;
    m.embeddings = EmbeddingSet::create(m.params, vocab, cfg.emb_dims, cfg.emb_trainable);
    m.projection = FeedForward::create(m.params, "proj", m.embeddings.total_width(), h, h, rng);
    m.encoder = BiLstm::create(m.params, "enc", h, h, rng);
    m.attn_w1 = m.params.add("attn.W1", uniform_init({cfg.attn_dim, 2 * h}, h, rng));
    m.attn_b1 = m.params.add("attn.b1", Tensor({cfg.attn_dim}));
    m.attn_w2 = m.params.add("attn.W2", uniform_init({cfg.heads, cfg.attn_dim}, h, rng));
    m.attn_b2 = m.params.add("attn.b2", Tensor({cfg.heads}));
    const int flat = m.sentence_vector_size();
    m.mlp1 = FeedForward::create(m.params, "mlp.h1", 4 * flat, cfg.mlp_hidden, h, rng);
    m.mlp2 = FeedForward::create(m.params, "mlp.h2", cfg.mlp_hidden, cfg.mlp_hidden, h, rng);
    m.mlp_out = FeedForward::create(m.params, "mlp.out", cfg.mlp_hidden, 2, h, rng);
    return m;
}

Var self_attention(Graph& g, const SiameseModel& m, Var hidden_states, const Mask& mask) {
    const Tensor& h = g.value(hidden_states);
    if (h.ndim() != 2 || h.cols() != 2 * m.cfg.hidden) {
        throw DimensionError("self_attention: expected [T x 2H] states, got " + shape_str(h.shape));
    }
    if (mask.size() != h.rows()) throw DimensionError("self_attention: mask length mismatch");
    // Computed in transposed form: ReLU(H W1^T + b1) W2^T + b2 is [T x d_m].
    Var scores = g.add(g.matmul(hidden_states, g.transpose(g.param(m.attn_w1))), g.param(m.attn_b1));
    scores = g.add(g.matmul(g.relu(scores), g.transpose(g.param(m.attn_w2))), g.param(m.attn_b2));
    return g.masked_softmax(scores, mask, 0);
}

Var attentive_pool(Graph& g, Var attention, Var hidden_states) {
    const Tensor& a = g.value(attention);
    const Tensor& h = g.value(hidden_states);
    if (a.ndim() != 2 || h.ndim() != 2 || a.rows() != h.rows()) {
        throw DimensionError("attentive_pool: shapes " + shape_str(a.shape) + " and " +
                             shape_str(h.shape) + " do not share T");
    }
    Var pooled = g.matmul(g.transpose(attention), hidden_states);  // [d_m x 2H]
    return g.reshape(pooled, {a.cols() * h.cols()});
}

Var encode_sentence(Graph& g, const SiameseModel& m, const std::vector<int>& ids) {
    const std::vector<int> real = strip_trailing_pad(ids);
    const Mask mask = Mask::ones(static_cast<int>(real.size()));
    Var enc = project(g, m.projection, lookup_concat(g, m.embeddings, real));
    Var states = bilstm_encode(g, m.encoder, enc, mask);
    Var attn = self_attention(g, m, states, mask);
    return attentive_pool(g, attn, states);
}

Var pair_classify_graph(Graph& g, const SiameseModel& m, Var v_ctx, Var v_resp) {
    const Tensor& a = g.value(v_ctx);
    const Tensor& b = g.value(v_resp);
    if (!a.same_shape(b)) {
        throw DimensionError("pair_classify: vector lengths differ: " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
    }
    Var feats = g.concat({v_ctx, v_resp, g.abs(g.sub(v_ctx, v_resp)), g.mul(v_ctx, v_resp)}, 0);
    Var x = g.reshape(feats, {1, static_cast<int>(g.value(feats).numel())});

    auto hidden_layer = [&](const FeedForward& ff, Var in) {
        Var out = affine_relu(g, ff, in);
        if (g.value(in).same_shape(g.value(out))) out = g.add(out, in);  // shortcut
        return out;
    };
    Var h1 = hidden_layer(m.mlp1, x);
    Var h2 = hidden_layer(m.mlp2, h1);
    Var logits = affine(g, m.mlp_out, h2);
    return g.masked_softmax(logits, Mask::ones(2), 1);
}

Var build_siamese_scorer(Graph& g, const SiameseModel& m, const std::vector<int>& ctx_ids,
                         const std::vector<int>& resp_ids) {
    Var v_ctx = encode_sentence(g, m, ctx_ids);
    Var v_resp = encode_sentence(g, m, resp_ids);
    return pair_classify_graph(g, m, v_ctx, v_resp);
}

double pair_classify(const SiameseModel& m, const std::vector<Real>& v_ctx,
                     const std::vector<Real>& v_resp) {
    Graph g(const_cast<ParameterStore*>(&m.params));
    Var a = g.input(Tensor({static_cast<int>(v_ctx.size())}, v_ctx));
    Var b = g.input(Tensor({static_cast<int>(v_resp.size())}, v_resp));
    Var probs = pair_classify_graph(g, m, a, b);
    return static_cast<double>(g.value(probs).at(0, 1));
}

double siamese_score_pair(const SiameseModel& m, const std::vector<int>& ctx_ids,
                          const std::vector<int>& resp_ids) {
    Graph g(const_cast<ParameterStore*>(&m.params));
    Var probs = build_siamese_scorer(g, m, ctx_ids, resp_ids);
    return static_cast<double>(g.value(probs).at(0, 1));
}

std::vector<float> encode_sentence_values(const SiameseModel& m, const std::vector<int>& ids) {
    Graph g(const_cast<ParameterStore*>(&m.params));
    Var v = encode_sentence(g, m, ids);
    const Tensor& t = g.value(v);
    std::vector<float> out(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) out[i] = static_cast<float>(t.data[i]);
    return out;
}

const EncodedSentence* EncodedCorpus::find(const std::string& id) const {
    if (index_.size() != items.size()) {
        index_.clear();
        for (std::size_t i = 0; i < items.size(); ++i) index_[items[i].id] = static_cast<int>(i);
    }
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &items[static_cast<std::size_t>(it->second)];
}

namespace {

constexpr char kCacheMagic[4] = {'S', 'M', 'E', 'C'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IncompatibleError("truncated encoding cache");
    return v;
}

}  // namespace

void EncodedCorpus::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write encoding cache: " + path);
    out.write(kCacheMagic, 4);
    write_raw<std::uint32_t>(out, 1u);
    write_raw<std::int32_t>(out, hidden);
    write_raw<std::int32_t>(out, heads);
    write_raw<std::uint64_t>(out, static_cast<std::uint64_t>(items.size()));
    write_raw<std::uint64_t>(out, params_checksum);
    for (const auto& item : items) {
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(item.id.size()));
        out.write(item.id.data(), static_cast<std::streamsize>(item.id.size()));
    }
    const std::size_t stride = static_cast<std::size_t>(2 * hidden * heads);
    for (const auto& item : items) {
        if (item.v.size() != stride) throw IncompatibleError("encoding cache record has wrong stride");
        out.write(reinterpret_cast<const char*>(item.v.data()),
                  static_cast<std::streamsize>(stride * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

EncodedCorpus EncodedCorpus::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read encoding cache: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0) {
        throw IncompatibleError("not an encoding cache file: " + path);
    }
    const auto version = read_raw<std::uint32_t>(in);
    if (version != 1u) throw IncompatibleError("unsupported encoding cache version");
    EncodedCorpus c;
    c.hidden = read_raw<std::int32_t>(in);
    c.heads = read_raw<std::int32_t>(in);
    const auto count = read_raw<std::uint64_t>(in);
    c.params_checksum = read_raw<std::uint64_t>(in);
    c.items.resize(count);
    for (auto& item : c.items) {
        const auto len = read_raw<std::uint32_t>(in);
        item.id.resize(len);
        in.read(item.id.data(), len);
        if (!in) throw IncompatibleError("truncated encoding cache");
    }
    const std::size_t stride = static_cast<std::size_t>(2 * c.hidden * c.heads);
    for (auto& item : c.items) {
        item.v.resize(stride);
        in.read(reinterpret_cast<char*>(item.v.data()),
                static_cast<std::streamsize>(stride * sizeof(float)));
        if (!in) throw IncompatibleError("truncated encoding cache");
    }
    return c;
}

EncodedCorpus encode_corpus(const SiameseModel& m,
                            const std::vector<std::pair<std::string, std::vector<int>>>& sentences) {
    EncodedCorpus c;
    c.hidden = m.cfg.hidden;
    c.heads = m.cfg.heads;
    c.params_checksum = m.params.checksum();
    c.items.reserve(sentences.size());
    for (const auto& [id, ids] : sentences) {
        c.items.push_back({id, encode_sentence_values(m, ids)});
    }
    return c;
}

}  // namespace seqmatch
