#include "seqmatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace seqmatch {

Var cross_entropy(Graph& g, Var probs, int label) {
    const Tensor& p = g.value(probs);
    if (p.numel() != 2) throw DimensionError("cross_entropy: expected a probability pair");
    if (label != 0 && label != 1) throw PreconditionError("cross_entropy: label must be 0 or 1");
    const Real total = p.data[0] + p.data[1];
    if (std::fabs(total - Real(1)) > Real(1e-6)) {
        throw PreconditionError("cross_entropy: probabilities must sum to 1");
    }
    Var picked = g.slice(probs, p.ndim() == 2 ? 1 : 0, label, 1);
    return g.scalar_mul(g.sum(g.log(picked, Real(1e-12))), Real(-1));
}

AdamState AdamState::create(const ParameterStore& params) {
    AdamState s;
    for (int i = 0; i < params.size(); ++i) {
        s.m.push_back(Tensor::zeros(params.at(i).value.shape));
        s.v.push_back(Tensor::zeros(params.at(i).value.shape));
    }
    return s;
}

void adam_step(AdamState& state, ParameterStore& params, double lr, double clip_norm) {
    if (static_cast<int>(state.m.size()) != params.size()) {
        throw DimensionError("adam_step: state does not match the parameter store");
    }
    double scale = 1.0;
    if (clip_norm > 0) {
        double sq = 0;
        for (int i = 0; i < params.size(); ++i) {
            if (!params.at(i).trainable) continue;
            for (Real gv : params.at(i).grad.data) sq += static_cast<double>(gv) * static_cast<double>(gv);
        }
        const double norm = std::sqrt(sq);
        if (norm > clip_norm) scale = clip_norm / norm;
    }

    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (int i = 0; i < params.size(); ++i) {
        auto& entry = params.at(i);
        if (!entry.trainable) continue;
        if (!entry.grad.same_shape(state.m[static_cast<std::size_t>(i)])) {
            throw DimensionError("adam_step: gradient shape mismatch for " + entry.name);
        }
        Tensor& m = state.m[static_cast<std::size_t>(i)];
        Tensor& v = state.v[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < entry.value.numel(); ++j) {
            const double gj = static_cast<double>(entry.grad.data[j]) * scale;
            const double mj = state.beta1 * static_cast<double>(m.data[j]) + (1.0 - state.beta1) * gj;
            const double vj = state.beta2 * static_cast<double>(v.data[j]) + (1.0 - state.beta2) * gj * gj;
            m.data[j] = static_cast<Real>(mj);
            v.data[j] = static_cast<Real>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            entry.value.data[j] -= static_cast<Real>(lr * m_hat / (std::sqrt(v_hat) + state.eps));
        }
    }
}

namespace {

constexpr char kCheckpointMagic[4] = {'S', 'M', 'C', 'K'};

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IncompatibleError("truncated checkpoint");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_raw<std::uint32_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw IncompatibleError("truncated checkpoint");
    return s;
}

void write_header(std::ostream& out, const CheckpointHeader& h) {
    out.write(kCheckpointMagic, 4);
    write_raw<std::uint32_t>(out, 1u);
    write_string(out, h.kind);
    write_raw<std::int32_t>(out, h.hidden);
    write_raw<std::int32_t>(out, h.heads);
    write_raw<std::int32_t>(out, h.attn_dim);
    write_raw<std::int32_t>(out, h.mlp_hidden);
    write_raw<std::uint8_t>(out, h.emb_trainable ? 1 : 0);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(h.emb_dims.size()));
    for (int d : h.emb_dims) write_raw<std::int32_t>(out, d);
    write_raw<std::uint64_t>(out, h.vocab_hash);
    write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(h.scalar_bytes));
}

CheckpointHeader read_header(std::istream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw IncompatibleError("not a checkpoint file: " + path);
    }
    const auto version = read_raw<std::uint32_t>(in);
    if (version != 1u) throw IncompatibleError("unsupported checkpoint version");
    CheckpointHeader h;
    h.kind = read_string(in);
    h.hidden = read_raw<std::int32_t>(in);
    h.heads = read_raw<std::int32_t>(in);
    h.attn_dim = read_raw<std::int32_t>(in);
    h.mlp_hidden = read_raw<std::int32_t>(in);
    h.emb_trainable = read_raw<std::uint8_t>(in) != 0;
    const auto n_dims = read_raw<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n_dims; ++i) h.emb_dims.push_back(read_raw<std::int32_t>(in));
    h.vocab_hash = read_raw<std::uint64_t>(in);
    h.scalar_bytes = read_raw<std::uint8_t>(in);
    if (h.scalar_bytes != 4 && h.scalar_bytes != 8) {
        throw IncompatibleError("checkpoint has unsupported scalar width");
    }
    return h;
}

}  // namespace

void write_checkpoint(const std::string& path, const CheckpointHeader& header,
                      const ParameterStore& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    write_header(out, header);
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
        const auto& entry = params.at(i);
        write_string(out, entry.name);
        write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(entry.value.shape.size()));
        for (int d : entry.value.shape) write_raw<std::int32_t>(out, d);
        if (header.scalar_bytes == static_cast<int>(sizeof(Real))) {
            out.write(reinterpret_cast<const char*>(entry.value.data.data()),
                      static_cast<std::streamsize>(entry.value.numel() * sizeof(Real)));
        } else {
            for (Real v : entry.value.data) write_raw<float>(out, static_cast<float>(v));
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    return read_header(in, path);
}

void read_checkpoint_params(const std::string& path, ParameterStore& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    const CheckpointHeader h = read_header(in, path);
    const auto count = read_raw<std::uint32_t>(in);
    if (static_cast<int>(count) != params.size()) {
        throw IncompatibleError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                                std::to_string(params.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = read_string(in);
        const int idx = params.find(name);
        if (idx < 0) throw IncompatibleError("checkpoint parameter '" + name + "' is unknown");
        auto& entry = params.at(idx);
        const auto ndim = read_raw<std::uint32_t>(in);
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(read_raw<std::int32_t>(in));
        if (shape != entry.value.shape) {
            throw IncompatibleError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                                    ", model expects " + shape_str(entry.value.shape));
        }
        if (h.scalar_bytes == static_cast<int>(sizeof(Real))) {
            in.read(reinterpret_cast<char*>(entry.value.data.data()),
                    static_cast<std::streamsize>(entry.value.numel() * sizeof(Real)));
            if (!in) throw IncompatibleError("truncated checkpoint");
        } else {
            for (auto& v : entry.value.data) v = static_cast<Real>(read_raw<float>(in));
        }
    }
}

namespace {

CheckpointHeader esim_header(const EsimModel& m, const Vocabulary& vocab) {
    CheckpointHeader h;
    h.kind = "esim";
    h.hidden = m.cfg.hidden;
    h.emb_dims = m.cfg.emb_dims;
    h.emb_trainable = m.cfg.emb_trainable;
    h.vocab_hash = vocab.hash();
    return h;
}

CheckpointHeader siamese_header(const SiameseModel& m, const Vocabulary& vocab) {
    CheckpointHeader h;
    h.kind = "siamese";
    h.hidden = m.cfg.hidden;
    h.heads = m.cfg.heads;
    h.attn_dim = m.cfg.attn_dim;
    h.mlp_hidden = m.cfg.mlp_hidden;
    h.emb_dims = m.cfg.emb_dims;
    h.emb_trainable = m.cfg.emb_trainable;
    h.vocab_hash = vocab.hash();
    return h;
}

void validate_header(const CheckpointHeader& h, const std::string& kind, const Vocabulary& vocab,
                     int expect_hidden) {
    if (h.kind != kind) {
        throw IncompatibleError("checkpoint is a '" + h.kind + "' model, expected '" + kind + "'");
    }
    if (h.vocab_hash != vocab.hash()) {
        throw IncompatibleError("checkpoint vocabulary hash does not match the provided vocabulary");
    }
    if (expect_hidden >= 0 && h.hidden != expect_hidden) {
        throw IncompatibleError("checkpoint hidden size " + std::to_string(h.hidden) +
                                " does not match expected " + std::to_string(expect_hidden));
    }
}

}  // namespace

void save_esim(const std::string& path, const EsimModel& m, const Vocabulary& vocab) {
    write_checkpoint(path, esim_header(m, vocab), m.params);
}

EsimModel load_esim(const std::string& path, const Vocabulary& vocab, int expect_hidden) {
    const CheckpointHeader h = read_checkpoint_header(path);
    validate_header(h, "esim", vocab, expect_hidden);
    EsimConfig cfg;
    cfg.hidden = h.hidden;
    cfg.emb_dims = h.emb_dims;
    cfg.emb_trainable = h.emb_trainable;
    EsimModel m = EsimModel::create(vocab, cfg, 0);
    read_checkpoint_params(path, m.params);
    return m;
}

void save_siamese(const std::string& path, const SiameseModel& m, const Vocabulary& vocab) {
    write_checkpoint(path, siamese_header(m, vocab), m.params);
}

SiameseModel load_siamese(const std::string& path, const Vocabulary& vocab, int expect_hidden) {
    const CheckpointHeader h = read_checkpoint_header(path);
    validate_header(h, "siamese", vocab, expect_hidden);
    SiameseConfig cfg;
    cfg.hidden = h.hidden;
    cfg.heads = h.heads;
    cfg.attn_dim = h.attn_dim;
    cfg.mlp_hidden = h.mlp_hidden;
    cfg.emb_dims = h.emb_dims;
    cfg.emb_trainable = h.emb_trainable;
    SiameseModel m = SiameseModel::create(vocab, cfg, 0);
    read_checkpoint_params(path, m.params);
    return m;
}

TrainResult train(TrainableScorer& scorer, const TrainData& data, const Vocabulary& vocab,
                  const Hyperparams& hp, const std::string& checkpoint_path,
                  const std::string& log_path) {
    if (data.train.empty()) throw PreconditionError("train: dataset is empty");

    ParameterStore& params = scorer.params();
    AdamState adam = AdamState::create(params);
    std::mt19937_64 dropout_rng(hp.seed ^ 0x5d7001ull);

    CandidateScorer dev_scorer = [&](const std::vector<Utterance>& context, const Candidate& cand) {
        auto [ctx, resp] = truncate_directional(serialize_context(context), cand.tokens,
                                                hp.max_context_len, hp.max_response_len,
                                                hp.ctx_truncate_keep_last);
        return scorer.score(vocab.encode(ctx), vocab.encode(resp));
    };

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::binary);
        if (!log) throw std::runtime_error("cannot write training log: " + log_path);
    }

    TrainResult result;
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        std::mt19937_64 shuffle_rng(hp.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        std::vector<Example> shuffled;
        shuffled.reserve(order.size());
        for (std::size_t idx : order) shuffled.push_back(data.train[idx]);

        double loss_sum = 0;
        std::size_t loss_count = 0;
        for (const Batch& batch : batchify(shuffled, hp.batch_size, vocab)) {
            params.zero_grads();
            Graph g(&params);
            std::vector<Var> losses;
            for (int i = 0; i < batch.size(); ++i) {
                Var probs = scorer.build(g, batch.context_ids[static_cast<std::size_t>(i)],
                                         batch.response_ids[static_cast<std::size_t>(i)],
                                         hp.dropout > 0 ? &dropout_rng : nullptr);
                losses.push_back(cross_entropy(g, probs, batch.labels[static_cast<std::size_t>(i)]));
            }
            Var batch_loss = g.average(losses);
            g.backward(batch_loss);
            adam_step(adam, params, hp.lr, hp.clip_norm);
            loss_sum += static_cast<double>(g.value(batch_loss).data[0]) * batch.size();
            loss_count += static_cast<std::size_t>(batch.size());
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.mean_loss = loss_sum / static_cast<double>(loss_count);
        if (!data.dev.empty()) entry.dev = compute_metrics(rank_pools(data.dev, dev_scorer));
        result.log.push_back(entry);

        if (log.is_open()) {
            nlohmann::json j;
            j["epoch"] = entry.epoch;
            j["mean_loss"] = entry.mean_loss;
            j["recall_at_1"] = entry.dev.recall_at_1;
            j["recall_at_10"] = entry.dev.recall_at_10;
            j["recall_at_50"] = entry.dev.recall_at_50;
            j["mrr"] = entry.dev.mrr;
            j["criterion"] = entry.dev.criterion;
            log << j.dump() << "\n";
            log.flush();
        }

        if (!data.dev.empty() && entry.dev.criterion > result.best_criterion) {
            result.best_criterion = entry.dev.criterion;
            result.best_epoch = epoch;
            if (!checkpoint_path.empty()) scorer.save(checkpoint_path, vocab);
        }
    }
    // with no dev set there is nothing to select on; keep the final weights
    if (data.dev.empty()) {
        result.best_epoch = hp.epochs;
        result.best_criterion = 0;
        if (!checkpoint_path.empty()) scorer.save(checkpoint_path, vocab);
    }
    return result;
}

}  // namespace seqmatch
