#pragma once

#include <string>
#include <vector>

#include "seqmatch/evalrank.hpp"

namespace seqmatch {

struct Hyperparams {
    double lr = 4e-4;
    int batch_size = 128;
    int epochs = 10;
    std::uint64_t seed = 1;
    int hidden = 300;
    int max_context_len = 300;
    int max_response_len = 30;
    double negative_ratio = 4.0;
    AblationFlags flags;
    double dropout = 0.0;
    double clip_norm = 0.0;         // 0 disables gradient clipping
    bool ctx_truncate_keep_last = true;  // false drops the last context tokens instead
};

/// -log(p_label) with p clamped at 1e-12 before the log. `probs` is a
/// probability pair [1 x 2] or {2}; callers average over the batch.
Var cross_entropy(Graph& g, Var probs, int label);

/// Bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8); moments mirror the
/// parameter shapes. Non-trainable parameters are never touched.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step_count = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    static AdamState create(const ParameterStore& params);
};

/// One update from the gradients accumulated in the store. clip_norm > 0
/// rescales the global gradient norm first.
void adam_step(AdamState& state, ParameterStore& params, double lr, double clip_norm = 0.0);

struct CheckpointHeader {
    std::string kind;  // "esim" or "siamese"
    int hidden = 0;
    int heads = 0;
    int attn_dim = 0;
    int mlp_hidden = 0;
    std::vector<int> emb_dims;
    bool emb_trainable = true;
    std::uint64_t vocab_hash = 0;
    int scalar_bytes = static_cast<int>(sizeof(Real));
};

void write_checkpoint(const std::string& path, const CheckpointHeader& header,
                      const ParameterStore& params);
CheckpointHeader read_checkpoint_header(const std::string& path);
/// Fills already-registered parameters by name; any name or shape mismatch is
/// an IncompatibleError.
void read_checkpoint_params(const std::string& path, ParameterStore& params);

void save_esim(const std::string& path, const EsimModel& m, const Vocabulary& vocab);
/// expect_hidden >= 0 additionally pins d_h; the vocabulary hash always must match.
EsimModel load_esim(const std::string& path, const Vocabulary& vocab, int expect_hidden = -1);
void save_siamese(const std::string& path, const SiameseModel& m, const Vocabulary& vocab);
SiameseModel load_siamese(const std::string& path, const Vocabulary& vocab, int expect_hidden = -1);

/// A model the generic training loop can drive: per-example probability-pair
/// subgraphs plus plain scoring for dev evaluation.
class TrainableScorer {
  public:
    virtual ~TrainableScorer() = default;
    virtual ParameterStore& params() = 0;
    virtual Var build(Graph& g, const std::vector<int>& ctx_ids, const std::vector<int>& resp_ids,
                      std::mt19937_64* dropout_rng) = 0;
    virtual double score(const std::vector<int>& ctx_ids, const std::vector<int>& resp_ids) const = 0;
    virtual void save(const std::string& path, const Vocabulary& vocab) const = 0;
};

class EsimScorer : public TrainableScorer {
  public:
    EsimScorer(EsimModel& model, AblationFlags flags) : model_(model), flags_(flags) {}
    ParameterStore& params() override { return model_.params; }
    Var build(Graph& g, const std::vector<int>& ctx, const std::vector<int>& resp,
              std::mt19937_64* dropout_rng) override {
        return build_esim_scorer(g, model_, ctx, resp, flags_, dropout_rng);
    }
    double score(const std::vector<int>& ctx, const std::vector<int>& resp) const override {
        return score_pair(model_, ctx, resp, flags_);
    }
    void save(const std::string& path, const Vocabulary& vocab) const override {
        save_esim(path, model_, vocab);
    }

  private:
    EsimModel& model_;
    AblationFlags flags_;
};

class SiameseScorer : public TrainableScorer {
  public:
    explicit SiameseScorer(SiameseModel& model) : model_(model) {}
    ParameterStore& params() override { return model_.params; }
    Var build(Graph& g, const std::vector<int>& ctx, const std::vector<int>& resp,
              std::mt19937_64*) override {
        return build_siamese_scorer(g, model_, ctx, resp);
    }
    double score(const std::vector<int>& ctx, const std::vector<int>& resp) const override {
        return siamese_score_pair(model_, ctx, resp);
    }
    void save(const std::string& path, const Vocabulary& vocab) const override {
        save_siamese(path, model_, vocab);
    }

  private:
    SiameseModel& model_;
};

struct TrainData {
    std::vector<Example> train;   // already truncated
    std::vector<PoolRecord> dev;  // may be empty
};

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0;
    MetricReport dev;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_criterion = -1;
};

/// Seeded-shuffle epochs of batched cross-entropy with Adam. After every
/// epoch the dev pools are ranked; the checkpoint with the highest
/// (R@10 + MRR)/2 is kept. checkpoint_path/log_path may be empty to skip
/// writing them.
TrainResult train(TrainableScorer& scorer, const TrainData& data, const Vocabulary& vocab,
                  const Hyperparams& hp, const std::string& checkpoint_path,
                  const std::string& log_path = "");

}  // namespace seqmatch
