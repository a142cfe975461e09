#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "seqmatch/layers.hpp"

namespace seqmatch {

/// Token <-> index mapping with dense indices starting at 0. The four reserved
/// tokens always occupy the first four slots.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kEou = 2;
    static constexpr int kEot = 3;
    static constexpr const char* kPadToken = "__pad__";
    static constexpr const char* kUnkToken = "__unk__";
    static constexpr const char* kEouToken = "__eou__";
    static constexpr const char* kEotToken = "__eot__";

    Vocabulary();

    /// Inserts the token if absent; returns its index either way.
    int add(const std::string& token);
    /// Index of the token, or kUnk if unknown.
    int lookup(const std::string& token) const;
    /// Index of the token, or -1 if unknown.
    int find(const std::string& token) const;
    const std::string& token(int index) const { return tokens_[static_cast<std::size_t>(index)]; }
    int size() const { return static_cast<int>(tokens_.size()); }

    std::vector<int> encode(const std::vector<std::string>& tokens) const;

    /// One token per line, line number = index.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    std::uint64_t hash() const;

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Deterministic pseudo-random embedding row for a token absent from a
/// pretrained table: uniform in [-0.1, 0.1], seeded by a hash of the token.
std::vector<Real> handle_oov(const std::string& token, int dim, std::uint64_t salt = 0);

/// k pretrained (or randomly initialized) embedding tables over one vocabulary.
/// Rows start as hashed per-token values so behaviour is identical whether or
/// not a pretrained file later covers a token; the PAD row stays exactly zero.
struct EmbeddingSet {
    std::vector<int> tables;  // parameter indices, |V| x dims[k]
    std::vector<int> dims;
    bool trainable = true;

    static EmbeddingSet create(ParameterStore& params, const Vocabulary& vocab,
                               const std::vector<int>& dims, bool trainable);
    int total_width() const;
};

struct EmbeddingLoadStats {
    std::size_t loaded = 0;
    std::size_t skipped = 0;
};

/// Loads a word-per-line text embedding file (token followed by expected_dim
/// floats) into one table. Rows for tokens present in the vocabulary are
/// overwritten; unknown tokens are counted and skipped; the PAD row is never
/// touched.
EmbeddingLoadStats load_embedding_file(const std::string& path, int expected_dim,
                                       const Vocabulary& vocab, ParameterStore& params, int table);

/// Row t of the result is the concatenation of every table's row for ids[t].
Var lookup_concat(Graph& g, const EmbeddingSet& set, const std::vector<int>& ids);

/// Dimension-reduction layer: ReLU(x W + b), shared between context and
/// response. Trainable regardless of table freezing.
Var project(Graph& g, const FeedForward& projection, Var x);

}  // namespace seqmatch
