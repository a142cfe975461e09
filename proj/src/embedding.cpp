#include "seqmatch/embedding.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace seqmatch {

Vocabulary::Vocabulary() {
    add(kPadToken);
    add(kUnkToken);
    add(kEouToken);
    add(kEotToken);
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int idx = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_[token] = idx;
    return idx;
}

int Vocabulary::lookup(const std::string& token) const {
    int idx = find(token);
    return idx < 0 ? kUnk : idx;
}

int Vocabulary::find(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    return ids;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no <= 4) {
            if (line != vocab.token(static_cast<int>(line_no) - 1)) {
                throw ParseError("vocabulary file missing reserved token '" +
                                     vocab.token(static_cast<int>(line_no) - 1) + "'",
                                 line_no);
            }
            continue;
        }
        if (line.empty()) throw ParseError("empty vocabulary entry", line_no);
        if (vocab.find(line) >= 0) throw ParseError("duplicate vocabulary entry '" + line + "'", line_no);
        vocab.add(line);
    }
    if (line_no < 4) throw ParseError("vocabulary file truncated", line_no);
    return vocab;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : tokens_) {
        h = fnv1a_str(t, h);
        h = fnv1a("\n", 1, h);
    }
    return h;
}

std::vector<Real> handle_oov(const std::string& token, int dim, std::uint64_t salt) {
    std::mt19937_64 rng(fnv1a_str(token) ^ (salt * 0x9e3779b97f4a7c15ull + 1));
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    std::vector<Real> row(static_cast<std::size_t>(dim));
    for (auto& v : row) v = static_cast<Real>(u(rng));
    return row;
}

EmbeddingSet EmbeddingSet::create(ParameterStore& params, const Vocabulary& vocab,
                                  const std::vector<int>& dims, bool trainable) {
    if (dims.empty()) throw PreconditionError("embedding set needs at least one table");
    EmbeddingSet set;
    set.dims = dims;
    set.trainable = trainable;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        const int d = dims[k];
        if (d <= 0) throw PreconditionError("embedding dimension must be positive");
        Tensor table({vocab.size(), d});
        for (int i = 0; i < vocab.size(); ++i) {
            if (i == Vocabulary::kPad) continue;  // PAD row stays zero
            auto row = handle_oov(vocab.token(i), d, k);
            for (int j = 0; j < d; ++j) table.at(i, j) = row[static_cast<std::size_t>(j)];
        }
        set.tables.push_back(params.add("emb." + std::to_string(k), std::move(table), trainable));
    }
    return set;
}

int EmbeddingSet::total_width() const {
    int w = 0;
    for (int d : dims) w += d;
    return w;
}

EmbeddingLoadStats load_embedding_file(const std::string& path, int expected_dim,
                                       const Vocabulary& vocab, ParameterStore& params, int table) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read embedding file: " + path);
    Tensor& tab = params.at(table).value;
    if (tab.cols() != expected_dim) {
        throw DimensionError("embedding table width " + std::to_string(tab.cols()) +
                             " does not match expected_dim " + std::to_string(expected_dim));
    }

    EmbeddingLoadStats stats;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string token;
        ss >> token;
        std::vector<Real> values;
        double v;
        while (ss >> v) values.push_back(static_cast<Real>(v));
        if (!ss.eof()) throw ParseError("malformed embedding value", line_no);
        if (static_cast<int>(values.size()) != expected_dim) {
            throw ParseError("expected " + std::to_string(expected_dim) + " values, got " +
                                 std::to_string(values.size()),
                             line_no);
        }
        const int idx = vocab.find(token);
        if (idx < 0 || idx == Vocabulary::kPad) {
            ++stats.skipped;
            continue;
        }
        for (int j = 0; j < expected_dim; ++j) tab.at(idx, j) = values[static_cast<std::size_t>(j)];
        ++stats.loaded;
    }
    if (line_no == 0) throw ParseError("empty embedding file: " + path, 0);
    return stats;
}

Var lookup_concat(Graph& g, const EmbeddingSet& set, const std::vector<int>& ids) {
    std::vector<Var> parts;
    parts.reserve(set.tables.size());
    for (int table : set.tables) parts.push_back(g.rows(g.param(table), ids));
    return g.concat(parts, 1);
}

Var project(Graph& g, const FeedForward& projection, Var x) {
    return affine_relu(g, projection, x);
}

}  // namespace seqmatch
