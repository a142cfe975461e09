#include "seqmatch/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

namespace seqmatch {

namespace {

using nlohmann::json;

std::string id_field(const json& j, const char* field, std::size_t line_no) {
    if (!j.contains(field)) throw ParseError(std::string("missing field '") + field + "'", line_no);
    const json& v = j.at(field);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ParseError(std::string("field '") + field + "' must be a string or integer", line_no);
}

std::vector<std::string> tokens_field(const json& j, std::size_t line_no) {
    if (!j.contains("tokens") || !j.at("tokens").is_array()) {
        throw ParseError("missing token list", line_no);
    }
    std::vector<std::string> tokens;
    for (const auto& t : j.at("tokens")) {
        if (!t.is_string()) throw ParseError("tokens must be strings", line_no);
        tokens.push_back(t.get<std::string>());
    }
    if (tokens.empty()) throw ParseError("empty token list", line_no);
    return tokens;
}

std::vector<Utterance> utterances_field(const json& j, const char* field, std::size_t line_no) {
    if (!j.contains(field) || !j.at(field).is_array()) {
        throw ParseError(std::string("missing field '") + field + "'", line_no);
    }
    std::vector<Utterance> utterances;
    for (const auto& u : j.at(field)) {
        if (!u.is_object() || !u.contains("speaker")) {
            throw ParseError("utterance must be an object with 'speaker' and 'tokens'", line_no);
        }
        Utterance utt;
        utt.speaker = u.at("speaker").is_string() ? u.at("speaker").get<std::string>()
                                                  : u.at("speaker").dump();
        utt.tokens = tokens_field(u, line_no);
        utterances.push_back(std::move(utt));
    }
    return utterances;
}

template <typename Fn>
void for_each_json_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
        }
        fn(j, line_no);
    }
}

}  // namespace

std::vector<Dialogue> ingest_dialogues(const std::string& path) {
    std::vector<Dialogue> dialogues;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        Dialogue d;
        d.id = id_field(j, "id", line_no);
        d.utterances = utterances_field(j, "utterances", line_no);
        if (d.utterances.empty()) throw ParseError("dialogue has no utterances", line_no);
        dialogues.push_back(std::move(d));
    });
    return dialogues;
}

std::vector<PoolRecord> ingest_pools(const std::string& path) {
    std::vector<PoolRecord> pools;
    for_each_json_line(path, [&](const json& j, std::size_t line_no) {
        PoolRecord rec;
        rec.id = id_field(j, "id", line_no);
        rec.context = utterances_field(j, "context", line_no);
        if (rec.context.empty()) throw ParseError("pool record has an empty context", line_no);
        if (!j.contains("candidates") || !j.at("candidates").is_array() || j.at("candidates").empty()) {
            throw ParseError("pool record needs a non-empty candidate list", line_no);
        }
        std::set<std::string> seen;
        for (const auto& c : j.at("candidates")) {
            Candidate cand;
            cand.id = id_field(c, "id", line_no);
            cand.tokens = tokens_field(c, line_no);
            if (!seen.insert(cand.id).second) {
                throw ParseError("duplicate candidate id '" + cand.id + "'", line_no);
            }
            rec.candidates.push_back(std::move(cand));
        }
        if (!j.contains("gold_ids") || !j.at("gold_ids").is_array()) {
            throw ParseError("missing field 'gold_ids'", line_no);
        }
        for (const auto& gid : j.at("gold_ids")) {
            rec.gold_ids.push_back(gid.is_string() ? gid.get<std::string>()
                                                   : std::to_string(gid.get<std::int64_t>()));
        }
        pools.push_back(std::move(rec));
    });
    return pools;
}

std::vector<std::string> serialize_context(const std::vector<Utterance>& utterances) {
    if (utterances.empty()) throw PreconditionError("serialize_context: no utterances");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < utterances.size(); ++i) {
        const Utterance& u = utterances[i];
        out.insert(out.end(), u.tokens.begin(), u.tokens.end());
        out.push_back(Vocabulary::kEouToken);
        const bool turn_ends = i + 1 == utterances.size() || utterances[i + 1].speaker != u.speaker;
        if (turn_ends) out.push_back(Vocabulary::kEotToken);
    }
    return out;
}

std::vector<Example> augment(const Dialogue& dialogue) {
    if (dialogue.utterances.size() < 2) {
        throw PreconditionError("augment: dialogue needs at least 2 utterances");
    }
    std::vector<Example> examples;
    for (std::size_t t = 1; t < dialogue.utterances.size(); ++t) {
        Example ex;
        ex.context = serialize_context(
            std::vector<Utterance>(dialogue.utterances.begin(),
                                   dialogue.utterances.begin() + static_cast<std::ptrdiff_t>(t)));
        ex.response = dialogue.utterances[t].tokens;
        ex.label = 1;
        ex.dialogue_id = dialogue.id;
        ex.turn = static_cast<int>(t) + 1;
        examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<Example> sample_negatives(const std::vector<Example>& positives,
                                      const std::vector<std::vector<std::string>>& pool,
                                      double ratio, std::uint64_t seed) {
    if (ratio < 1.0) throw PreconditionError("sample_negatives: ratio must be >= 1");
    const int base = static_cast<int>(std::floor(ratio));
    const double frac = ratio - base;
    if (static_cast<double>(pool.size()) < ratio) {
        throw PreconditionError("sample_negatives: pool of " + std::to_string(pool.size()) +
                                " responses is too small for ratio " + std::to_string(ratio));
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Example> out;
    for (const Example& pos : positives) {
        out.push_back(pos);
        int want = base;
        if (frac > 0 && coin(rng) < frac) ++want;

        std::vector<int> eligible;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (pool[i] != pos.response) eligible.push_back(static_cast<int>(i));
        }
        if (static_cast<int>(eligible.size()) < want) {
            throw PreconditionError("sample_negatives: only " + std::to_string(eligible.size()) +
                                    " distinct negatives available, need " + std::to_string(want));
        }
        // partial Fisher-Yates: first `want` entries become the sample
        for (int k = 0; k < want; ++k) {
            std::uniform_int_distribution<int> pick(k, static_cast<int>(eligible.size()) - 1);
            std::swap(eligible[static_cast<std::size_t>(k)], eligible[static_cast<std::size_t>(pick(rng))]);
            Example neg;
            neg.context = pos.context;
            neg.response = pool[static_cast<std::size_t>(eligible[static_cast<std::size_t>(k)])];
            neg.label = 0;
            neg.dialogue_id = pos.dialogue_id;
            neg.turn = pos.turn;
            out.push_back(std::move(neg));
        }
    }
    return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> truncate(
    std::vector<std::string> context, std::vector<std::string> response, int max_c, int max_r) {
    return truncate_directional(std::move(context), std::move(response), max_c, max_r, true);
}

std::pair<std::vector<std::string>, std::vector<std::string>> truncate_directional(
    std::vector<std::string> context, std::vector<std::string> response, int max_c, int max_r,
    bool ctx_keep_last) {
    if (max_c < 1 || max_r < 1) throw PreconditionError("truncate: limits must be >= 1");
    if (static_cast<int>(context.size()) > max_c) {
        if (ctx_keep_last) {
            context.erase(context.begin(),
                          context.end() - static_cast<std::ptrdiff_t>(max_c));
        } else {
            context.resize(static_cast<std::size_t>(max_c));
        }
    }
    if (static_cast<int>(response.size()) > max_r) {
        response.resize(static_cast<std::size_t>(max_r));
    }
    return {std::move(context), std::move(response)};
}

std::vector<Batch> batchify(const std::vector<Example>& examples, int batch_size,
                            const Vocabulary& vocab) {
    if (batch_size < 1) throw PreconditionError("batchify: batch size must be >= 1");
    std::vector<Batch> batches;
    for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(examples.size(), start + static_cast<std::size_t>(batch_size));
        Batch b;
        std::size_t max_c = 0, max_r = 0;
        for (std::size_t i = start; i < end; ++i) {
            if (examples[i].context.empty() || examples[i].response.empty()) {
                throw PreconditionError("batchify: example with an empty sequence");
            }
            max_c = std::max(max_c, examples[i].context.size());
            max_r = std::max(max_r, examples[i].response.size());
        }
        for (std::size_t i = start; i < end; ++i) {
            const Example& ex = examples[i];
            auto pad_row = [&](const std::vector<std::string>& tokens, std::size_t width,
                               std::vector<std::vector<int>>& ids_out, std::vector<Mask>& mask_out) {
                std::vector<int> ids = vocab.encode(tokens);
                std::vector<Real> mask(width, Real(0));
                for (std::size_t t = 0; t < ids.size(); ++t) mask[t] = Real(1);
                ids.resize(width, Vocabulary::kPad);
                ids_out.push_back(std::move(ids));
                mask_out.push_back(Mask(std::move(mask)));
            };
            pad_row(ex.context, max_c, b.context_ids, b.context_mask);
            pad_row(ex.response, max_r, b.response_ids, b.response_mask);
            b.labels.push_back(ex.label);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

}  // namespace seqmatch
