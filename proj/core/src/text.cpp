#include "deltak/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "deltak/error.hpp"
#include "deltak/rng.hpp"

namespace deltak {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        const unsigned char u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

std::uint32_t word_id(const std::string& word) {
    return 1 + static_cast<std::uint32_t>(fnv1a(word) % (kVocabSize - 1));
}

std::vector<int> sorted_union(const std::vector<ConceptSpan>& spans) {
    std::set<int> s;
    for (const auto& span : spans) s.insert(span.indices.begin(), span.indices.end());
    return {s.begin(), s.end()};
}

}  // namespace

std::vector<int> ConceptPartition::present_indices() const { return sorted_union(present); }
std::vector<int> ConceptPartition::missing_indices() const { return sorted_union(missing); }

TokenSeq tokenize(const std::string& prompt) {
    TokenSeq seq;
    for (const auto& word : split_words(prompt)) {
        seq.ids.push_back(word_id(word));
        seq.surface.push_back(word);
    }
    if (seq.ids.empty()) throw InputError("tokenize: prompt has no tokens");
    return seq;
}

EmbeddingSeq embed(const TokenSeq& seq, std::uint64_t seed, std::size_t d_model) {
    if (d_model < 1) throw DimensionError("embed: d_model must be >= 1");
    EmbeddingSeq out;
    out.seed = seed;
    out.matrix = DenseMatrix(seq.size(), d_model);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(d_model));
    for (std::size_t i = 0; i < seq.size(); ++i) {
        // row is a pure function of (token id, seed): same id, same row
        SplitMix64 stream(mix_seed(seed, kTagEmbed, seq.ids[i]));
        for (std::size_t j = 0; j < d_model; ++j) out.matrix(i, j) = sigma * stream.next_gaussian();
    }
    return out;
}

TokenSeq mask_prompt(const TokenSeq& seq, const ConceptPartition& partition) {
    TokenSeq out = seq;
    for (const auto& span : partition.missing) {
        for (int idx : span.indices) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= seq.size())
                throw InputError("mask_prompt: missing index out of range");
            out.ids[static_cast<std::size_t>(idx)] = kMaskTokenId;
            out.surface[static_cast<std::size_t>(idx)] = "[MASK]";
        }
    }
    return out;
}

std::vector<int> concept_token_indices(const TokenSeq& seq, const std::string& phrase) {
    const auto words = split_words(phrase);
    if (words.empty()) return {};
    std::vector<std::uint32_t> needle;
    needle.reserve(words.size());
    for (const auto& w : words) needle.push_back(word_id(w));

    std::set<int> hits;
    if (needle.size() > seq.size()) return {};
    for (std::size_t start = 0; start + needle.size() <= seq.size(); ++start) {
        bool match = true;
        for (std::size_t k = 0; k < needle.size(); ++k) {
            if (seq.ids[start + k] != needle[k]) {
                match = false;
                break;
            }
        }
        if (match) {
            for (std::size_t k = 0; k < needle.size(); ++k)
                hits.insert(static_cast<int>(start + k));
        }
    }
    return {hits.begin(), hits.end()};
}

}  // namespace deltak
