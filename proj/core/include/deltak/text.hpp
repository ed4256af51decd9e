#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltak/matrix.hpp"

namespace deltak {

inline constexpr std::uint32_t kVocabSize = 32768;
inline constexpr std::uint32_t kMaskTokenId = 0;  // reserved; never produced by tokenize

/// Lowercased word sequence with ids from a stable hash. Position-aligned
/// surface strings are kept so concept strings can be resolved back to
/// token positions.
struct TokenSeq {
    std::vector<std::uint32_t> ids;
    std::vector<std::string> surface;

    std::size_t size() const { return ids.size(); }
};

struct EmbeddingSeq {
    DenseMatrix matrix;  // sequence-length x d_model
    std::uint64_t seed = 0;
};

/// One named concept resolved to the token positions it occupies (0-based).
struct ConceptSpan {
    std::string phrase;
    std::vector<int> indices;
};

/// The present/missing split. Index sets are disjoint across the two lists.
struct ConceptPartition {
    std::vector<ConceptSpan> present;
    std::vector<ConceptSpan> missing;

    std::vector<int> present_indices() const;  // sorted union
    std::vector<int> missing_indices() const;  // sorted union
};

/// Whitespace/punctuation split, case-folded, ids hashed into [1, kVocabSize).
/// Deterministic across runs and platforms. Throws InputError when no token
/// survives.
TokenSeq tokenize(const std::string& prompt);

/// Seeded Gaussian lookup: row i depends only on (ids[i], seed); entries are
/// N(0, 1/d_model). The mask token gets a fixed seeded vector like any other
/// id, not zeros.
EmbeddingSeq embed(const TokenSeq& seq, std::uint64_t seed, std::size_t d_model);

/// Replaces every position claimed by a missing concept with the mask token,
/// one for one; length is preserved so differential keys stay row-aligned.
TokenSeq mask_prompt(const TokenSeq& seq, const ConceptPartition& partition);

/// All positions of every contiguous match of the tokenized concept within
/// seq (union over matches); empty when the concept does not occur.
std::vector<int> concept_token_indices(const TokenSeq& seq, const std::string& phrase);

}  // namespace deltak
