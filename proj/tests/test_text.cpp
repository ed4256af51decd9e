#include <cmath>
#include <set>

#include <doctest.h>

#include "deltak/error.hpp"
#include "deltak/text.hpp"

using namespace deltak;

TEST_CASE("tokenize") {
    SUBCASE("deterministic across calls") {
        const auto a = tokenize("a cat");
        const auto b = tokenize("a cat");
        CHECK(a.ids == b.ids);
        CHECK(a.surface == b.surface);
    }
    SUBCASE("case folds") {
        CHECK(tokenize("Cat").ids == tokenize("cat").ids);
    }
    SUBCASE("repeated word carries the same id at distinct positions") {
        const auto seq = tokenize("a black dog and a white dog");
        REQUIRE(seq.size() == 7);
        CHECK(seq.ids[2] == seq.ids[6]);
        CHECK(seq.surface[2] == "dog");
        CHECK(seq.surface[6] == "dog");
        CHECK(seq.ids[1] != seq.ids[5]);  // black vs white
    }
    SUBCASE("ids never collide with the mask id") {
        const auto seq = tokenize("A man, in a brown jacket; next to: a black dog!");
        for (auto id : seq.ids) {
            CHECK(id != kMaskTokenId);
            CHECK(id < kVocabSize);
        }
    }
    SUBCASE("empty prompt rejected") {
        CHECK_THROWS_AS(tokenize(""), InputError);
        CHECK_THROWS_AS(tokenize("  ,;  "), InputError);
    }
}

TEST_CASE("embed") {
    const auto seq = tokenize("a black dog and a white dog");

    SUBCASE("bit-identical under the same seed") {
        const auto a = embed(seq, 42, 16);
        const auto b = embed(seq, 42, 16);
        CHECK(a.matrix == b.matrix);
    }
    SUBCASE("seeds separate") {
        CHECK(embed(seq, 1, 16).matrix != embed(seq, 2, 16).matrix);
    }
    SUBCASE("equal ids give equal rows") {
        const auto e = embed(seq, 42, 16);
        for (std::size_t j = 0; j < 16; ++j) CHECK(e.matrix(2, j) == e.matrix(6, j));
        // and "a" at 0 and 4
        for (std::size_t j = 0; j < 16; ++j) CHECK(e.matrix(0, j) == e.matrix(4, j));
    }
    SUBCASE("mask id embeds to a fixed nonzero vector") {
        TokenSeq masked = seq;
        masked.ids[0] = kMaskTokenId;
        const auto e = embed(masked, 42, 16);
        double norm = 0.0;
        for (std::size_t j = 0; j < 16; ++j) norm += e.matrix(0, j) * e.matrix(0, j);
        CHECK(norm > 0.0);
        const auto e2 = embed(masked, 42, 16);
        for (std::size_t j = 0; j < 16; ++j) CHECK(e.matrix(0, j) == e2.matrix(0, j));
    }
    SUBCASE("mean row norm close to one at d_model 64") {
        // E ||row||^2 = 1 for N(0, 1/d) entries; Monte Carlo over 1000 ids
        TokenSeq synth;
        for (std::uint32_t i = 1; i <= 1000; ++i) {
            synth.ids.push_back(i);
            synth.surface.push_back("t" + std::to_string(i));
        }
        const auto e = embed(synth, 9, 64);
        double mean_norm = 0.0;
        for (std::size_t r = 0; r < e.matrix.rows(); ++r) {
            double norm2 = 0.0;
            for (std::size_t j = 0; j < 64; ++j) norm2 += e.matrix(r, j) * e.matrix(r, j);
            mean_norm += std::sqrt(norm2);
        }
        mean_norm /= 1000.0;
        CHECK(mean_norm == doctest::Approx(1.0).epsilon(0.10));
    }
}

TEST_CASE("mask_prompt") {
    const auto seq = tokenize("a man in a brown jacket with a black dog");  // 10 tokens
    REQUIRE(seq.size() == 10);

    SUBCASE("empty missing set is the identity") {
        const auto out = mask_prompt(seq, ConceptPartition{});
        CHECK(out.ids == seq.ids);
        CHECK(out.surface == seq.surface);
    }
    SUBCASE("all positions missing masks everything") {
        ConceptPartition partition;
        ConceptSpan span;
        span.phrase = "everything";
        for (int i = 0; i < 10; ++i) span.indices.push_back(i);
        partition.missing.push_back(span);
        const auto out = mask_prompt(seq, partition);
        for (auto id : out.ids) CHECK(id == kMaskTokenId);
        CHECK(out.size() == seq.size());
    }
    SUBCASE("span {5,6} changes exactly those positions") {
        ConceptPartition partition;
        partition.missing.push_back({"brown jacket", {4, 5}});
        const auto out = mask_prompt(seq, partition);
        REQUIRE(out.size() == seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i == 4 || i == 5) {
                CHECK(out.ids[i] == kMaskTokenId);
            } else {
                CHECK(out.ids[i] == seq.ids[i]);
            }
        }
    }
    SUBCASE("out-of-range index rejected") {
        ConceptPartition partition;
        partition.missing.push_back({"ghost", {10}});
        CHECK_THROWS_AS(mask_prompt(seq, partition), InputError);
    }
}

TEST_CASE("concept_token_indices") {
    const auto seq = tokenize("a black dog and a white dog");

    SUBCASE("two-word concept resolves to its span") {
        CHECK(concept_token_indices(seq, "white dog") == std::vector<int>{5, 6});
        CHECK(concept_token_indices(seq, "black dog") == std::vector<int>{1, 2});
    }
    SUBCASE("absent concept gives the empty set") {
        CHECK(concept_token_indices(seq, "red cat").empty());
    }
    SUBCASE("single word matching twice unions both positions") {
        CHECK(concept_token_indices(seq, "dog") == std::vector<int>{2, 6});
    }
    SUBCASE("case and punctuation insensitive") {
        CHECK(concept_token_indices(seq, "White Dog!") == std::vector<int>{5, 6});
    }
}

TEST_CASE("text pipeline properties") {
    const auto seq = tokenize("a red cube on a blue sphere beside a green cone");

    SUBCASE("masking preserves length for any index set") {
        ConceptPartition partition;
        partition.missing.push_back({"x", {0, 3, 7}});
        CHECK(mask_prompt(seq, partition).size() == seq.size());
    }
    SUBCASE("embedding difference is supported exactly on the masked rows") {
        ConceptPartition partition;
        const std::vector<int> missing = {4, 5, 6};
        partition.missing.push_back({"blue sphere beside", missing});
        const auto masked = mask_prompt(seq, partition);
        const auto e_full = embed(seq, 17, 32);
        const auto e_mask = embed(masked, 17, 32);
        const std::set<int> missing_set(missing.begin(), missing.end());
        for (std::size_t r = 0; r < seq.size(); ++r) {
            double diff = 0.0;
            for (std::size_t j = 0; j < 32; ++j)
                diff += std::abs(e_full.matrix(r, j) - e_mask.matrix(r, j));
            if (missing_set.count(static_cast<int>(r))) {
                CHECK(diff > 0.0);
            } else {
                CHECK(diff == 0.0);
            }
        }
    }
}
