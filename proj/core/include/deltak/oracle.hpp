#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltak/denoiser.hpp"
#include "deltak/text.hpp"

namespace deltak {

enum class OracleMode { threshold, remote };

struct OracleConfig {
    OracleMode mode = OracleMode::threshold;
    double rho = 0.5;         // relative-mass threshold, in (0, 1]
    std::size_t window = 10;  // early steps inspected, in [1, steps]
    std::string endpoint;     // remote mode, e.g. http://127.0.0.1:8080/partition
    std::size_t top_k = 0;    // max concepts per list; 0 = unlimited
    std::size_t timeout_ms = 10000;

    void validate() const;  // throws ConfigError
};

struct OracleVerdict {
    ConceptPartition partition;
    std::string raw_response;           // remote mode; empty otherwise
    std::vector<std::string> warnings;  // e.g. concept strings that resolve nowhere
};

/// The packaged request template; "{prompt}" is the substitution point.
const char* vlm_prompt_template();

/// Articles/prepositions/conjunctions skipped by the threshold partitioner.
bool is_stop_word(const std::string& word);

/// Marks token i missing when its mean early attention mass over the first
/// cfg.window steps (all layers, heads, queries) falls below rho/keys.
/// Contiguous same-status runs of non-stop tokens become concepts. Pure:
/// replaying the same inputs yields the identical verdict.
OracleVerdict partition_threshold(const AttentionTrace& trace, const TokenSeq& seq,
                                  const OracleConfig& cfg);

/// POSTs {prompt, image_summary, template, temperature:0} to cfg.endpoint and
/// parses a strict JSON object with "present_tokens"/"missing_tokens" string
/// arrays. Anything else (markdown fences, prose, missing keys) raises
/// ProtocolError carrying the raw payload. Concept strings that resolve to no
/// token positions come back with empty index sets plus a warning. On
/// present/missing index conflicts, missing wins.
OracleVerdict partition_remote(const std::string& prompt, const std::string& image_summary,
                               const TokenSeq& seq, const OracleConfig& cfg);

/// Compact textual digest of a baseline run (per-token early intensities);
/// stands in for the image a desk-scale run cannot render.
std::string trace_digest(const AttentionTrace& trace, const TokenSeq& seq, std::size_t window);

/// Dispatch on cfg.mode; remote mode derives image_summary from the trace.
OracleVerdict run_oracle(const OracleConfig& cfg, const std::string& prompt, const TokenSeq& seq,
                         const AttentionTrace& baseline);

}  // namespace deltak
