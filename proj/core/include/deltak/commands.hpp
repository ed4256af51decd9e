#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltak/run_config.hpp"

namespace deltak {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 2;  // usage / config
inline constexpr int kExitProperty = 1;  // property or protocol failure

struct AnalyzeOptions {
    std::string trace_path;
    std::string out_dir = ".";
    std::vector<std::string> metrics;          // empty = intensity, cv, entropy
    std::vector<std::string> token_concepts;   // concept strings resolved via the trace tokens
    std::vector<std::size_t> layer_subset;     // empty = all layers
    bool auc = false;                          // needs labels (footer partition or flags)
    std::vector<std::string> present_override; // concept strings
    std::vector<std::string> missing_override;
    std::size_t auc_window = 10;               // early steps feeding the detectability score
};

struct VerifyOptions {
    std::string theorem = "all";  // "1" | "2" | "all"
    std::size_t trials = 100000;  // per dim, orthogonality tails
    std::size_t instances = 1000; // mass-concentration suite
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

struct ExportOptions {
    std::string trace_path;
    std::string format = "csv";  // "csv" | "json"
    std::string out_dir = ".";
};

/// Baseline + augmented run; writes baseline.trace.jsonl,
/// augmented.trace.jsonl and summary.json into cfg.out_dir.
int cmd_run(const RunConfig& cfg);

/// Fig-2-style series from a trace file; writes analysis.csv
/// (step,metric,value,label).
int cmd_analyze(const AnalyzeOptions& opt);

/// Theorem property suites; exit 0 iff everything passes; writes
/// verify_report.json and tail_report.csv.
int cmd_verify(const VerifyOptions& opt);

/// Plot-ready re-serialization of a trace: long CSV or compact JSON.
int cmd_export(const ExportOptions& opt);

}  // namespace deltak
