#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltak/denoiser.hpp"
#include "deltak/engine.hpp"
#include "deltak/text.hpp"

namespace deltak {

/// Line-delimited JSON trace file: a header record, one record per
/// (step, layer) carrying the per-head maps, a key-input checksum and the
/// step's injection strength, then a footer with the schedule and partition.
/// Floats serialize as shortest round-trip decimals, so reloading reproduces
/// every metric bit for bit.
struct TraceHeader {
    int version_major = 0;
    int version_minor = 0;
    std::string kind;  // "baseline" | "augmented"
    std::map<std::string, std::string> config_echo;
    std::string prompt;
    std::uint64_t seed = 0;
    TokenSeq tokens;
};

struct LoadedTrace {
    TraceHeader header;
    AttentionTrace trace;  // maps + alpha_used; key checksums kept separately
    std::vector<std::vector<std::string>> key_checksums;  // [step-1][layer]
    ScheduleRecord schedule;
    ConceptPartition partition;
    std::string final_latent_checksum;
};

std::string checksum_hex(const DenseMatrix& m);

/// Whole-file atomic (write temp, rename).
void write_trace_file(const std::string& path, const TraceHeader& header,
                      const AttentionTrace& trace, const ScheduleRecord& schedule,
                      const ConceptPartition& partition,
                      const std::string& final_latent_checksum);

/// Validates structure, version (unknown majors are rejected) and
/// row-stochasticity; throws IoError on anything corrupt.
LoadedTrace load_trace_file(const std::string& path);

/// Shortest decimal that parses back to exactly the same double.
std::string format_double(double v);

void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace deltak
