#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deltak/denoiser.hpp"
#include "deltak/engine.hpp"
#include "deltak/oracle.hpp"

namespace deltak {

/// Merged run configuration. Loaded from flat key=value text with dotted
/// section prefixes (scheduler.alpha_max=0.04); unknown keys are rejected.
/// Precedence: defaults < config file < environment < --set/--seed/--out.
struct RunConfig {
    std::string prompt = "a black dog and a white dog";
    std::uint64_t seed = 7;
    std::string out_dir = "out";
    DenoiserConfig denoiser;
    SchedulerConfig scheduler;
    OracleConfig oracle;

    bool window_explicit = false;  // file/override set scheduler.window

    /// Fills the default window, applies env vars, validates everything.
    void finalize();

    /// The exact effective settings, as flat dotted keys (embedded in every
    /// output file).
    std::map<std::string, std::string> echo() const;
};

/// Applies one dotted key. Throws ConfigError on unknown keys or bad values.
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses a config file: one key=value per line, '#' comments, blank lines
/// allowed.
RunConfig load_config_file(const std::string& path);

/// key=value strings from --set.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// "none" | "3" | "1..10" | comma-joined mix of both.
std::set<std::size_t> parse_step_set(const std::string& text);
std::string format_step_set(const std::set<std::size_t>& steps);

inline constexpr const char* kEndpointEnvVar = "DELTAK_ORACLE_ENDPOINT";
inline constexpr const char* kTimeoutEnvVar = "DELTAK_ORACLE_TIMEOUT_MS";

}  // namespace deltak
