#include "deltak/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "deltak/error.hpp"
#include "deltak/metrics.hpp"

namespace deltak {

void OracleConfig::validate() const {
    if (!(rho > 0.0) || rho > 1.0) throw ConfigError("oracle: rho must be in (0, 1]");
    if (window < 1) throw ConfigError("oracle: window must be >= 1");
    if (mode == OracleMode::remote && endpoint.empty())
        throw ConfigError("oracle: remote mode needs an endpoint");
}

bool is_stop_word(const std::string& word) {
    static const std::set<std::string> kStops = {
        "a",  "an",  "the",  "and",  "or",   "but",  "of",   "in",   "on",
        "at", "to",  "with", "by",   "for",  "from", "into", "onto", "next",
        "near", "under", "over", "behind", "beside", "between", "above", "below",
        "is", "are", "its"};
    return kStops.count(word) > 0;
}

namespace {

void apply_top_k(std::vector<ConceptSpan>& spans, std::size_t top_k) {
    if (top_k > 0 && spans.size() > top_k) spans.resize(top_k);
}

// present/missing must not intersect; on conflict the missing claim wins
void enforce_disjoint(ConceptPartition& partition) {
    std::set<int> missing;
    for (const auto& span : partition.missing)
        missing.insert(span.indices.begin(), span.indices.end());
    std::vector<ConceptSpan> kept;
    for (auto& span : partition.present) {
        std::vector<int> filtered;
        for (int i : span.indices)
            if (!missing.count(i)) filtered.push_back(i);
        if (!filtered.empty()) {
            span.indices = std::move(filtered);
            kept.push_back(std::move(span));
        }
    }
    partition.present = std::move(kept);
}

}  // namespace

OracleVerdict partition_threshold(const AttentionTrace& trace, const TokenSeq& seq,
                                  const OracleConfig& cfg) {
    cfg.validate();
    if (cfg.window > trace.steps)
        throw InputError("partition_threshold: window exceeds trace length");
    if (seq.size() != trace.keys)
        throw DimensionError("partition_threshold: token count differs from trace keys");

    const double cutoff = cfg.rho / static_cast<double>(trace.keys);

    // mean early attention mass per token
    std::vector<double> mean_mass(trace.keys, 0.0);
    const double denom = static_cast<double>(cfg.window) * static_cast<double>(trace.layers) *
                         static_cast<double>(trace.heads) * static_cast<double>(trace.queries);
    for (std::size_t t = 1; t <= cfg.window; ++t)
        for (std::size_t l = 0; l < trace.layers; ++l)
            for (std::size_t h = 0; h < trace.heads; ++h) {
                const DenseMatrix& m = trace.map_at(t, l, h);
                for (std::size_t q = 0; q < trace.queries; ++q)
                    for (std::size_t k = 0; k < trace.keys; ++k) mean_mass[k] += m(q, k);
            }
    for (double& v : mean_mass) v /= denom;

    // group maximal runs of consecutive non-stop tokens with equal status
    OracleVerdict verdict;
    std::size_t i = 0;
    while (i < seq.size()) {
        if (is_stop_word(seq.surface[i])) {
            ++i;
            continue;
        }
        const bool missing = mean_mass[i] < cutoff;
        ConceptSpan span;
        std::size_t j = i;
        while (j < seq.size() && !is_stop_word(seq.surface[j]) &&
               (mean_mass[j] < cutoff) == missing) {
            if (!span.phrase.empty()) span.phrase += ' ';
            span.phrase += seq.surface[j];
            span.indices.push_back(static_cast<int>(j));
            ++j;
        }
        (missing ? verdict.partition.missing : verdict.partition.present).push_back(std::move(span));
        i = j;
    }
    apply_top_k(verdict.partition.present, cfg.top_k);
    apply_top_k(verdict.partition.missing, cfg.top_k);
    return verdict;
}

std::string trace_digest(const AttentionTrace& trace, const TokenSeq& seq, std::size_t window) {
    std::ostringstream os;
    os << "steps=" << trace.steps << " keys=" << trace.keys << " window=" << window
       << "; early mean attention per token:";
    const std::size_t w = std::min(window, trace.steps);
    char buf[64];
    for (std::size_t i = 0; i < seq.size(); ++i) {
        double acc = 0.0;
        for (std::size_t t = 1; t <= w; ++t) {
            const auto profile = token_spatial_profile(trace, {static_cast<int>(i)}, t);
            double mean = 0.0;
            for (double v : profile) mean += v;
            acc += mean / static_cast<double>(profile.size());
        }
        std::snprintf(buf, sizeof buf, " %s=%.6f", seq.surface[i].c_str(),
                      acc / static_cast<double>(w));
        os << buf;
    }
    return os.str();
}

namespace {

// full endpoint -> (base "scheme://host:port", path "/...")
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("oracle: endpoint must look like http://host:port/path");
    const auto path_pos = endpoint.find('/', scheme + 3);
    if (path_pos == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_pos), endpoint.substr(path_pos)};
}

std::string substitute_prompt(std::string tmpl, const std::string& prompt) {
    const std::string needle = "{prompt}";
    for (auto pos = tmpl.find(needle); pos != std::string::npos; pos = tmpl.find(needle, pos))
        tmpl.replace(pos, needle.size(), prompt);
    return tmpl;
}

std::vector<std::string> parse_string_array(const nlohmann::json& obj, const char* key,
                                            const std::string& payload) {
    if (!obj.contains(key))
        throw ProtocolError(std::string("oracle response missing key \"") + key + "\"", payload);
    const auto& arr = obj.at(key);
    if (!arr.is_array())
        throw ProtocolError(std::string("oracle response key \"") + key + "\" is not an array",
                            payload);
    std::vector<std::string> out;
    for (const auto& item : arr) {
        if (!item.is_string())
            throw ProtocolError(std::string("oracle response key \"") + key +
                                    "\" holds a non-string entry",
                                payload);
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

OracleVerdict partition_remote(const std::string& prompt, const std::string& image_summary,
                               const TokenSeq& seq, const OracleConfig& cfg) {
    cfg.validate();
    if (cfg.endpoint.empty()) throw ConfigError("oracle: remote mode needs an endpoint");
    const auto [base, path] = split_endpoint(cfg.endpoint);

    nlohmann::json body;
    body["prompt"] = prompt;
    body["image_summary"] = image_summary;
    body["template"] = substitute_prompt(vlm_prompt_template(), prompt);
    body["temperature"] = 0;

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(cfg.timeout_ms / 1000);
    const auto usecs = static_cast<time_t>((cfg.timeout_ms % 1000) * 1000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) throw ProtocolError("oracle request failed: " + httplib::to_string(res.error()), "");
    if (res->status != 200)
        throw ProtocolError("oracle returned HTTP " + std::to_string(res->status), res->body);

    OracleVerdict verdict;
    verdict.raw_response = res->body;

    // the contract is a strict JSON object only: no fences, no prose
    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw ProtocolError("oracle response is not strict JSON", res->body);
    }
    if (!parsed.is_object())
        throw ProtocolError("oracle response is not a JSON object", res->body);

    auto present = parse_string_array(parsed, "present_tokens", res->body);
    auto missing = parse_string_array(parsed, "missing_tokens", res->body);
    if (cfg.top_k > 0) {
        if (present.size() > cfg.top_k) present.resize(cfg.top_k);
        if (missing.size() > cfg.top_k) missing.resize(cfg.top_k);
    }

    auto resolve = [&](const std::vector<std::string>& phrases, std::vector<ConceptSpan>& out) {
        for (const auto& phrase : phrases) {
            ConceptSpan span;
            span.phrase = phrase;
            span.indices = concept_token_indices(seq, phrase);
            if (span.indices.empty())
                verdict.warnings.push_back("concept not found in prompt: " + phrase);
            out.push_back(std::move(span));
        }
    };
    resolve(present, verdict.partition.present);
    resolve(missing, verdict.partition.missing);
    enforce_disjoint(verdict.partition);
    return verdict;
}

OracleVerdict run_oracle(const OracleConfig& cfg, const std::string& prompt, const TokenSeq& seq,
                         const AttentionTrace& baseline) {
    if (cfg.mode == OracleMode::threshold) return partition_threshold(baseline, seq, cfg);
    return partition_remote(prompt, trace_digest(baseline, seq, cfg.window), seq, cfg);
}

}  // namespace deltak
