#include "deltak/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "deltak/error.hpp"

namespace deltak {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": \"" + value + "\"");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": \"" + value + "\"");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("config: bad bool for " + key + ": \"" + value + "\"");
}

}  // namespace

std::set<std::size_t> parse_step_set(const std::string& text) {
    std::set<std::size_t> out;
    const std::string t = trim(text);
    if (t.empty() || t == "none") return out;
    std::stringstream ss(t);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            const std::size_t lo = parse_u64("range", trim(item.substr(0, dots)));
            const std::size_t hi = parse_u64("range", trim(item.substr(dots + 2)));
            if (lo > hi) throw ConfigError("config: empty range \"" + item + "\"");
            for (std::size_t v = lo; v <= hi; ++v) out.insert(v);
        } else {
            out.insert(parse_u64("step", item));
        }
    }
    return out;
}

std::string format_step_set(const std::set<std::size_t>& steps) {
    if (steps.empty()) return "none";
    // compress consecutive runs back into lo..hi
    std::string out;
    auto it = steps.begin();
    while (it != steps.end()) {
        std::size_t lo = *it, hi = *it;
        auto next = std::next(it);
        while (next != steps.end() && *next == hi + 1) {
            hi = *next;
            ++next;
        }
        if (!out.empty()) out += ',';
        out += std::to_string(lo);
        if (hi > lo) out += ".." + std::to_string(hi);
        it = next;
    }
    return out;
}

void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "prompt") cfg.prompt = value;
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "denoiser.layers") cfg.denoiser.layers = parse_u64(key, value);
    else if (key == "denoiser.heads") cfg.denoiser.heads = parse_u64(key, value);
    else if (key == "denoiser.d_model") cfg.denoiser.d_model = parse_u64(key, value);
    else if (key == "denoiser.queries") cfg.denoiser.queries = parse_u64(key, value);
    else if (key == "denoiser.steps") cfg.denoiser.steps = parse_u64(key, value);
    else if (key == "denoiser.update_rate") cfg.denoiser.update_rate = parse_real(key, value);
    else if (key == "denoiser.seed") cfg.denoiser.seed = parse_u64(key, value);
    else if (key == "scheduler.alpha_max") cfg.scheduler.alpha_max = parse_real(key, value);
    else if (key == "scheduler.lambda") cfg.scheduler.lambda = parse_real(key, value);
    else if (key == "scheduler.learning_rate") cfg.scheduler.learning_rate = parse_real(key, value);
    else if (key == "scheduler.iterations") cfg.scheduler.iterations = parse_u64(key, value);
    else if (key == "scheduler.beta1") cfg.scheduler.beta1 = parse_real(key, value);
    else if (key == "scheduler.beta2") cfg.scheduler.beta2 = parse_real(key, value);
    else if (key == "scheduler.eps") cfg.scheduler.eps_adam = parse_real(key, value);
    else if (key == "scheduler.window") {
        cfg.scheduler.window = parse_step_set(value);
        cfg.window_explicit = true;
    } else if (key == "scheduler.augmented_layers") {
        if (trim(value) == "all") cfg.scheduler.augmented_layers.clear();
        else {
            cfg.scheduler.augmented_layers.clear();
            for (std::size_t v : parse_step_set(value)) cfg.scheduler.augmented_layers.insert(v);
        }
    } else if (key == "scheduler.warm_start") cfg.scheduler.warm_start = parse_bool(key, value);
    else if (key == "oracle.mode") {
        if (value == "threshold") cfg.oracle.mode = OracleMode::threshold;
        else if (value == "remote") cfg.oracle.mode = OracleMode::remote;
        else throw ConfigError("config: oracle.mode must be threshold or remote");
    } else if (key == "oracle.rho") cfg.oracle.rho = parse_real(key, value);
    else if (key == "oracle.window") cfg.oracle.window = parse_u64(key, value);
    else if (key == "oracle.endpoint") cfg.oracle.endpoint = value;
    else if (key == "oracle.top_k") cfg.oracle.top_k = parse_u64(key, value);
    else if (key == "oracle.timeout_ms") cfg.oracle.timeout_ms = parse_u64(key, value);
    else throw ConfigError("config: unknown key \"" + key + "\"");
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                              ": expected key=value");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got \"" + item + "\"");
        apply_config_entry(cfg, trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
    }
}

void RunConfig::finalize() {
    if (const char* ep = std::getenv(kEndpointEnvVar); ep && *ep) oracle.endpoint = ep;
    if (const char* to = std::getenv(kTimeoutEnvVar); to && *to)
        oracle.timeout_ms = parse_u64(kTimeoutEnvVar, to);
    if (!window_explicit) scheduler.apply_default_window(denoiser.steps);
    denoiser.validate();
    scheduler.validate(denoiser.steps, denoiser.layers);
    oracle.validate();
    if (oracle.window > denoiser.steps)
        throw ConfigError("config: oracle.window exceeds denoiser.steps");
}

std::map<std::string, std::string> RunConfig::echo() const {
    std::map<std::string, std::string> m;
    m["prompt"] = prompt;
    m["seed"] = std::to_string(seed);
    m["out"] = out_dir;
    m["denoiser.layers"] = std::to_string(denoiser.layers);
    m["denoiser.heads"] = std::to_string(denoiser.heads);
    m["denoiser.d_model"] = std::to_string(denoiser.d_model);
    m["denoiser.queries"] = std::to_string(denoiser.queries);
    m["denoiser.steps"] = std::to_string(denoiser.steps);
    char buf[64];
    auto real = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    m["denoiser.update_rate"] = real(denoiser.update_rate);
    m["denoiser.seed"] = std::to_string(denoiser.seed);
    m["scheduler.alpha_max"] = real(scheduler.alpha_max);
    m["scheduler.lambda"] = real(scheduler.lambda);
    m["scheduler.learning_rate"] = real(scheduler.learning_rate);
    m["scheduler.iterations"] = std::to_string(scheduler.iterations);
    m["scheduler.beta1"] = real(scheduler.beta1);
    m["scheduler.beta2"] = real(scheduler.beta2);
    m["scheduler.eps"] = real(scheduler.eps_adam);
    m["scheduler.window"] = format_step_set(scheduler.window);
    m["scheduler.augmented_layers"] =
        scheduler.augmented_layers.empty() ? "all" : format_step_set(scheduler.augmented_layers);
    m["scheduler.warm_start"] = scheduler.warm_start ? "true" : "false";
    m["oracle.mode"] = oracle.mode == OracleMode::threshold ? "threshold" : "remote";
    m["oracle.rho"] = real(oracle.rho);
    m["oracle.window"] = std::to_string(oracle.window);
    m["oracle.endpoint"] = oracle.endpoint;
    m["oracle.top_k"] = std::to_string(oracle.top_k);
    m["oracle.timeout_ms"] = std::to_string(oracle.timeout_ms);
    return m;
}

}  // namespace deltak
