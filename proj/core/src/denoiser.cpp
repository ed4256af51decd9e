#include "deltak/denoiser.hpp"

#include <cmath>

#include "deltak/error.hpp"
#include "deltak/rng.hpp"

namespace deltak {

void DenoiserConfig::validate() const {
    if (layers < 1) throw ConfigError("denoiser: layers must be >= 1");
    if (heads < 1) throw ConfigError("denoiser: heads must be >= 1");
    if (d_model < 1) throw ConfigError("denoiser: d_model must be >= 1");
    if (d_model % heads != 0) throw ConfigError("denoiser: d_model must be divisible by heads");
    if (queries < 1) throw ConfigError("denoiser: queries must be >= 1");
    if (steps < 1) throw ConfigError("denoiser: steps must be >= 1");
    if (!(update_rate > 0.0) || update_rate > 1.0)
        throw ConfigError("denoiser: update_rate must be in (0, 1]");
}

KeyHook identity_hook() {
    return [](std::size_t, std::size_t, const DenseMatrix& k) { return k; };
}

void AttentionTrace::validate() const {
    if (maps.size() != steps) throw IoError("trace: step count mismatch");
    if (alpha_used.size() != steps) throw IoError("trace: alpha count mismatch");
    for (std::size_t t = 0; t < steps; ++t) {
        if (maps[t].size() != layers) throw IoError("trace: layer count mismatch");
        for (std::size_t l = 0; l < layers; ++l) {
            if (maps[t][l].size() != heads) throw IoError("trace: head count mismatch");
            for (std::size_t h = 0; h < heads; ++h) {
                const DenseMatrix& m = maps[t][l][h];
                if (m.rows() != queries || m.cols() != keys)
                    throw IoError("trace: map shape mismatch");
                for (std::size_t q = 0; q < m.rows(); ++q) {
                    double sum = 0.0;
                    for (std::size_t k = 0; k < m.cols(); ++k) sum += m(q, k);
                    if (std::abs(sum - 1.0) > 1e-10)
                        throw IoError("trace: attention row not stochastic");
                }
            }
        }
    }
}

bool traces_bit_equal(const AttentionTrace& a, const AttentionTrace& b) {
    if (a.steps != b.steps || a.layers != b.layers || a.heads != b.heads ||
        a.queries != b.queries || a.keys != b.keys)
        return false;
    if (a.maps != b.maps) return false;
    if (a.alpha_used.size() != b.alpha_used.size()) return false;
    for (std::size_t i = 0; i < a.alpha_used.size(); ++i)
        if (a.alpha_used[i] != b.alpha_used[i]) return false;
    if (!a.key_inputs.empty() && !b.key_inputs.empty() && a.key_inputs != b.key_inputs)
        return false;
    if (!a.latents.empty() && !b.latents.empty() && a.latents != b.latents) return false;
    return true;
}

ToyDenoiser::ToyDenoiser(DenoiserConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t d_k = cfg_.head_dim();
    const double sigma = 1.0 / std::sqrt(static_cast<double>(cfg_.d_model));
    auto fill = [&](DenseMatrix& w, std::size_t l, std::size_t h, std::uint64_t kind) {
        SplitMix64 stream(mix_seed(cfg_.seed, kTagWeight, (l * cfg_.heads + h) * 4 + kind));
        for (double& v : w.data()) v = sigma * stream.next_gaussian();
    };
    const std::size_t n = cfg_.layers * cfg_.heads;
    wq_.reserve(n);
    wk_.reserve(n);
    wv_.reserve(n);
    wo_.reserve(n);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            DenseMatrix q(cfg_.d_model, d_k), k(cfg_.d_model, d_k), v(cfg_.d_model, d_k),
                o(d_k, cfg_.d_model);
            fill(q, l, h, 0);
            fill(k, l, h, 1);
            fill(v, l, h, 2);
            fill(o, l, h, 3);
            wq_.push_back(std::move(q));
            wk_.push_back(std::move(k));
            wv_.push_back(std::move(v));
            wo_.push_back(std::move(o));
        }
    }
}

std::uint64_t ToyDenoiser::weight_checksum() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* bank : {&wq_, &wk_, &wv_, &wo_})
        for (const auto& w : *bank) h ^= bit_checksum(w) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    return h;
}

DenseMatrix init_latent(const DenoiserConfig& cfg, std::uint64_t seed) {
    DenseMatrix z(cfg.queries, cfg.d_model);
    SplitMix64 stream(mix_seed(seed, kTagLatent));
    for (double& v : z.data()) v = stream.next_gaussian();
    return z;
}

StepResult denoise_step(const ToyDenoiser& model, const DenseMatrix& z, const EmbeddingSeq& text,
                        std::size_t step, const KeyHook& hook) {
    const DenoiserConfig& cfg = model.config();
    if (z.rows() != cfg.queries || z.cols() != cfg.d_model)
        throw DimensionError("denoise_step: latent shape mismatch");
    if (text.matrix.cols() != cfg.d_model)
        throw DimensionError("denoise_step: text embedding width mismatch");

    StepResult res;
    res.maps.resize(cfg.layers);
    res.key_inputs.reserve(cfg.layers);
    DenseMatrix accum(cfg.queries, cfg.d_model);

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        DenseMatrix key_input = hook ? hook(step, l, text.matrix) : text.matrix;
        if (!key_input.same_shape(text.matrix))
            throw DimensionError("denoise_step: hook changed key-input shape");
        DenseMatrix layer_out(cfg.queries, cfg.d_model);
        res.maps[l].reserve(cfg.heads);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const DenseMatrix q = matmul(z, model.w_q(l, h));
            const DenseMatrix k = matmul(key_input, model.w_k(l, h));
            const DenseMatrix v = matmul(key_input, model.w_v(l, h));
            AttentionOutput att = scaled_dot_attention(q, k, v);
            layer_out = add(layer_out, matmul(att.context, model.w_o(l, h)));
            res.maps[l].push_back(std::move(att.map));
        }
        accum = add(accum, layer_out);
        res.key_inputs.push_back(std::move(key_input));
    }

    const double eta = cfg.update_rate;
    const double inv_layers = 1.0 / static_cast<double>(cfg.layers);
    res.next_latent = DenseMatrix(cfg.queries, cfg.d_model);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double mean_out = accum.data()[i] * inv_layers;
        res.next_latent.data()[i] =
            (1.0 - eta) * z.data()[i] + eta * (z.data()[i] + mean_out);
    }
    return res;
}

SampleResult run_sampler(const ToyDenoiser& model, const EmbeddingSeq& text, const KeyHook& hook,
                         std::uint64_t seed) {
    const DenoiserConfig& cfg = model.config();
    SampleResult out;
    AttentionTrace& trace = out.trace;
    trace.steps = cfg.steps;
    trace.layers = cfg.layers;
    trace.heads = cfg.heads;
    trace.queries = cfg.queries;
    trace.keys = text.matrix.rows();

    DenseMatrix z = init_latent(cfg, seed);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        StepResult res = denoise_step(model, z, text, step, hook);
        trace.maps.push_back(std::move(res.maps));
        trace.key_inputs.push_back(std::move(res.key_inputs));
        z = std::move(res.next_latent);
        trace.latents.push_back(z);
        trace.alpha_used.push_back(0.0);
    }
    out.final_latent = std::move(z);
    return out;
}

}  // namespace deltak
