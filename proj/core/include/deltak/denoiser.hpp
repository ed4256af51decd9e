#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "deltak/matrix.hpp"
#include "deltak/text.hpp"

namespace deltak {

/// Sampler/model geometry. Steps are numbered 1..steps in execution order
/// (step 1 is the first, noisiest denoising step); layers and heads are
/// 0-based indices.
struct DenoiserConfig {
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t d_model = 64;
    std::size_t queries = 64;  // latent token count
    std::size_t steps = 28;
    double update_rate = 0.1;  // in (0, 1]
    std::uint64_t seed = 1;    // weight seed

    std::size_t head_dim() const { return d_model / heads; }
    void validate() const;  // throws ConfigError
};

/// Per-step key-input interceptor: (step, layer, key_input) -> key_input'.
/// Must preserve the input shape.
using KeyHook = std::function<DenseMatrix(std::size_t step, std::size_t layer,
                                          const DenseMatrix& key_input)>;

KeyHook identity_hook();

/// Everything a sampling run leaves behind: per (step, layer, head) attention
/// maps, the (post-hook) key inputs that produced them, the latent after each
/// step, and the injection strength each step ran with.
struct AttentionTrace {
    std::size_t steps = 0;
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t queries = 0;
    std::size_t keys = 0;

    // indexed [step-1][layer][head]; loaded-from-disk traces may leave
    // key_inputs/latents empty (maps and alphas are what metrics consume)
    std::vector<std::vector<std::vector<DenseMatrix>>> maps;
    std::vector<std::vector<DenseMatrix>> key_inputs;
    std::vector<DenseMatrix> latents;
    std::vector<double> alpha_used;

    const DenseMatrix& map_at(std::size_t step, std::size_t layer, std::size_t head) const {
        return maps[step - 1][layer][head];
    }

    /// Structural + row-stochasticity (1e-10) checks; throws IoError.
    void validate() const;
};

/// Bitwise equality of the parts both traces carry (maps, alphas, and
/// key_inputs/latents when present on both).
bool traces_bit_equal(const AttentionTrace& a, const AttentionTrace& b);

struct StepResult {
    DenseMatrix next_latent;
    std::vector<std::vector<DenseMatrix>> maps;  // [layer][head]
    std::vector<DenseMatrix> key_inputs;         // [layer], post-hook
};

struct SampleResult {
    AttentionTrace trace;
    DenseMatrix final_latent;
};

/// Frozen stack of per-layer, per-head cross-attention projections with
/// seeded N(0, 1/d_model) weights. Weights are a pure function of the config.
class ToyDenoiser {
public:
    explicit ToyDenoiser(DenoiserConfig cfg);

    const DenoiserConfig& config() const { return cfg_; }
    const DenseMatrix& w_q(std::size_t layer, std::size_t head) const { return wq_[flat(layer, head)]; }
    const DenseMatrix& w_k(std::size_t layer, std::size_t head) const { return wk_[flat(layer, head)]; }
    const DenseMatrix& w_v(std::size_t layer, std::size_t head) const { return wv_[flat(layer, head)]; }
    const DenseMatrix& w_o(std::size_t layer, std::size_t head) const { return wo_[flat(layer, head)]; }

    std::uint64_t weight_checksum() const;

private:
    std::size_t flat(std::size_t layer, std::size_t head) const { return layer * cfg_.heads + head; }

    DenoiserConfig cfg_;
    std::vector<DenseMatrix> wq_, wk_, wv_, wo_;
};

/// Initial latent z for a run: seeded standard Gaussian, queries x d_model.
DenseMatrix init_latent(const DenoiserConfig& cfg, std::uint64_t seed);

/// One denoising step. Every layer reads the same incoming latent; the update
/// is z' = (1-eta)*z + eta*(z + mean over layers of the per-layer attention
/// output), making the attention maps the only coupling channel.
StepResult denoise_step(const ToyDenoiser& model, const DenseMatrix& z, const EmbeddingSeq& text,
                        std::size_t step, const KeyHook& hook);

/// Full run, step = 1..steps, trace fully populated. alpha_used is 0
/// everywhere (callers that know their hook's strength can overwrite it).
SampleResult run_sampler(const ToyDenoiser& model, const EmbeddingSeq& text, const KeyHook& hook,
                         std::uint64_t seed);

}  // namespace deltak
