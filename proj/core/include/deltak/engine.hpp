#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deltak/denoiser.hpp"
#include "deltak/oracle.hpp"
#include "deltak/text.hpp"

namespace deltak {

/// Differential key tensor: one sequence-length x d_model matrix per layer.
/// Rows outside the missing positions are exactly zero. The toy model shares
/// one text embedding across layers, so all entries coincide; the per-layer
/// structure mirrors how the injection is indexed downstream.
struct DeltaKey {
    std::vector<DenseMatrix> per_layer;
};

/// per_layer[l] = emb_p - emb_mask for every l. Embeddings must share shape
/// and seed.
DeltaKey extract_delta_k(const EmbeddingSeq& emb_p, const EmbeddingSeq& emb_mask,
                         std::size_t layers);

/// Mean baseline attention column of the present tokens at (step, layer),
/// averaged over heads: one value per query. With nothing present the target
/// falls back to the uniform share 1/keys.
std::vector<double> target_attention(const AttentionTrace& baseline,
                                     const std::vector<int>& present, std::size_t step,
                                     std::size_t layer);

/// Mean attention column of the missing tokens across the given heads; the
/// missing set must be non-empty.
std::vector<double> aggregate_missing(const std::vector<DenseMatrix>& head_maps,
                                      const std::vector<int>& missing);

struct SchedulerConfig {
    double alpha_max = 0.04;
    double lambda = 1.0;
    double learning_rate = 0.001;
    std::size_t iterations = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::set<std::size_t> window;            // augmented steps (1-based); may be empty
    std::set<std::size_t> augmented_layers;  // 0-based; empty = all layers
    bool warm_start = false;                 // seed each step's search from the previous optimum

    /// Default window 1..min(10, steps).
    void apply_default_window(std::size_t steps);
    void validate(std::size_t steps, std::size_t layers) const;  // throws ConfigError
    std::vector<std::size_t> layers_for(std::size_t layer_count) const;
};

/// Frozen per-layer snapshot the strength optimization closes over. Built
/// once per augmented step; optimizing over alpha never touches sampler
/// state.
struct LayerContext {
    std::vector<DenseMatrix> q_heads;   // [head] queries x d_k (latent already projected)
    std::vector<DenseMatrix> wk_heads;  // [head] d_model x d_k key projections
    DenseMatrix key_input;              // keys x d_model, pre-injection
    DenseMatrix delta;                  // keys x d_model
    std::vector<double> target;         // per query
};

struct StepContext {
    std::vector<LayerContext> layers;  // augmented layers only
    std::vector<int> missing;          // token positions
};

/// Sum over layers of || aggregate_missing(alpha) - target ||^2, with the
/// attention recomputed from the injected keys at the given strength.
double alignment_loss(double alpha, const StepContext& ctx);

/// Analytic d(loss)/d(alpha) through the softmax Jacobian: with
/// s(a) = q((k + a*delta) wk)^T / sqrt(d_k) and d = ds/da constant, each map
/// row differentiates as A .* (d - rowsum(A .* d)).
double loss_gradient(double alpha, const StepContext& ctx);

struct ScheduleEntry {
    std::size_t step = 0;
    double alpha_star = 0.0;
    double loss_at_zero = 0.0;
    double loss_at_optimum = 0.0;
    double grad_at_optimum = 0.0;  // |dL/da| at the committed pre-lambda alpha
    std::size_t iterations_run = 0;
};

struct ScheduleRecord {
    std::vector<ScheduleEntry> entries;
};

/// Adam over alpha from init_alpha (0 unless warm-starting), clamped to
/// [0, alpha_max] after every update. The best iterate is tracked over
/// {0, init} and every visited point, so loss_at_optimum <= loss_at_zero
/// holds exactly. Returns lambda * best_alpha re-clamped to
/// [0, lambda * alpha_max].
std::pair<double, ScheduleEntry> optimize_alpha(const StepContext& ctx,
                                                const SchedulerConfig& cfg,
                                                double init_alpha = 0.0);

struct DeltaKRunResult {
    TokenSeq tokens;
    ConceptPartition partition;
    OracleVerdict verdict;
    AttentionTrace baseline;
    DenseMatrix baseline_final;
    AttentionTrace augmented;  // equals baseline when nothing is missing
    DenseMatrix final_latent;
    ScheduleRecord schedule;
    DeltaKey delta;  // empty per_layer when nothing is missing
};

/// Full pipeline: baseline run, oracle partition, masked prompt,
/// differential key, baseline-derived targets, then the augmented run where
/// each window step freezes a StepContext, optimizes its strength and
/// commits the injected denoising step. An empty missing set returns the
/// baseline unchanged with an empty schedule.
DeltaKRunResult run_delta_k(const std::string& prompt, const ToyDenoiser& model,
                            const OracleConfig& oracle, const SchedulerConfig& sched,
                            std::uint64_t seed);

/// Same pipeline with the partition supplied by the caller instead of an
/// oracle (the partition's concept strings are resolved against the prompt's
/// tokens as-is).
DeltaKRunResult run_delta_k_forced(const std::string& prompt, const ToyDenoiser& model,
                                   const ConceptPartition& partition,
                                   const SchedulerConfig& sched, std::uint64_t seed);

}  // namespace deltak
