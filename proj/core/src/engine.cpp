#include "deltak/engine.hpp"

#include <algorithm>
#include <cmath>

#include "deltak/error.hpp"

namespace deltak {

DeltaKey extract_delta_k(const EmbeddingSeq& emb_p, const EmbeddingSeq& emb_mask,
                         std::size_t layers) {
    if (!emb_p.matrix.same_shape(emb_mask.matrix))
        throw DimensionError("extract_delta_k: embedding shapes differ");
    if (emb_p.seed != emb_mask.seed)
        throw InputError("extract_delta_k: embeddings come from different seeds");
    DeltaKey key;
    key.per_layer.reserve(layers);
    const DenseMatrix diff = sub(emb_p.matrix, emb_mask.matrix);
    for (std::size_t l = 0; l < layers; ++l) key.per_layer.push_back(diff);
    return key;
}

std::vector<double> target_attention(const AttentionTrace& baseline,
                                     const std::vector<int>& present, std::size_t step,
                                     std::size_t layer) {
    if (step < 1 || step > baseline.steps) throw InputError("target_attention: step out of range");
    if (layer >= baseline.layers) throw InputError("target_attention: layer out of range");
    if (present.empty()) {
        // nothing succeeded to copy from; aim for the uniform share
        return std::vector<double>(baseline.queries, 1.0 / static_cast<double>(baseline.keys));
    }
    std::vector<double> target(baseline.queries, 0.0);
    for (std::size_t h = 0; h < baseline.heads; ++h) {
        const DenseMatrix& m = baseline.map_at(step, layer, h);
        for (int tok : present) {
            if (tok < 0 || static_cast<std::size_t>(tok) >= baseline.keys)
                throw InputError("target_attention: token index out of range");
            for (std::size_t q = 0; q < baseline.queries; ++q)
                target[q] += m(q, static_cast<std::size_t>(tok));
        }
    }
    const double denom =
        static_cast<double>(baseline.heads) * static_cast<double>(present.size());
    for (double& v : target) v /= denom;
    return target;
}

std::vector<double> aggregate_missing(const std::vector<DenseMatrix>& head_maps,
                                      const std::vector<int>& missing) {
    if (missing.empty()) throw InputError("aggregate_missing: empty missing set");
    if (head_maps.empty()) throw InputError("aggregate_missing: no heads");
    const std::size_t queries = head_maps.front().rows();
    std::vector<double> agg(queries, 0.0);
    for (const DenseMatrix& m : head_maps) {
        if (m.rows() != queries) throw DimensionError("aggregate_missing: ragged head maps");
        for (int tok : missing) {
            if (tok < 0 || static_cast<std::size_t>(tok) >= m.cols())
                throw InputError("aggregate_missing: token index out of range");
            for (std::size_t q = 0; q < queries; ++q) agg[q] += m(q, static_cast<std::size_t>(tok));
        }
    }
    const double denom =
        static_cast<double>(head_maps.size()) * static_cast<double>(missing.size());
    for (double& v : agg) v /= denom;
    return agg;
}

void SchedulerConfig::apply_default_window(std::size_t steps) {
    window.clear();
    for (std::size_t t = 1; t <= std::min<std::size_t>(10, steps); ++t) window.insert(t);
}

void SchedulerConfig::validate(std::size_t steps, std::size_t layers) const {
    if (!(alpha_max > 0.0)) throw ConfigError("scheduler: alpha_max must be > 0");
    if (iterations < 1) throw ConfigError("scheduler: iterations must be >= 1");
    if (!(lambda >= 0.0)) throw ConfigError("scheduler: lambda must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("scheduler: learning_rate must be > 0");
    for (std::size_t t : window)
        if (t < 1 || t > steps) throw ConfigError("scheduler: window step outside [1, steps]");
    for (std::size_t l : augmented_layers)
        if (l >= layers) throw ConfigError("scheduler: augmented layer out of range");
}

std::vector<std::size_t> SchedulerConfig::layers_for(std::size_t layer_count) const {
    if (augmented_layers.empty()) {
        std::vector<std::size_t> all(layer_count);
        for (std::size_t l = 0; l < layer_count; ++l) all[l] = l;
        return all;
    }
    return {augmented_layers.begin(), augmented_layers.end()};
}

namespace {

// per-head injected attention map at the given strength
DenseMatrix head_map_at_alpha(const LayerContext& layer, std::size_t head, double alpha) {
    const DenseMatrix k_aug = inject_delta(layer.key_input, layer.delta, alpha);
    const DenseMatrix k_proj = matmul(k_aug, layer.wk_heads[head]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.q_heads[head].cols()));
    return softmax_rows(scaled(matmul_nt(layer.q_heads[head], k_proj), scale));
}

}  // namespace

double alignment_loss(double alpha, const StepContext& ctx) {
    double total = 0.0;
    for (const LayerContext& layer : ctx.layers) {
        std::vector<DenseMatrix> maps;
        maps.reserve(layer.q_heads.size());
        for (std::size_t h = 0; h < layer.q_heads.size(); ++h)
            maps.push_back(head_map_at_alpha(layer, h, alpha));
        const std::vector<double> agg = aggregate_missing(maps, ctx.missing);
        for (std::size_t q = 0; q < agg.size(); ++q) {
            const double r = agg[q] - layer.target[q];
            total += r * r;
        }
    }
    return total;
}

double loss_gradient(double alpha, const StepContext& ctx) {
    double total = 0.0;
    for (const LayerContext& layer : ctx.layers) {
        const std::size_t heads = layer.q_heads.size();
        const std::size_t queries = layer.q_heads.empty() ? 0 : layer.q_heads.front().rows();
        std::vector<double> agg(queries, 0.0);
        std::vector<double> dagg(queries, 0.0);
        for (std::size_t h = 0; h < heads; ++h) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(layer.q_heads[h].cols()));
            const DenseMatrix a = head_map_at_alpha(layer, h, alpha);
            // ds/dalpha does not depend on alpha: q (delta wk)^T / sqrt(d_k)
            const DenseMatrix dproj = matmul(layer.delta, layer.wk_heads[h]);
            const DenseMatrix dscores = scaled(matmul_nt(layer.q_heads[h], dproj), scale);
            for (std::size_t q = 0; q < queries; ++q) {
                double dot = 0.0;  // sum_j A_qj * D_qj
                for (std::size_t k = 0; k < a.cols(); ++k) dot += a(q, k) * dscores(q, k);
                for (int tok : ctx.missing) {
                    const auto k = static_cast<std::size_t>(tok);
                    agg[q] += a(q, k);
                    dagg[q] += a(q, k) * (dscores(q, k) - dot);
                }
            }
        }
        const double denom = static_cast<double>(heads) * static_cast<double>(ctx.missing.size());
        for (std::size_t q = 0; q < queries; ++q) {
            const double r = agg[q] / denom - layer.target[q];
            total += 2.0 * r * (dagg[q] / denom);
        }
    }
    return total;
}

std::pair<double, ScheduleEntry> optimize_alpha(const StepContext& ctx, const SchedulerConfig& cfg,
                                                double init_alpha) {
    const double loss0 = alignment_loss(0.0, ctx);
    double alpha = std::clamp(init_alpha, 0.0, cfg.alpha_max);
    double best_alpha = 0.0;
    double best_loss = loss0;
    if (alpha != 0.0) {
        const double li = alignment_loss(alpha, ctx);
        if (li < best_loss) {
            best_loss = li;
            best_alpha = alpha;
        }
    }

    double m = 0.0, v = 0.0;
    for (std::size_t k = 1; k <= cfg.iterations; ++k) {
        const double g = loss_gradient(alpha, ctx);
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(k)));
        const double v_hat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(k)));
        alpha -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps_adam);
        alpha = std::clamp(alpha, 0.0, cfg.alpha_max);
        const double loss = alignment_loss(alpha, ctx);
        if (loss < best_loss) {
            best_loss = loss;
            best_alpha = alpha;
        }
    }

    ScheduleEntry entry;
    entry.alpha_star = std::clamp(cfg.lambda * best_alpha, 0.0, cfg.lambda * cfg.alpha_max);
    entry.loss_at_zero = loss0;
    entry.loss_at_optimum = best_loss;
    entry.grad_at_optimum = std::abs(loss_gradient(best_alpha, ctx));
    entry.iterations_run = cfg.iterations;
    return {entry.alpha_star, entry};
}

namespace {

StepContext make_step_context(const ToyDenoiser& model, const DenseMatrix& z,
                              const EmbeddingSeq& text, const DeltaKey& delta,
                              const AttentionTrace& baseline, const std::vector<int>& present,
                              const std::vector<int>& missing, std::size_t step,
                              const std::vector<std::size_t>& layers) {
    StepContext ctx;
    ctx.missing = missing;
    ctx.layers.reserve(layers.size());
    for (std::size_t l : layers) {
        LayerContext lc;
        lc.key_input = text.matrix;
        lc.delta = delta.per_layer[l];
        lc.target = target_attention(baseline, present, step, l);
        const std::size_t heads = model.config().heads;
        lc.q_heads.reserve(heads);
        lc.wk_heads.reserve(heads);
        for (std::size_t h = 0; h < heads; ++h) {
            lc.q_heads.push_back(matmul(z, model.w_q(l, h)));
            lc.wk_heads.push_back(model.w_k(l, h));
        }
        ctx.layers.push_back(std::move(lc));
    }
    return ctx;
}

DeltaKRunResult run_pipeline(const std::string& prompt, const ToyDenoiser& model,
                             const OracleConfig* oracle, const ConceptPartition* forced,
                             const SchedulerConfig& sched_in, std::uint64_t seed) {
    const DenoiserConfig& cfg = model.config();
    SchedulerConfig sched = sched_in;
    sched.validate(cfg.steps, cfg.layers);

    DeltaKRunResult result;
    result.tokens = tokenize(prompt);
    const EmbeddingSeq emb = embed(result.tokens, seed, cfg.d_model);

    SampleResult base = run_sampler(model, emb, identity_hook(), seed);
    result.baseline = std::move(base.trace);
    result.baseline_final = std::move(base.final_latent);

    if (forced) {
        result.verdict.partition = *forced;
    } else {
        result.verdict = run_oracle(*oracle, prompt, result.tokens, result.baseline);
    }
    result.partition = result.verdict.partition;

    const std::vector<int> missing = result.partition.missing_indices();
    const std::vector<int> present = result.partition.present_indices();
    for (int idx : missing)
        if (idx < 0 || static_cast<std::size_t>(idx) >= result.tokens.size())
            throw InputError("run_delta_k: missing index out of range");

    if (missing.empty()) {
        result.augmented = result.baseline;
        result.final_latent = result.baseline_final;
        return result;
    }

    const TokenSeq masked = mask_prompt(result.tokens, result.partition);
    const EmbeddingSeq emb_mask = embed(masked, seed, cfg.d_model);
    result.delta = extract_delta_k(emb, emb_mask, cfg.layers);

    const std::vector<std::size_t> layers = sched.layers_for(cfg.layers);

    AttentionTrace& trace = result.augmented;
    trace.steps = cfg.steps;
    trace.layers = cfg.layers;
    trace.heads = cfg.heads;
    trace.queries = cfg.queries;
    trace.keys = emb.matrix.rows();

    double prev_best = 0.0;
    DenseMatrix z = init_latent(cfg, seed);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        double alpha = 0.0;
        if (sched.window.count(step)) {
            const StepContext ctx = make_step_context(model, z, emb, result.delta,
                                                      result.baseline, present, missing, step,
                                                      layers);
            const double init = sched.warm_start ? prev_best : 0.0;
            auto [alpha_star, entry] = optimize_alpha(ctx, sched, init);
            entry.step = step;
            result.schedule.entries.push_back(entry);
            alpha = alpha_star;
            prev_best = (sched.lambda > 0.0) ? alpha_star / sched.lambda : 0.0;
        }
        const double step_alpha = alpha;
        KeyHook hook = [&, step_alpha](std::size_t, std::size_t layer, const DenseMatrix& k) {
            if (std::find(layers.begin(), layers.end(), layer) == layers.end()) return k;
            return inject_delta(k, result.delta.per_layer[layer], step_alpha);
        };
        StepResult res = denoise_step(model, z, emb, step, hook);
        trace.maps.push_back(std::move(res.maps));
        trace.key_inputs.push_back(std::move(res.key_inputs));
        z = std::move(res.next_latent);
        trace.latents.push_back(z);
        trace.alpha_used.push_back(step_alpha);
    }
    result.final_latent = std::move(z);
    return result;
}

}  // namespace

DeltaKRunResult run_delta_k(const std::string& prompt, const ToyDenoiser& model,
                            const OracleConfig& oracle, const SchedulerConfig& sched,
                            std::uint64_t seed) {
    return run_pipeline(prompt, model, &oracle, nullptr, sched, seed);
}

DeltaKRunResult run_delta_k_forced(const std::string& prompt, const ToyDenoiser& model,
                                   const ConceptPartition& partition,
                                   const SchedulerConfig& sched, std::uint64_t seed) {
    return run_pipeline(prompt, model, nullptr, &partition, sched, seed);
}

}  // namespace deltak
