#include "deltak/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "deltak/error.hpp"
#include "deltak/metrics.hpp"
#include "deltak/theorems.hpp"
#include "deltak/trace_io.hpp"
#include "deltak/version.hpp"

namespace deltak {

using nlohmann::json;

namespace {

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitFailure;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << '\n';
        if (!e.raw_payload.empty()) std::cerr << "payload: " << e.raw_payload << '\n';
        return kExitProperty;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitProperty;
    }
}

json partition_json(const ConceptPartition& partition) {
    auto spans = [](const std::vector<ConceptSpan>& v) {
        json arr = json::array();
        for (const auto& s : v) arr.push_back({{"concept", s.phrase}, {"indices", s.indices}});
        return arr;
    };
    return {{"present", spans(partition.present)}, {"missing", spans(partition.missing)}};
}

json schedule_json(const ScheduleRecord& schedule) {
    json arr = json::array();
    for (const auto& e : schedule.entries)
        arr.push_back({{"step", e.step},
                       {"alpha", e.alpha_star},
                       {"loss_at_zero", e.loss_at_zero},
                       {"loss_at_optimum", e.loss_at_optimum},
                       {"grad_at_optimum", e.grad_at_optimum},
                       {"iterations", e.iterations_run}});
    return arr;
}

std::filesystem::path out_path(const std::string& dir, const std::string& name) {
    return std::filesystem::path(dir) / name;
}

}  // namespace

int cmd_run(const RunConfig& cfg_in) {
    return guarded([&]() {
        RunConfig cfg = cfg_in;
        cfg.finalize();

        const ToyDenoiser model(cfg.denoiser);
        const DeltaKRunResult result =
            run_delta_k(cfg.prompt, model, cfg.oracle, cfg.scheduler, cfg.seed);

        TraceHeader header;
        header.version_major = kTraceFormatMajor;
        header.version_minor = kTraceFormatMinor;
        header.config_echo = cfg.echo();
        header.prompt = cfg.prompt;
        header.seed = cfg.seed;
        header.tokens = result.tokens;

        auto latent_checksum = [](const DenseMatrix& m) { return checksum_hex(m); };

        header.kind = "baseline";
        write_trace_file(out_path(cfg.out_dir, "baseline.trace.jsonl").string(), header,
                         result.baseline, ScheduleRecord{}, result.partition,
                         latent_checksum(result.baseline_final));
        header.kind = "augmented";
        write_trace_file(out_path(cfg.out_dir, "augmented.trace.jsonl").string(), header,
                         result.augmented, result.schedule, result.partition,
                         latent_checksum(result.final_latent));

        // per-token intensity deltas over the reporting window
        std::vector<std::size_t> window(cfg.scheduler.window.begin(), cfg.scheduler.window.end());
        if (window.empty())
            for (std::size_t t = 1; t <= std::min(cfg.oracle.window, cfg.denoiser.steps); ++t)
                window.push_back(t);
        json deltas = json::array();
        for (std::size_t i = 0; i < result.tokens.size(); ++i) {
            double base_mean = 0.0, aug_mean = 0.0;
            for (std::size_t t : window) {
                base_mean += token_intensity(result.baseline, {static_cast<int>(i)}, t);
                aug_mean += token_intensity(result.augmented, {static_cast<int>(i)}, t);
            }
            base_mean /= static_cast<double>(window.size());
            aug_mean /= static_cast<double>(window.size());
            deltas.push_back({{"token", result.tokens.surface[i]},
                              {"index", i},
                              {"baseline", base_mean},
                              {"augmented", aug_mean},
                              {"delta", aug_mean - base_mean}});
        }

        json summary;
        summary["config"] = cfg.echo();
        summary["partition"] = partition_json(result.partition);
        summary["schedule"] = schedule_json(result.schedule);
        summary["augmented_steps"] = result.schedule.entries.size();
        summary["window_steps"] = window;
        summary["intensity"] = deltas;
        summary["baseline_final_checksum"] = latent_checksum(result.baseline_final);
        summary["augmented_final_checksum"] = latent_checksum(result.final_latent);
        summary["warnings"] = result.verdict.warnings;
        atomic_write_text(out_path(cfg.out_dir, "summary.json").string(), summary.dump(2) + "\n");

        std::cout << "run: " << result.schedule.entries.size() << " augmented step(s), "
                  << result.partition.missing.size() << " missing concept(s); artifacts in "
                  << cfg.out_dir << '\n';
        return kExitOk;
    });
}

namespace {

struct TokenSet {
    std::string label;
    std::vector<int> indices;
};

std::vector<TokenSet> analyze_token_sets(const AnalyzeOptions& opt, const LoadedTrace& loaded) {
    std::vector<TokenSet> sets;
    if (!opt.token_concepts.empty()) {
        for (const auto& phrase : opt.token_concepts) {
            TokenSet s{phrase, concept_token_indices(loaded.header.tokens, phrase)};
            if (s.indices.empty())
                throw InputError("analyze: concept \"" + phrase + "\" not found in trace tokens");
            sets.push_back(std::move(s));
        }
        return sets;
    }
    for (const auto& span : loaded.partition.present)
        if (!span.indices.empty()) sets.push_back({"present:" + span.phrase, span.indices});
    for (const auto& span : loaded.partition.missing)
        if (!span.indices.empty()) sets.push_back({"missing:" + span.phrase, span.indices});
    if (sets.empty()) {
        for (std::size_t i = 0; i < loaded.header.tokens.size(); ++i)
            sets.push_back({loaded.header.tokens.surface[i], {static_cast<int>(i)}});
    }
    return sets;
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& opt) {
    return guarded([&]() {
        const LoadedTrace loaded = load_trace_file(opt.trace_path);
        const AttentionTrace& trace = loaded.trace;

        std::set<std::string> wanted(opt.metrics.begin(), opt.metrics.end());
        if (wanted.empty()) wanted = {"intensity", "cv", "entropy"};
        for (const auto& m : wanted)
            if (m != "intensity" && m != "cv" && m != "entropy")
                throw ConfigError("analyze: unknown metric \"" + m + "\"");

        const std::vector<TokenSet> sets = analyze_token_sets(opt, loaded);
        std::vector<std::size_t> layers = opt.layer_subset;
        for (std::size_t l : layers)
            if (l >= trace.layers) throw ConfigError("analyze: layer out of range");

        std::ostringstream csv;
        csv << "step,metric,value,label\n";
        auto emit = [&](std::size_t step, const char* metric, double value,
                        const std::string& label) {
            csv << step << ',' << metric << ',' << format_double(value) << ',' << label << '\n';
        };

        if (wanted.count("intensity"))
            for (const auto& set : sets)
                for (std::size_t t = 1; t <= trace.steps; ++t) {
                    const auto profile = token_spatial_profile(trace, set.indices, t, layers);
                    const double mean =
                        std::accumulate(profile.begin(), profile.end(), 0.0) /
                        static_cast<double>(profile.size());
                    emit(t, "intensity", mean, set.label);
                }

        if (wanted.count("cv"))
            for (const auto& set : sets)
                for (std::size_t t = 1; t <= trace.steps; ++t) {
                    const auto profile = token_spatial_profile(trace, set.indices, t, layers);
                    emit(t, "cv", coefficient_of_variation(profile), set.label);
                }

        if (wanted.count("entropy")) {
            std::vector<std::size_t> stage = layers;
            if (stage.empty()) {
                stage.resize(trace.layers);
                std::iota(stage.begin(), stage.end(), 0);
            }
            const std::string label = opt.layer_subset.empty() ? "all-layers" : "layer-subset";
            for (std::size_t t = 1; t <= trace.steps; ++t) {
                std::vector<DenseMatrix> heads;
                for (std::size_t l : stage)
                    for (std::size_t h = 0; h < trace.heads; ++h)
                        heads.push_back(trace.map_at(t, l, h));
                emit(t, "entropy", stage_entropy(heads), label);
            }
        }

        if (opt.auc) {
            std::vector<int> present, missing;
            if (!opt.present_override.empty() || !opt.missing_override.empty()) {
                for (const auto& phrase : opt.present_override)
                    for (int i : concept_token_indices(loaded.header.tokens, phrase))
                        present.push_back(i);
                for (const auto& phrase : opt.missing_override)
                    for (int i : concept_token_indices(loaded.header.tokens, phrase))
                        missing.push_back(i);
            } else {
                present = loaded.partition.present_indices();
                missing = loaded.partition.missing_indices();
            }
            if (present.empty() || missing.empty())
                throw InputError("analyze: AUC needs both present and missing labels");
            const std::size_t w = std::min(opt.auc_window, trace.steps);
            std::vector<double> scores;
            std::vector<ConceptLabel> labels;
            auto early_score = [&](int tok) {
                double acc = 0.0;
                for (std::size_t t = 1; t <= w; ++t)
                    acc += token_intensity(trace, {tok}, t);
                return acc / static_cast<double>(w);
            };
            for (int tok : present) {
                scores.push_back(early_score(tok));
                labels.push_back(ConceptLabel::present);
            }
            for (int tok : missing) {
                scores.push_back(early_score(tok));
                labels.push_back(ConceptLabel::missing);
            }
            emit(w, "auc", auc_roc(scores, labels), "missing-detectability");
        }

        atomic_write_text(out_path(opt.out_dir, "analysis.csv").string(), csv.str());
        std::cout << "analyze: wrote " << out_path(opt.out_dir, "analysis.csv").string() << '\n';
        return kExitOk;
    });
}

int cmd_verify(const VerifyOptions& opt) {
    return guarded([&]() {
        if (opt.theorem != "all" && opt.theorem != "1" && opt.theorem != "2")
            throw ConfigError("verify: --theorem must be 1, 2 or all");

        bool all_ok = true;
        json report;
        report["seed"] = opt.seed;

        if (opt.theorem == "1" || opt.theorem == "all") {
            OrthogonalityExperiment exp;
            exp.trials = opt.trials;
            exp.seed = opt.seed;
            exp.validate();
            const TailReport tails = mc_orthogonality(exp);

            bool non_increasing = true;
            for (std::size_t i = 1; i < tails.tails.size(); ++i)
                if (tails.tails[i] > tails.tails[i - 1]) non_increasing = false;
            const bool fit_ok = tails.fit_points < 2 || tails.r_squared >= 0.9;
            const bool ok = non_increasing && fit_ok;
            all_ok = all_ok && ok;

            json jt;
            jt["dims"] = tails.dims;
            jt["tails"] = tails.tails;
            jt["zero_tail_dims"] = tails.zero_tail_dims;
            jt["fit_points"] = tails.fit_points;
            jt["slope"] = tails.slope;
            jt["intercept"] = tails.intercept;
            jt["r_squared"] = tails.r_squared;
            jt["fitted_c"] = tails.fitted_c;
            jt["alpha"] = exp.alpha;
            jt["epsilon"] = exp.epsilon;
            jt["trials"] = exp.trials;
            jt["tails_non_increasing"] = non_increasing;
            jt["passed"] = ok;
            report["orthogonality"] = jt;

            std::ostringstream csv;
            csv << "dim,tail\n";
            for (std::size_t i = 0; i < tails.dims.size(); ++i)
                csv << tails.dims[i] << ',' << format_double(tails.tails[i]) << '\n';
            atomic_write_text(out_path(opt.out_dir, "tail_report.csv").string(), csv.str());

            std::cout << (ok ? "[PASS]" : "[FAIL]")
                      << " orthogonality tails: non-increasing=" << (non_increasing ? "yes" : "no")
                      << " r2=" << tails.r_squared << " fitted_c=" << tails.fitted_c << '\n';
        }

        if (opt.theorem == "2" || opt.theorem == "all") {
            const MassSuiteReport suite = run_mass_concentration_suite(opt.instances, opt.seed);
            const bool ok = suite.all_passed() && suite.max_closed_form_gap <= 1e-12;
            all_ok = all_ok && ok;

            json jm;
            jm["instances"] = suite.instances;
            jm["failures"] = suite.failures;
            jm["max_closed_form_gap"] = suite.max_closed_form_gap;
            jm["passed"] = ok;
            report["mass_concentration"] = jm;

            std::cout << (ok ? "[PASS]" : "[FAIL]") << " mass concentration: " << suite.instances
                      << " instances, " << suite.failures
                      << " failure(s), closed-form gap=" << suite.max_closed_form_gap << '\n';
        }

        report["passed"] = all_ok;
        atomic_write_text(out_path(opt.out_dir, "verify_report.json").string(),
                          report.dump(2) + "\n");
        return all_ok ? kExitOk : kExitProperty;
    });
}

int cmd_export(const ExportOptions& opt) {
    return guarded([&]() {
        if (opt.format != "csv" && opt.format != "json")
            throw ConfigError("export: unknown format \"" + opt.format + "\" (csv or json)");
        const LoadedTrace loaded = load_trace_file(opt.trace_path);
        const AttentionTrace& trace = loaded.trace;

        if (opt.format == "csv") {
            std::ostringstream csv;
            csv << "step,layer,head,query,key,alpha,value\n";
            for (std::size_t t = 1; t <= trace.steps; ++t)
                for (std::size_t l = 0; l < trace.layers; ++l)
                    for (std::size_t h = 0; h < trace.heads; ++h) {
                        const DenseMatrix& m = trace.map_at(t, l, h);
                        for (std::size_t q = 0; q < m.rows(); ++q)
                            for (std::size_t k = 0; k < m.cols(); ++k)
                                csv << t << ',' << l << ',' << h << ',' << q << ',' << k << ','
                                    << format_double(trace.alpha_used[t - 1]) << ','
                                    << format_double(m(q, k)) << '\n';
                    }
            atomic_write_text(out_path(opt.out_dir, "trace_export.csv").string(), csv.str());
            std::cout << "export: wrote " << out_path(opt.out_dir, "trace_export.csv").string()
                      << '\n';
        } else {
            json j;
            j["steps"] = trace.steps;
            j["layers"] = trace.layers;
            j["heads"] = trace.heads;
            j["queries"] = trace.queries;
            j["keys"] = trace.keys;
            j["tokens"] = loaded.header.tokens.surface;
            j["alphas"] = trace.alpha_used;
            json steps = json::array();
            for (std::size_t t = 1; t <= trace.steps; ++t) {
                json layers = json::array();
                for (std::size_t l = 0; l < trace.layers; ++l) {
                    json heads = json::array();
                    for (std::size_t h = 0; h < trace.heads; ++h) {
                        const DenseMatrix& m = trace.map_at(t, l, h);
                        json rows = json::array();
                        for (std::size_t q = 0; q < m.rows(); ++q) {
                            json row = json::array();
                            for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(q, k));
                            rows.push_back(std::move(row));
                        }
                        heads.push_back(std::move(rows));
                    }
                    layers.push_back(std::move(heads));
                }
                steps.push_back(std::move(layers));
            }
            j["maps"] = std::move(steps);
            atomic_write_text(out_path(opt.out_dir, "trace_export.json").string(),
                              j.dump() + "\n");
            std::cout << "export: wrote " << out_path(opt.out_dir, "trace_export.json").string()
                      << '\n';
        }
        return kExitOk;
    });
}

}  // namespace deltak
