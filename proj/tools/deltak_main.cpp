#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deltak/commands.hpp"
#include "deltak/error.hpp"
#include "deltak/run_config.hpp"
#include "deltak/version.hpp"

namespace {

deltak::RunConfig build_run_config(const std::string& config_path,
                                   const std::vector<std::string>& sets, bool seed_given,
                                   std::uint64_t seed, const std::string& out_dir) {
    deltak::RunConfig cfg;
    if (!config_path.empty()) cfg = deltak::load_config_file(config_path);
    deltak::apply_overrides(cfg, sets);
    if (seed_given) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deltak: differential-key cross-attention intervention sandbox"};
    app.set_version_flag("--version", deltak::kProjectVersion);
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "baseline + augmented sampling run");
    std::string run_config_path, run_out;
    std::vector<std::string> run_sets;
    std::uint64_t run_seed = 0;
    auto* run_seed_opt = run->add_option("--seed", run_seed, "run seed (latent init, embeddings)");
    run->add_option("--config", run_config_path, "flat key=value config file");
    run->add_option("--out", run_out, "output directory");
    run->add_option("--set", run_sets, "override, e.g. --set scheduler.alpha_max=0.04");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "intensity / CV / entropy series from a trace");
    deltak::AnalyzeOptions aopt;
    analyze->add_option("trace", aopt.trace_path, "trace file (.jsonl)")->required();
    analyze->add_option("--out", aopt.out_dir, "output directory");
    analyze->add_option("--metrics", aopt.metrics, "subset of intensity,cv,entropy");
    analyze->add_option("--tokens", aopt.token_concepts, "concept string(s) to track");
    analyze->add_option("--layers", aopt.layer_subset, "layer subset (0-based)");
    analyze->add_flag("--auc", aopt.auc, "early-window omission detectability");
    analyze->add_option("--present", aopt.present_override, "present concept(s) for AUC labels");
    analyze->add_option("--missing", aopt.missing_override, "missing concept(s) for AUC labels");
    analyze->add_option("--auc-window", aopt.auc_window, "early steps scored for AUC");

    // verify
    auto* verify = app.add_subcommand("verify", "theorem property suites");
    deltak::VerifyOptions vopt;
    verify->add_option("--theorem", vopt.theorem, "1, 2 or all");
    verify->add_option("--trials", vopt.trials, "Monte Carlo trials per dim");
    verify->add_option("--instances", vopt.instances, "mass-concentration instances");
    verify->add_option("--seed", vopt.seed, "experiment seed");
    verify->add_option("--out", vopt.out_dir, "output directory");

    // export
    auto* exp = app.add_subcommand("export", "plot-ready CSV/JSON re-serialization");
    deltak::ExportOptions eopt;
    exp->add_option("trace", eopt.trace_path, "trace file (.jsonl)")->required();
    exp->add_option("--format", eopt.format, "csv or json");
    exp->add_option("--out", eopt.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return deltak::kExitFailure;
    }

    if (run->parsed()) {
        try {
            const deltak::RunConfig cfg = build_run_config(
                run_config_path, run_sets, run_seed_opt->count() > 0, run_seed, run_out);
            return deltak::cmd_run(cfg);
        } catch (const deltak::Error& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return deltak::kExitFailure;
        }
    }
    if (analyze->parsed()) return deltak::cmd_analyze(aopt);
    if (verify->parsed()) return deltak::cmd_verify(vopt);
    if (exp->parsed()) return deltak::cmd_export(eopt);
    return deltak::kExitFailure;
}
