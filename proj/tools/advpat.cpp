// advpat: command-line driver for the adversarial pattern pipeline.
//
// Subcommands map onto the pipeline stages; `run` executes the whole chain.
// One JSON config drives everything, with flags overriding single fields.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "advpat/pipeline.hpp"

namespace {

advpat::ExperimentConfig load_config(const std::string& config_path, long long seed_override,
                                     const std::string& mode_override,
                                     const std::string& out_override) {
    advpat::json j = advpat::json::object();
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw advpat::IoError("cannot open config file: " + config_path);
        j = advpat::json::parse(is);
    }
    advpat::ExperimentConfig cfg = advpat::ExperimentConfig::from_json(j);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!mode_override.empty()) cfg.attack.mode = advpat::attack_mode_from_name(mode_override);
    if (!out_override.empty()) cfg.output_dir = out_override;
    return cfg;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const advpat::ConfigError*>(&e)) return 2;
    if (dynamic_cast<const advpat::IoError*>(&e)) return 3;
    if (dynamic_cast<const advpat::GeometryError*>(&e)) return 4;
    if (dynamic_cast<const advpat::TrainingError*>(&e)) return 5;
    if (dynamic_cast<const advpat::OptimizationError*>(&e)) return 6;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"advpat: adversarially transformable patterns against re-ID models"};
    app.require_subcommand(1);

    std::string config_path, mode_override, out_override, stage_override, ingest_path;
    long long seed_override = -1;
    app.add_option("--config", config_path, "JSON experiment config file");
    app.add_option("--seed", seed_override, "global seed override");
    app.add_option("--mode", mode_override, "attack mode: evade|impersonate");
    app.add_option("--out", out_override, "output directory override");
    app.add_option("--stage", stage_override, "objective stage: pairwise|triplet|robust");

    auto* cmd_dataset = app.add_subcommand("make-dataset", "generate the synthetic dataset");
    auto* cmd_train = app.add_subcommand("train-model", "train the re-ID model");
    auto* cmd_genset = app.add_subcommand("build-genset", "build the adversary generating set");
    auto* cmd_attack = app.add_subcommand("attack", "optimize the adversarial pattern");
    auto* cmd_eval = app.add_subcommand("evaluate", "run the retrieval evaluation");
    auto* cmd_report = app.add_subcommand("report", "print the metrics table of a finished run");
    auto* cmd_run = app.add_subcommand("run", "full pipeline");
    cmd_dataset->add_option("--ingest", ingest_path, "ingest an existing dataset folder instead");

    CLI11_PARSE(app, argc, argv);

    try {
        advpat::ExperimentConfig cfg =
            load_config(config_path, seed_override, mode_override, out_override);
        if (!stage_override.empty()) cfg.attack.stage = advpat::stage_from_name(stage_override);
        if (!ingest_path.empty()) {
            cfg.dataset_source = "ingest";
            cfg.dataset_path = ingest_path;
        }
        advpat::Experiment exp(cfg);

        if (cmd_report->parsed()) {
            const auto path = cfg.output_dir / "evaluation" / "metrics.txt";
            std::ifstream is(path);
            if (!is) throw advpat::IoError("no metrics at " + path.string() + "; run `evaluate` first");
            std::cout << is.rdbuf();
            return 0;
        }
        if (cmd_run->parsed()) {
            advpat::ReportBundle rb = exp.run();
            std::cout << "model held-out rank-1: " << rb.model_holdout_rank1 << "\n\n"
                      << rb.metrics.to_text() << "\npattern: " << rb.pattern_png.string()
                      << "\ntrace:   " << rb.trace_csv.string()
                      << "\nmetrics: " << rb.metrics_csv.string() << "\n";
            return 0;
        }

        advpat::Dataset ds = exp.stage_dataset();
        if (cmd_dataset->parsed()) {
            std::cout << "dataset: " << ds.entries.size() << " images, " << ds.identity_count()
                      << " identities, " << ds.camera_count() << " cameras -> "
                      << (cfg.output_dir / "dataset").string() << "\n";
            return 0;
        }
        advpat::ReIDModel model = exp.stage_train(ds);
        if (cmd_train->parsed()) {
            std::cout << "trained " << advpat::variant_name(model.variant)
                      << ", held-out cross-camera rank-1 = " << model.holdout_rank1 << "\n";
            return 0;
        }
        advpat::GeneratingSet gs = exp.stage_genset(ds);
        if (cmd_genset->parsed()) {
            int synth = 0;
            for (const auto& e : gs.entries) synth += e.synthesized;
            std::cout << "generating set: " << gs.entries.size() << " entries (" << synth
                      << " synthesized) across " << gs.camera_count() << " cameras\n";
            return 0;
        }
        auto [pattern, mask] = exp.stage_attack(ds, model, gs);
        if (cmd_attack->parsed()) {
            std::cout << "pattern optimized -> "
                      << (cfg.output_dir / "attack" / "pattern.png").string() << "\n";
            return 0;
        }
        advpat::MetricsTable metrics = exp.stage_evaluate(ds, model, pattern, mask);
        std::cout << metrics.to_text();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
