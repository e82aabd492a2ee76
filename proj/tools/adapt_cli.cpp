#include <iostream>

#include "CLI11.hpp"
#include "adapt/commands.hpp"

namespace {

// --no-X style switches map onto optional<bool> overrides.
void add_ablation_flags(CLI::App* cmd, adapt::ConfigOverrides& o, bool& no_adaptive, bool& no_aug, bool& no_mix) {
    cmd->add_option("--mode", o.mode, "adapt | oracle | offline | fixed_threshold");
    cmd->add_flag("--no-adaptive-thresholds", no_adaptive, "keep thresholds fixed at their base values");
    cmd->add_flag("--no-augmentation", no_aug, "skip the augmentation step");
    cmd->add_flag("--no-mixup", no_mix, "skip the mixup step");
    cmd->add_option("--active-budget", o.active_budget, "annotations per period");
    cmd->add_option("--seeds", o.seeds, "evaluation seeds")->expected(1, -1);
    cmd->add_option("--output", o.output_dir, "output directory (overrides the config)");
    cmd->add_flag("--override-ranges", o.override_ranges, "allow hyperparameters outside the search ranges");
}

void finish(adapt::ConfigOverrides& o, bool no_adaptive, bool no_aug, bool no_mix, bool source_free) {
    if (no_adaptive) o.adaptive_thresholds = false;
    if (no_aug) o.augmentation = false;
    if (no_mix) o.mixup = false;
    if (source_free) o.source_free = true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drift-aware pseudo-labeling experiments for malware classifiers"};
    app.require_subcommand(1);

    std::string config;
    adapt::ConfigOverrides overrides;
    bool no_adaptive = false, no_aug = false, no_mix = false, source_free = false;

    auto* run = app.add_subcommand("run", "run the update loop over a dataset manifest");
    run->add_option("-c,--config", config, "experiment config (JSON)")->required();
    add_ablation_flags(run, overrides, no_adaptive, no_aug, no_mix);
    run->add_flag("--source-free", source_free, "merge only pseudo-labels and annotations");

    auto* search = app.add_subcommand("search", "random hyperparameter search on validation periods");
    search->add_option("-c,--config", config, "experiment config (JSON)")->required();
    search->add_option("--budget", overrides.budget, "number of trials (default 200)");
    add_ablation_flags(search, overrides, no_adaptive, no_aug, no_mix);

    auto* drift = app.add_subcommand("drift", "per-period OTDD and FDD against the train periods");
    std::string manifest, out, model;
    adapt::DriftOptions drift_opts;
    drift->add_option("-m,--manifest", manifest, "dataset manifest")->required();
    drift->add_option("--model", model, "trained mlp model for the fdd column");
    drift->add_flag("--standardize", drift_opts.standardize, "standardize features before OTDD");
    drift->add_option("--dims-cap", drift_opts.dims_cap, "full covariance up to this many dims");
    drift->add_option("-o,--out", out, "output CSV")->required();

    auto* report = app.add_subcommand("report", "rebuild metric exports from a run manifest");
    std::string run_manifest, report_dir;
    report->add_option("-r,--run", run_manifest, "run_manifest.jsonl")->required();
    report->add_option("-o,--out", report_dir, "output directory")->required();

    auto* synth = app.add_subcommand("synth", "write a rotating two-Gaussian stream");
    adapt::SynthOptions synth_opts;
    synth->add_option("-o,--out", out, "manifest path; period files go next to it")->required();
    synth->add_option("--n-per-class", synth_opts.spec.n_per_class);
    synth->add_option("--radius", synth_opts.spec.radius);
    synth->add_option("--sigma2", synth_opts.spec.sigma2);
    synth->add_option("--rotation", synth_opts.spec.rotation, "total rotation in radians");
    synth->add_option("--periods", synth_opts.spec.periods);
    synth->add_option("--imbalance", synth_opts.spec.imbalance, "benign:malware ratio");
    synth->add_option("--seed", synth_opts.spec.seed);
    synth->add_option("--train-periods", synth_opts.train_periods);
    synth->add_option("--validation-periods", synth_opts.validation_periods);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? adapt::kExitOk : adapt::kExitValidation;
    }
    finish(overrides, no_adaptive, no_aug, no_mix, source_free);

    if (*run) return adapt::cmd_run(config, std::cerr, overrides);
    if (*search) return adapt::cmd_search(config, std::cerr, overrides);
    if (*drift) {
        if (!model.empty()) drift_opts.model = model;
        return adapt::cmd_drift(manifest, drift_opts, out, std::cerr);
    }
    if (*report) return adapt::cmd_report(run_manifest, report_dir, std::cerr);
    if (*synth) return adapt::cmd_synth(synth_opts, out, std::cerr);
    return adapt::kExitValidation;
}
