#pragma once

// Experiment configuration and the command implementations behind the CLI.
// Commands write data to files and diagnostics to `err`, and return the exit
// code: 0 success, 1 validation error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adapt/adapt_engine.hpp"
#include "adapt/drift_metrics.hpp"
#include "adapt/evaluation.hpp"
#include "adapt/learners.hpp"
#include "adapt/synthetic.hpp"

namespace adapt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct EvaluationOptions {
    std::size_t bins = 10;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    bool sample_weighted = false;
};

struct SearchOptions {
    std::size_t budget = 200;
    std::uint64_t seed = 0;
};

struct ExperimentConfig {
    std::string manifest;  // relative paths resolve against base_dir
    LearnerSpec learner = default_learner_spec(LearnerKind::logistic);
    AdaptConfig adapt;
    EvaluationOptions evaluation;
    SearchOptions search;
    std::string output_dir = "out";
    bool override_ranges = false;
    std::filesystem::path base_dir;

    std::filesystem::path manifest_path() const;
    std::filesystem::path output_path() const;
};

// Sections: data, learner, adapt, evaluation, search, output, plus the
// top-level override_ranges flag. Unknown keys anywhere are errors.
ExperimentConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);
// Type invariants always; search ranges unless override_ranges.
void validate(const ExperimentConfig& cfg);

// Samples the search dimensions of AdaptConfig; other fields come from `base`.
AdaptConfig sample_adapt_config(const AdaptConfig& base, Rng& rng);

// One stream period of one seed, in the form persisted to the run manifest.
// Everything the report needs is recoverable from these rows.
struct PeriodRow {
    std::uint64_t seed = 0;
    std::int64_t period_id = 0;
    std::size_t rows = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t pseudo = 0;
    PseudoLabelErrors pseudo_errors;
    std::size_t annotated = 0;
    std::size_t labeled_pool = 0;
    std::size_t merged = 0, augmented = 0, mixup = 0, combined = 0;
    Thresholds thresholds;
    std::uint64_t model_checksum = 0;
    double seconds = 0.0;
    std::vector<std::size_t> calib_count;
    std::vector<double> calib_confidence;
    std::vector<double> calib_correct;
};

std::vector<PeriodRow> period_rows(const AdaptRun& run, const TemporalDataset& stream, std::uint64_t seed,
                                   std::size_t bins);

struct RunArtifacts {
    std::string metrics_csv;
    std::string summary_csv;
    std::string calibration_csv;
};

// Renders metric exports from period rows; identical for cmd_run and cmd_report.
RunArtifacts render_metrics(const std::vector<PeriodRow>& rows, std::uint64_t hash, std::size_t num_classes,
                            std::size_t bins, bool sample_weighted);

struct RunOutcome {
    std::vector<AdaptRun> runs;  // one per seed
    std::vector<PeriodRow> rows;
    RunArtifacts artifacts;
    std::uint64_t hash = 0;
};

// Library entry points (throw adapt::Error).
RunOutcome execute_run(const ExperimentConfig& cfg);

struct Trial {
    std::size_t index = 0;
    LearnerSpec learner;
    AdaptConfig adapt;
    double score = 0.0;  // mean validation F1 over seeds
};

struct SearchOutcome {
    std::vector<Trial> trials;
    std::size_t best = 0;
};

SearchOutcome execute_search(const ExperimentConfig& cfg);

struct DriftOptions {
    std::optional<std::filesystem::path> model;  // mlp for the fdd column
    bool standardize = false;
    std::size_t dims_cap = kDefaultCovarianceDimsCap;
};

struct DriftRow {
    std::int64_t period_id = 0;
    double otdd = 0.0;
    std::optional<double> fdd;
};

// Each period against the flattened train periods.
std::vector<DriftRow> drift_table(const LabeledDataset& reference, const TemporalDataset& periods,
                                  const Learner* model, bool standardize, std::size_t dims_cap);

// Command-line overrides applied on top of a loaded config (and hashed with it).
struct ConfigOverrides {
    std::optional<std::string> mode;
    std::optional<bool> adaptive_thresholds;
    std::optional<bool> augmentation;
    std::optional<bool> mixup;
    std::optional<bool> source_free;
    std::optional<std::size_t> active_budget;
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<std::size_t> budget;
    std::optional<std::string> output_dir;
    bool override_ranges = false;
};

void apply(const ConfigOverrides& o, ExperimentConfig& cfg);

// CLI commands.
int cmd_run(const std::filesystem::path& config, std::ostream& err, const ConfigOverrides& overrides = {});
int cmd_search(const std::filesystem::path& config, std::ostream& err, const ConfigOverrides& overrides = {});
int cmd_drift(const std::filesystem::path& manifest, const DriftOptions& opts, const std::filesystem::path& out,
              std::ostream& err);
int cmd_report(const std::filesystem::path& run_manifest, const std::filesystem::path& out_dir, std::ostream& err);

struct SynthOptions {
    RotatingDriftSpec spec;
    std::size_t train_periods = 1;
    std::size_t validation_periods = 0;
};

int cmd_synth(const SynthOptions& opts, const std::filesystem::path& manifest_out, std::ostream& err);

}  // namespace adapt
