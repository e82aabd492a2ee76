#pragma once

// Period-by-period self-training loop. For each period the current model
// first predicts the period's pool (these predictions are what gets
// evaluated), then pseudo-labels are selected with adaptive thresholds,
// merged with the labeled pool, augmented, mixed up, and the model is
// retrained or fine-tuned on the combined set.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "adapt/augmentation.hpp"
#include "adapt/data.hpp"
#include "adapt/learners.hpp"
#include "adapt/pseudo_label.hpp"

namespace adapt {

enum class AdaptMode { adapt, oracle, offline, fixed_threshold_baseline };

const char* to_string(AdaptMode mode) noexcept;
AdaptMode parse_adapt_mode(const std::string& s);

struct AdaptConfig {
    Thresholds thresholds{0.9, 0.8};
    double lambda = 0.2;
    double p_a = 0.1;
    double alpha = 0.1;
    AdaptMode mode = AdaptMode::adapt;
    bool source_free = false;
    std::size_t active_budget = 0;  // k annotations per period; 0 disables
    std::uint64_t seed = 0;

    // ablation switches
    bool adaptive_thresholds = true;
    bool augmentation = true;
    bool mixup = true;

    bool chain_thresholds = false;  // mix with last period's updated thresholds instead of the base
    bool invert_mask = false;
};

// Type-level invariants (thresholds in [0.5, 1], lambda in [0, 1], ...).
void validate(const AdaptConfig& cfg);
// Empty string when inside the hyperparameter search ranges.
std::string check_ranges(const AdaptConfig& cfg);

struct PeriodRecord {
    std::int64_t period_id = 0;
    ProbabilityMatrix probs;  // from the model entering the period
    LabelVector predictions;
    PseudoLabelBatch batch;
    ClassMeans means;
    Thresholds updated;
    std::vector<std::size_t> annotated;  // pool rows sent for annotation
    std::size_t merged_rows = 0;
    std::size_t augmented_rows = 0;
    std::size_t mixup_rows = 0;
    std::size_t combined_rows = 0;
    std::size_t labeled_pool_rows = 0;  // D_l plus all annotations so far
    std::size_t ground_truth_used = 0;  // labels of this period revealed to training
    std::size_t merged_from_initial = 0;  // rows of D_m that came from the initial labeled set
    bool retrained = false;
    std::uint64_t model_checksum = 0;  // of the model leaving the period
    double seconds = 0.0;
};

struct AdaptRun {
    AdaptConfig config;
    LearnerKind learner = LearnerKind::logistic;
    std::int64_t initial_period_id = -1;
    std::size_t initial_labeled_rows = 0;
    std::vector<std::shared_ptr<const Learner>> models;  // M_0 .. M_T
    std::vector<PeriodRecord> periods;

    std::size_t ground_truth_labels() const;
    const Learner& final_model() const { return *models.back(); }
};

AdaptRun run_adapt(const LabeledDataset& labeled, const TemporalDataset& stream, const AdaptConfig& cfg,
                   const LearnerSpec& learner);

// The k rows with the smallest max-class probability, ties by row index.
std::vector<std::size_t> active_select(const ProbabilityMatrix& probs, std::size_t k);

// D_l u annotated u D_p, or annotated u D_p in source-free mode. The pseudo
// and annotated index sets refer to the same period pool and must be disjoint.
LabeledDataset merge_labeled(const LabeledDataset& labeled, const LabeledDataset& pseudo,
                             std::span<const std::size_t> pseudo_indices, const LabeledDataset& annotated,
                             std::span<const std::size_t> annotated_indices, bool source_free);

}  // namespace adapt
