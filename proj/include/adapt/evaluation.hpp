#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "adapt/data.hpp"
#include "adapt/pseudo_label.hpp"

namespace adapt {

struct AdaptRun;

// Malware is the positive class. Ratios with a zero denominator are 0.
struct PeriodMetrics {
    std::int64_t period_id = 0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double f1 = 0.0, fpr = 0.0, fnr = 0.0;
};

PeriodMetrics metrics_from_counts(std::int64_t period_id, std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn);

// Binary view: every class other than `benign_class` counts as malware.
PeriodMetrics period_metrics(const LabelVector& pred, const LabelVector& truth, ClassId benign_class = 0,
                             std::int64_t period_id = 0);

std::vector<std::size_t> absolute_exposure(std::span<const std::size_t> per_period_fn);

struct PseudoLabelErrors {
    double benign = 0.0;   // truth-malware among rows labeled benign
    double malware = 0.0;  // truth-benign among rows labeled malware
    std::size_t benign_labeled = 0, benign_wrong = 0;
    std::size_t malware_labeled = 0, malware_wrong = 0;
};

// `truth` is indexed by the batch's pool indices.
PseudoLabelErrors pseudo_label_errors(const PseudoLabelBatch& batch, const LabelVector& truth);

struct MetricsReport {
    std::vector<PeriodMetrics> periods;
    double mean_f1 = 0.0, mean_fpr = 0.0, mean_fnr = 0.0;
    std::vector<std::size_t> exposure;
    std::vector<PseudoLabelErrors> pseudo_errors;  // empty when not applicable
};

// Unweighted mean across periods by default; sample-weighted pools counts.
MetricsReport summarize(std::vector<PeriodMetrics> periods, std::vector<PseudoLabelErrors> pseudo_errors = {},
                        bool sample_weighted = false);

struct MacroMetrics {
    double f1 = 0.0, precision = 0.0, recall = 0.0;
};

MacroMetrics macro_metrics(const LabelVector& pred, const LabelVector& truth, std::size_t num_classes);

enum class WilcoxonMethod { automatic, exact, normal };

inline constexpr std::size_t kWilcoxonExactLimit = 25;

struct WilcoxonResult {
    double statistic = 0.0;  // W+, the sum of positive ranks
    double p_value = 1.0;
    std::size_t n = 0;       // nonzero differences
    bool exact = false;
};

// Two-sided signed-rank test on paired series; zero differences are dropped,
// ties get average ranks. Exact null distribution up to kWilcoxonExactLimit
// nonzero differences, tie-corrected normal approximation above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::automatic);

struct UnknownFamilyResult {
    double evasion_rate = 0.0;
    double auc = 0.0;
};

// Max-confidence scores; lower confidence should indicate an unseen family.
UnknownFamilyResult unknown_family_eval(const ProbabilityMatrix& unknown_probs, std::optional<ClassId> benign_class,
                                        const ProbabilityMatrix& known_probs);

// P(score_known > score_unknown) + 0.5 P(tie), via average ranks.
double rank_auc(std::span<const double> known_scores, std::span<const double> unknown_scores);

struct ForgettingRow {
    std::size_t model_index = 0;  // 0 = initial model, T = final
    std::int64_t trained_through = 0;
    PeriodMetrics metrics;
};

// Evaluates every model of a run (initial through final) on the probe slice.
std::vector<ForgettingRow> forgetting_analysis(const AdaptRun& run, const TemporalDataset& probe);

}  // namespace adapt
