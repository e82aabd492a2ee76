#pragma once

// Drift-aware pseudo-label selection: per-class mean confidences over the
// unlabeled pool pull the base thresholds toward what the model currently
// outputs for each class, and samples above their class threshold are kept.

#include <optional>
#include <span>
#include <vector>

#include "adapt/data.hpp"

namespace adapt {

struct Thresholds {
    double benign = 0.9;   // tau_b
    double malware = 0.9;  // tau_m

    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

// Throws unless both thresholds lie in [0.5, 1].
void validate(const Thresholds& t);

struct AdaptiveState {
    Thresholds base;
    double lambda = 0.0;
    Thresholds updated;
};

struct ClassMeans {
    double malware = 0.0;  // mu_m
    double benign = 0.0;   // mu_b
    std::size_t malware_count = 0;
    std::size_t benign_count = 0;
};

struct PseudoLabelBatch {
    std::vector<std::size_t> indices;  // sorted, unique rows of the period pool
    LabelVector labels;
    std::vector<double> confidences;

    std::size_t size() const noexcept { return indices.size(); }
    bool empty() const noexcept { return indices.empty(); }
};

// Mean predicted probability of the argmax class among rows predicted
// malware (any non-benign class) and among rows predicted benign. An empty
// group takes its fallback (the base threshold) so the update is the identity.
// Without a benign class every row counts toward the malware mean.
ClassMeans class_means(const ProbabilityMatrix& probs, std::optional<ClassId> benign_class, const Thresholds& fallback,
                       std::span<const std::size_t> exclude = {});

// tau_updated = lambda * mu + (1 - lambda) * tau, per class.
Thresholds update_thresholds(const AdaptiveState& state, double mu_malware, double mu_benign);

// Binary rule with strict inequalities. Class 1 - benign_class is malware.
PseudoLabelBatch select_binary(const ProbabilityMatrix& probs, const Thresholds& updated, ClassId benign_class,
                               std::span<const std::size_t> exclude = {});

// Argmax class k is kept iff P(k) > tau_b (k benign) or P(k) > tau_m (any
// other class). Without a benign class only tau_m applies.
PseudoLabelBatch select_multiclass(const ProbabilityMatrix& probs, double tau_malware, double tau_benign,
                                   std::optional<ClassId> benign_class, std::span<const std::size_t> exclude = {});

}  // namespace adapt
