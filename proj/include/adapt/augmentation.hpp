#pragma once

// Label-consistent feature-masking augmentation and mixup.

#include <cstdint>
#include <optional>
#include <vector>

#include "adapt/data.hpp"
#include "adapt/learners.hpp"
#include "adapt/random.hpp"

namespace adapt {

// Per-class, per-feature pools of observed values. Dense sources keep every
// column value (the multiset); sparse-binary sources keep the count of ones,
// which is the same multiset for 0/1 data.
class MarginalIndex {
public:
    static MarginalIndex build(const LabeledDataset& data);

    std::size_t num_classes() const noexcept { return class_rows_.size(); }
    std::size_t dims() const noexcept { return dims_; }
    StorageKind storage() const noexcept { return kind_; }
    bool has_class(ClassId c) const { return c < class_rows_.size() && class_rows_[c] > 0; }
    std::size_t class_rows(ClassId c) const { return class_rows_.at(c); }

    // Sorted copy of the pool for (class, feature).
    std::vector<double> pool(ClassId c, std::size_t feature) const;
    double draw(ClassId c, std::size_t feature, Rng& rng) const;
    // Fraction of ones; sparse-binary sources only.
    double bernoulli_rate(ClassId c, std::size_t feature) const;

private:
    std::size_t dims_ = 0;
    StorageKind kind_ = StorageKind::dense;
    std::vector<std::size_t> class_rows_;
    std::vector<std::vector<double>> dense_;       // [class] -> rows x dims, column-major
    std::vector<std::vector<std::size_t>> ones_;  // [class] -> per-feature count of ones
};

struct AugmentConfig {
    double p_a = 0.1;               // per-feature replacement probability
    bool consistency_check = true;  // applied when a model is supplied
    bool invert_mask = false;       // treat p_a as the keep probability instead
};

enum class MixupLabelMode { fractional, hard };

struct MixupConfig {
    double alpha = 0.1;
    MixupLabelMode label_mode = MixupLabelMode::fractional;
};

inline constexpr double kMixupAlphaFloor = 1e-9;

// x~ = (1 - m) * x^ + m * x with keep-mask m_j ~ Bernoulli(1 - p_a) and x^
// drawn from the class's marginal pools.
std::vector<double> augment_sample(std::span<const double> x, ClassId cls, const MarginalIndex& index, double p_a,
                                   Rng& rng, bool invert_mask = false);

// Keeps candidates whose argmax prediction equals their label.
LabeledDataset consistency_filter(const Learner& model, const LabeledDataset& candidates);

// One augmented candidate per source row, each from its own derived stream.
LabeledDataset make_augmented_set(const LabeledDataset& data, const Learner* model, const AugmentConfig& cfg,
                                  std::uint64_t seed);

struct MixedRow {
    std::vector<double> features;
    std::vector<double> target;  // class distribution (one-hot in hard mode)
    double coefficient = 1.0;
};

double sample_mix_coefficient(double alpha, Rng& rng);

// Mixes with a supplied coefficient c: c * (x_i, y_i) + (1 - c) * (x_j, y_j).
MixedRow mix_with_coefficient(std::span<const double> xi, ClassId yi, std::span<const double> xj, ClassId yj,
                              std::size_t num_classes, double c, MixupLabelMode mode);
MixedRow mixup_pair(std::span<const double> xi, ClassId yi, std::span<const double> xj, ClassId yj,
                    std::size_t num_classes, const MixupConfig& cfg, Rng& rng);

struct MixupSet {
    FeatureMatrix features;
    TrainTargets targets;
};

// |output| = |data|; row k is mixed with a uniformly drawn partner.
MixupSet make_mixup_set(const LabeledDataset& data, const MixupConfig& cfg, std::uint64_t seed);

}  // namespace adapt
