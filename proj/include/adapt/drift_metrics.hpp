#pragma once

// Dataset-shift diagnostics: Gaussian-approximated optimal-transport distance
// in feature space, Frechet distance over a reference network's penultimate
// embeddings, and reliability-bin calibration.

#include <cstddef>
#include <vector>

#include "adapt/data.hpp"
#include "adapt/learners.hpp"

namespace adapt {

inline constexpr std::size_t kDefaultCovarianceDimsCap = 2000;

struct GaussianSummary {
    std::vector<double> mean;
    // dims x dims row-major when full; the diagonal only when `diagonal`.
    std::vector<double> covariance;
    bool diagonal = false;

    std::size_t dims() const noexcept { return mean.size(); }
    double cov(std::size_t i, std::size_t j) const;
};

// Sample mean and unbiased covariance; diagonal-only above `dims_cap`.
GaussianSummary fit_gaussian(const FeatureMatrix& features, std::size_t dims_cap = kDefaultCovarianceDimsCap);

// Squared 2-Wasserstein distance between Gaussians:
// |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
// If either summary is diagonal both are treated as diagonal.
double gaussian_w2(const GaussianSummary& a, const GaussianSummary& b);

// Per-feature (mean, stddev) from a reference set; zero spread maps to 1.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const FeatureMatrix& reference);
    FeatureMatrix apply(const FeatureMatrix& x) const;
};

// Frechet distance between penultimate-layer embeddings of two sets under a
// trained mlp reference model.
double fdd(const Learner& reference, const FeatureMatrix& base, const FeatureMatrix& probe,
           std::size_t dims_cap = kDefaultCovarianceDimsCap);

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct CalibrationReport {
    std::vector<CalibrationBin> bins;
    double ece = 0.0;
    std::size_t total = 0;
};

// Equal-width bins on [1/C, 1] over max-class confidence. The last bin is
// closed on the right.
CalibrationReport calibration(const ProbabilityMatrix& probs, const LabelVector& truth, std::size_t bins = 10);

// Bins can be accumulated across periods: per-bin (count, sum confidence, sum
// correct) are additive.
struct CalibrationAccumulator {
    std::size_t num_classes = 2;
    std::vector<std::size_t> count;
    std::vector<double> confidence_sum;
    std::vector<double> correct_sum;

    CalibrationAccumulator(std::size_t classes, std::size_t bins);
    void add(const ProbabilityMatrix& probs, const LabelVector& truth);
    CalibrationReport report() const;
};

}  // namespace adapt
