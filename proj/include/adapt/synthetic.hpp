#pragma once

// Rotating two-Gaussian drift streams for desk-scale experiments.

#include <cstdint>
#include <numbers>
#include <utility>

#include "adapt/data.hpp"

namespace adapt {

struct RotatingDriftSpec {
    std::size_t n_per_class = 200;
    double radius = 2.0;
    double sigma2 = 0.25;
    double rotation = 3.0 * std::numbers::pi / 4.0;  // total, spread over periods - 1 steps
    std::size_t periods = 8;
    double imbalance = 1.0;  // benign:malware
    std::uint64_t seed = 0;
};

void validate(const RotatingDriftSpec& spec);

// Benign and malware counts for `total` rows at ratio benign:malware.
std::pair<std::size_t, std::size_t> imbalanced_counts(std::size_t total, double ratio);

// Angle of the benign (class 0) mean in period t; malware sits at +pi.
double rotation_angle(const RotatingDriftSpec& spec, std::size_t t);

// Period t alone, from its own rng stream.
LabeledDataset generate_period(const RotatingDriftSpec& spec, std::size_t t);

// Period 0 is the initial labeled set; periods 1..T-1 form the stream.
std::pair<LabeledDataset, TemporalDataset> generate_rotating(const RotatingDriftSpec& spec);

// All T periods with per-period class counts at `ratio` over 2 * n_per_class rows.
TemporalDataset generate_imbalanced(const RotatingDriftSpec& spec, double ratio);

}  // namespace adapt
