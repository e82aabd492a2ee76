#include "adapt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adapt/random.hpp"

namespace adapt {

namespace {

constexpr std::uint64_t kPeriodStream = 0x5e7;

}  // namespace

void validate(const RotatingDriftSpec& spec) {
    if (spec.periods < 2) fail(ErrorKind::validation, "rotating spec needs at least 2 periods");
    if (spec.n_per_class == 0) fail(ErrorKind::validation, "n_per_class must be positive");
    if (!(spec.sigma2 > 0.0) || !std::isfinite(spec.sigma2)) fail(ErrorKind::validation, "sigma2 must be positive");
    if (!std::isfinite(spec.radius) || spec.radius < 0.0) fail(ErrorKind::validation, "radius must be nonnegative");
    if (!std::isfinite(spec.rotation)) fail(ErrorKind::validation, "rotation must be finite");
    if (!(spec.imbalance > 0.0) || !std::isfinite(spec.imbalance)) {
        fail(ErrorKind::validation, "imbalance ratio must be positive");
    }
}

std::pair<std::size_t, std::size_t> imbalanced_counts(std::size_t total, double ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) fail(ErrorKind::validation, "imbalance ratio must be positive");
    if (total < 2) fail(ErrorKind::validation, "need at least one row per class");
    auto benign = static_cast<std::size_t>(std::llround(static_cast<double>(total) * ratio / (ratio + 1.0)));
    benign = std::clamp<std::size_t>(benign, 1, total - 1);
    return {benign, total - benign};
}

double rotation_angle(const RotatingDriftSpec& spec, std::size_t t) {
    return static_cast<double>(t) * spec.rotation / static_cast<double>(spec.periods - 1);
}

LabeledDataset generate_period(const RotatingDriftSpec& spec, std::size_t t) {
    validate(spec);
    if (t >= spec.periods) fail(ErrorKind::invalid_argument, "period index beyond spec.periods");
    const auto [n_benign, n_malware] = imbalanced_counts(2 * spec.n_per_class, spec.imbalance);
    const double theta = rotation_angle(spec, t);
    const double sd = std::sqrt(spec.sigma2);
    const double mx[2] = {spec.radius * std::cos(theta), -spec.radius * std::cos(theta)};
    const double my[2] = {spec.radius * std::sin(theta), -spec.radius * std::sin(theta)};

    Rng rng = make_rng(derive_seed(spec.seed, kPeriodStream, t));
    std::normal_distribution<double> noise(0.0, sd);
    const std::size_t n = n_benign + n_malware;
    std::vector<ClassId> labels(n);
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n_benign), labels.end(), 1);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<double> values(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        values[2 * i] = mx[labels[i]] + noise(rng);
        values[2 * i + 1] = my[labels[i]] + noise(rng);
    }
    return {FeatureMatrix::dense(n, 2, std::move(values)), LabelVector(std::move(labels), 2, 0)};
}

std::pair<LabeledDataset, TemporalDataset> generate_rotating(const RotatingDriftSpec& spec) {
    validate(spec);
    std::vector<Period> parts;
    for (std::size_t t = 1; t < spec.periods; ++t) {
        parts.push_back({static_cast<std::int64_t>(t), generate_period(spec, t)});
    }
    return {generate_period(spec, 0), TemporalDataset(std::move(parts))};
}

TemporalDataset generate_imbalanced(const RotatingDriftSpec& spec, double ratio) {
    auto s = spec;
    s.imbalance = ratio;
    validate(s);
    std::vector<Period> parts;
    for (std::size_t t = 0; t < s.periods; ++t) parts.push_back({static_cast<std::int64_t>(t), generate_period(s, t)});
    return TemporalDataset(std::move(parts));
}

}  // namespace adapt
