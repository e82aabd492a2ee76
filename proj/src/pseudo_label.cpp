#include "adapt/pseudo_label.hpp"

#include <algorithm>

namespace adapt {

namespace {

std::vector<bool> exclusion_mask(std::size_t rows, std::span<const std::size_t> exclude) {
    std::vector<bool> mask(rows, false);
    for (auto i : exclude) {
        if (i >= rows) fail(ErrorKind::invalid_argument, "excluded index " + std::to_string(i) + " out of range");
        mask[i] = true;
    }
    return mask;
}

}  // namespace

void validate(const Thresholds& t) {
    auto ok = [](double v) { return v >= 0.5 && v <= 1.0; };
    if (!ok(t.benign) || !ok(t.malware)) fail(ErrorKind::validation, "thresholds must lie in [0.5, 1]");
}

ClassMeans class_means(const ProbabilityMatrix& probs, std::optional<ClassId> benign_class, const Thresholds& fallback,
                       std::span<const std::size_t> exclude) {
    if (probs.rows() == 0) fail(ErrorKind::empty_dataset, "class_means of an empty probability matrix");
    const auto skip = exclusion_mask(probs.rows(), exclude);
    ClassMeans m;
    double sum_m = 0.0, sum_b = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        if (skip[r]) continue;
        const auto row = probs.row(r);
        const auto k = argmax(row, benign_class);
        if (benign_class && k == *benign_class) {
            sum_b += row[k];
            ++m.benign_count;
        } else {
            sum_m += row[k];
            ++m.malware_count;
        }
    }
    m.malware = m.malware_count ? sum_m / static_cast<double>(m.malware_count) : fallback.malware;
    m.benign = m.benign_count ? sum_b / static_cast<double>(m.benign_count) : fallback.benign;
    return m;
}

Thresholds update_thresholds(const AdaptiveState& state, double mu_malware, double mu_benign) {
    const double l = state.lambda;
    return {l * mu_benign + (1.0 - l) * state.base.benign, l * mu_malware + (1.0 - l) * state.base.malware};
}

PseudoLabelBatch select_binary(const ProbabilityMatrix& probs, const Thresholds& updated, ClassId benign_class,
                               std::span<const std::size_t> exclude) {
    if (probs.num_classes() != 2) fail(ErrorKind::invalid_argument, "select_binary needs two classes");
    if (benign_class > 1) fail(ErrorKind::invalid_argument, "benign class must be 0 or 1");
    const ClassId malware = 1 - benign_class;
    const auto skip = exclusion_mask(probs.rows(), exclude);
    std::vector<std::size_t> idx;
    std::vector<ClassId> labels;
    std::vector<double> conf;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        if (skip[r]) continue;
        const double pm = probs(r, malware);
        const double pb = probs(r, benign_class);
        if (pm > updated.malware) {
            idx.push_back(r);
            labels.push_back(malware);
            conf.push_back(pm);
        } else if (pb > updated.benign) {
            idx.push_back(r);
            labels.push_back(benign_class);
            conf.push_back(pb);
        }
    }
    return {std::move(idx), LabelVector(std::move(labels), 2, benign_class), std::move(conf)};
}

PseudoLabelBatch select_multiclass(const ProbabilityMatrix& probs, double tau_malware, double tau_benign,
                                   std::optional<ClassId> benign_class, std::span<const std::size_t> exclude) {
    const auto skip = exclusion_mask(probs.rows(), exclude);
    std::vector<std::size_t> idx;
    std::vector<ClassId> labels;
    std::vector<double> conf;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        if (skip[r]) continue;
        const auto row = probs.row(r);
        const auto k = argmax(row, benign_class);
        const double tau = (benign_class && k == *benign_class) ? tau_benign : tau_malware;
        if (row[k] > tau) {
            idx.push_back(r);
            labels.push_back(k);
            conf.push_back(row[k]);
        }
    }
    return {std::move(idx), LabelVector(std::move(labels), probs.num_classes(), benign_class), std::move(conf)};
}

}  // namespace adapt
