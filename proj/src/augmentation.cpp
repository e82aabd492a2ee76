#include "adapt/augmentation.hpp"

#include <algorithm>
#include <cmath>

namespace adapt {

namespace {

// Visits positions selected independently with probability p, jumping
// between them with geometric gaps.
template <typename F>
void for_each_selected(std::size_t dims, double p, Rng& rng, F&& visit) {
    if (p <= 0.0 || dims == 0) return;
    if (p >= 1.0) {
        for (std::size_t j = 0; j < dims; ++j) visit(j);
        return;
    }
    const double log_q = std::log1p(-p);
    std::size_t j = 0;
    while (true) {
        const double u = 1.0 - uniform01(rng);  // (0, 1]
        const double gap = std::floor(std::log(u) / log_q);
        if (gap >= static_cast<double>(dims - j)) return;
        j += static_cast<std::size_t>(gap);
        visit(j);
        if (++j >= dims) return;
    }
}

double replacement_probability(double p_a, bool invert) {
    if (!(p_a >= 0.0 && p_a <= 1.0)) fail(ErrorKind::invalid_argument, "p_a must lie in [0, 1]");
    return invert ? 1.0 - p_a : p_a;
}

}  // namespace

MarginalIndex MarginalIndex::build(const LabeledDataset& data) {
    if (data.rows() == 0) fail(ErrorKind::empty_dataset, "marginal index of an empty dataset");
    MarginalIndex idx;
    idx.dims_ = data.dims();
    idx.kind_ = data.features.storage();
    const auto classes = data.num_classes();
    idx.class_rows_ = class_counts(data.labels);
    if (idx.kind_ == StorageKind::sparse_binary) {
        idx.ones_.assign(classes, std::vector<std::size_t>(idx.dims_, 0));
        for (std::size_t r = 0; r < data.rows(); ++r) {
            auto& ones = idx.ones_[data.labels[r]];
            for (auto c : data.features.active(r)) ++ones[c];
        }
    } else {
        idx.dense_.resize(classes);
        for (std::size_t c = 0; c < classes; ++c) idx.dense_[c].resize(idx.class_rows_[c] * idx.dims_);
        std::vector<std::size_t> fill(classes, 0);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const auto c = data.labels[r];
            const auto n_c = idx.class_rows_[c];
            const auto pos = fill[c]++;
            auto x = data.features.dense_row(r);
            for (std::size_t j = 0; j < idx.dims_; ++j) idx.dense_[c][j * n_c + pos] = x[j];
        }
    }
    return idx;
}

std::vector<double> MarginalIndex::pool(ClassId c, std::size_t feature) const {
    if (!has_class(c)) return {};
    const auto n = class_rows_[c];
    std::vector<double> out;
    if (kind_ == StorageKind::sparse_binary) {
        const auto ones = ones_[c][feature];
        out.assign(n - ones, 0.0);
        out.insert(out.end(), ones, 1.0);
    } else {
        out.assign(dense_[c].begin() + static_cast<std::ptrdiff_t>(feature * n),
                   dense_[c].begin() + static_cast<std::ptrdiff_t>((feature + 1) * n));
        std::sort(out.begin(), out.end());
    }
    return out;
}

double MarginalIndex::draw(ClassId c, std::size_t feature, Rng& rng) const {
    if (!has_class(c)) fail(ErrorKind::empty_dataset, "no samples of class " + std::to_string(c) + " to augment from");
    const auto n = class_rows_[c];
    const auto pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    if (kind_ == StorageKind::sparse_binary) return pick < ones_[c][feature] ? 1.0 : 0.0;
    return dense_[c][feature * n + pick];
}

double MarginalIndex::bernoulli_rate(ClassId c, std::size_t feature) const {
    if (kind_ != StorageKind::sparse_binary) fail(ErrorKind::unsupported, "bernoulli_rate on a dense index");
    if (!has_class(c)) return 0.0;
    return static_cast<double>(ones_[c][feature]) / static_cast<double>(class_rows_[c]);
}

std::vector<double> augment_sample(std::span<const double> x, ClassId cls, const MarginalIndex& index, double p_a,
                                   Rng& rng, bool invert_mask) {
    if (x.size() != index.dims()) fail(ErrorKind::dimension_mismatch, "sample dims differ from marginal index");
    if (!index.has_class(cls)) fail(ErrorKind::empty_dataset, "no samples of class " + std::to_string(cls) + " to augment from");
    std::vector<double> out(x.begin(), x.end());
    for_each_selected(x.size(), replacement_probability(p_a, invert_mask), rng,
                      [&](std::size_t j) { out[j] = index.draw(cls, j, rng); });
    return out;
}

LabeledDataset consistency_filter(const Learner& model, const LabeledDataset& candidates) {
    if (!model.trained()) fail(ErrorKind::not_trained, "consistency filter requires a trained model");
    if (candidates.rows() == 0) return candidates;
    const auto probs = model.predict_proba(candidates.features);
    const auto benign = candidates.labels.benign_class();
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < candidates.rows(); ++r) {
        if (argmax(probs.row(r), benign) == candidates.labels[r]) keep.push_back(r);
    }
    return candidates.select(keep);
}

LabeledDataset make_augmented_set(const LabeledDataset& data, const Learner* model, const AugmentConfig& cfg,
                                  std::uint64_t seed) {
    if (data.rows() == 0) return data;
    const auto index = MarginalIndex::build(data);
    const double p = replacement_probability(cfg.p_a, cfg.invert_mask);
    const auto n = data.rows();
    const auto d = data.dims();

    FeatureMatrix feats;
    if (data.features.is_sparse()) {
        std::vector<std::size_t> offsets{0};
        std::vector<std::uint32_t> active;
        std::vector<char> row(d);
        for (std::size_t r = 0; r < n; ++r) {
            Rng rng = make_rng(derive_seed(seed, r));
            const auto cls = data.labels[r];
            std::fill(row.begin(), row.end(), 0);
            for (auto c : data.features.active(r)) row[c] = 1;
            for_each_selected(d, p, rng, [&](std::size_t j) { row[j] = index.draw(cls, j, rng) != 0.0; });
            for (std::size_t j = 0; j < d; ++j) {
                if (row[j]) active.push_back(static_cast<std::uint32_t>(j));
            }
            offsets.push_back(active.size());
        }
        feats = FeatureMatrix::sparse_binary(n, d, std::move(offsets), std::move(active));
    } else {
        std::vector<double> values(n * d);
        for (std::size_t r = 0; r < n; ++r) {
            Rng rng = make_rng(derive_seed(seed, r));
            const auto out = augment_sample(data.features.dense_row(r), data.labels[r], index, cfg.p_a, rng,
                                            cfg.invert_mask);
            std::copy(out.begin(), out.end(), values.begin() + static_cast<std::ptrdiff_t>(r * d));
        }
        feats = FeatureMatrix::dense(n, d, std::move(values));
    }
    LabeledDataset augmented(std::move(feats), data.labels);
    if (cfg.consistency_check && model != nullptr) return consistency_filter(*model, augmented);
    return augmented;
}

double sample_mix_coefficient(double alpha, Rng& rng) {
    if (alpha < kMixupAlphaFloor) return 1.0;
    return sample_beta(alpha, alpha, rng);
}

MixedRow mix_with_coefficient(std::span<const double> xi, ClassId yi, std::span<const double> xj, ClassId yj,
                              std::size_t num_classes, double c, MixupLabelMode mode) {
    if (xi.size() != xj.size()) fail(ErrorKind::dimension_mismatch, "mixup parents differ in dims");
    if (yi >= num_classes || yj >= num_classes) fail(ErrorKind::invalid_argument, "mixup label out of range");
    MixedRow out;
    out.coefficient = c;
    out.features.resize(xi.size());
    for (std::size_t k = 0; k < xi.size(); ++k) out.features[k] = c * xi[k] + (1.0 - c) * xj[k];
    out.target.assign(num_classes, 0.0);
    if (mode == MixupLabelMode::hard) {
        // ties at 0.5 go to the first parent
        out.target[c >= 0.5 ? yi : yj] = 1.0;
    } else {
        out.target[yi] += c;
        out.target[yj] += 1.0 - c;
    }
    return out;
}

MixedRow mixup_pair(std::span<const double> xi, ClassId yi, std::span<const double> xj, ClassId yj,
                    std::size_t num_classes, const MixupConfig& cfg, Rng& rng) {
    return mix_with_coefficient(xi, yi, xj, yj, num_classes, sample_mix_coefficient(cfg.alpha, rng), cfg.label_mode);
}

MixupSet make_mixup_set(const LabeledDataset& data, const MixupConfig& cfg, std::uint64_t seed) {
    const auto n = data.rows();
    if (n < 2) fail(ErrorKind::empty_dataset, "mixup needs at least two rows");
    const auto d = data.dims();
    const auto classes = data.num_classes();
    std::vector<double> values(n * d);
    std::vector<double> targets(n * classes);
    std::vector<ClassId> hard(n);
    std::vector<double> xi(d), xj(d);
    for (std::size_t r = 0; r < n; ++r) {
        Rng rng = make_rng(derive_seed(seed, r));
        const auto partner = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        data.features.copy_row(r, xi);
        data.features.copy_row(partner, xj);
        const auto mixed = mixup_pair(xi, data.labels[r], xj, data.labels[partner], classes, cfg, rng);
        std::copy(mixed.features.begin(), mixed.features.end(), values.begin() + static_cast<std::ptrdiff_t>(r * d));
        std::copy(mixed.target.begin(), mixed.target.end(), targets.begin() + static_cast<std::ptrdiff_t>(r * classes));
        hard[r] = argmax(mixed.target, std::nullopt);
    }
    auto feats = FeatureMatrix::dense(n, d, std::move(values));
    if (cfg.label_mode == MixupLabelMode::hard) {
        return {std::move(feats), TrainTargets(LabelVector(std::move(hard), classes, data.labels.benign_class()))};
    }
    return {std::move(feats), TrainTargets(ProbabilityMatrix(n, classes, std::move(targets)))};
}

}  // namespace adapt
