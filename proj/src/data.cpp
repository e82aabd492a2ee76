#include "adapt/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adapt {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid argument";
        case ErrorKind::dimension_mismatch: return "dimension mismatch";
        case ErrorKind::empty_dataset: return "empty dataset";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::not_trained: return "not trained";
        case ErrorKind::parse: return "parse error";
        case ErrorKind::io: return "i/o error";
        case ErrorKind::validation: return "validation error";
    }
    return "error";
}

const char* to_string(StorageKind kind) noexcept {
    return kind == StorageKind::dense ? "dense" : "sparse";
}

// ---------------------------------------------------------------- FeatureMatrix

FeatureMatrix FeatureMatrix::dense(std::size_t rows, std::size_t dims, std::vector<double> values) {
    if (values.size() != rows * dims) {
        fail(ErrorKind::dimension_mismatch,
             "dense matrix expects " + std::to_string(rows * dims) + " values, got " +
                 std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::validation, "non-finite value at row " + std::to_string(dims ? i / dims : 0) +
                                            ", column " + std::to_string(dims ? i % dims : 0));
        }
    }
    FeatureMatrix m;
    m.rows_ = rows;
    m.dims_ = dims;
    m.kind_ = StorageKind::dense;
    m.values_ = std::move(values);
    m.offsets_ = {0};
    return m;
}

FeatureMatrix FeatureMatrix::sparse_binary(std::size_t rows, std::size_t dims,
                                           std::vector<std::size_t> offsets,
                                           std::vector<std::uint32_t> active) {
    if (offsets.size() != rows + 1 || offsets.front() != 0 || offsets.back() != active.size()) {
        fail(ErrorKind::invalid_argument, "sparse matrix offsets inconsistent with row count");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        if (offsets[r + 1] < offsets[r]) fail(ErrorKind::invalid_argument, "sparse offsets decrease");
        for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
            if (active[k] >= dims) {
                fail(ErrorKind::dimension_mismatch, "row " + std::to_string(r) + ": feature index " +
                                                        std::to_string(active[k]) + " out of range for " +
                                                        std::to_string(dims) + " dims");
            }
            if (k > offsets[r] && active[k] <= active[k - 1]) {
                fail(ErrorKind::invalid_argument,
                     "row " + std::to_string(r) + ": feature indices not strictly increasing");
            }
        }
    }
    FeatureMatrix m;
    m.rows_ = rows;
    m.dims_ = dims;
    m.kind_ = StorageKind::sparse_binary;
    m.offsets_ = std::move(offsets);
    m.active_ = std::move(active);
    return m;
}

FeatureMatrix FeatureMatrix::empty(std::size_t dims, StorageKind kind) {
    if (kind == StorageKind::dense) return dense(0, dims, {});
    return sparse_binary(0, dims, {0}, {});
}

double FeatureMatrix::at(std::size_t row, std::size_t col) const {
    if (kind_ == StorageKind::dense) return values_[row * dims_ + col];
    auto cols = active(row);
    return std::binary_search(cols.begin(), cols.end(), static_cast<std::uint32_t>(col)) ? 1.0 : 0.0;
}

std::span<const double> FeatureMatrix::dense_row(std::size_t row) const {
    if (kind_ != StorageKind::dense) fail(ErrorKind::unsupported, "dense_row on sparse matrix");
    return {values_.data() + row * dims_, dims_};
}

std::span<const std::uint32_t> FeatureMatrix::active(std::size_t row) const {
    if (kind_ != StorageKind::sparse_binary) fail(ErrorKind::unsupported, "active() on dense matrix");
    return {active_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

void FeatureMatrix::copy_row(std::size_t row, std::span<double> out) const {
    if (kind_ == StorageKind::dense) {
        auto src = dense_row(row);
        std::copy(src.begin(), src.end(), out.begin());
        return;
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (auto c : active(row)) out[c] = 1.0;
}

std::vector<double> FeatureMatrix::row_vector(std::size_t row) const {
    std::vector<double> out(dims_);
    copy_row(row, out);
    return out;
}

double FeatureMatrix::dot_row(std::size_t row, std::span<const double> weights) const {
    double s = 0.0;
    if (kind_ == StorageKind::dense) {
        auto x = dense_row(row);
        for (std::size_t j = 0; j < dims_; ++j) s += x[j] * weights[j];
    } else {
        for (auto c : active(row)) s += weights[c];
    }
    return s;
}

void FeatureMatrix::axpy_row(std::size_t row, double scale, std::span<double> out) const {
    if (kind_ == StorageKind::dense) {
        auto x = dense_row(row);
        for (std::size_t j = 0; j < dims_; ++j) out[j] += scale * x[j];
    } else {
        for (auto c : active(row)) out[c] += scale;
    }
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
    FeatureMatrix m;
    m.rows_ = indices.size();
    m.dims_ = dims_;
    m.kind_ = kind_;
    if (kind_ == StorageKind::dense) {
        m.values_.reserve(indices.size() * dims_);
        for (auto r : indices) {
            auto src = dense_row(r);
            m.values_.insert(m.values_.end(), src.begin(), src.end());
        }
    } else {
        m.offsets_.reserve(indices.size() + 1);
        for (auto r : indices) {
            auto src = active(r);
            m.active_.insert(m.active_.end(), src.begin(), src.end());
            m.offsets_.push_back(m.active_.size());
        }
    }
    return m;
}

FeatureMatrix FeatureMatrix::to_dense() const {
    if (kind_ == StorageKind::dense) return *this;
    std::vector<double> values(rows_ * dims_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (auto c : active(r)) values[r * dims_ + c] = 1.0;
    }
    return dense(rows_, dims_, std::move(values));
}

// ---------------------------------------------------------------- labels

LabelVector::LabelVector(std::vector<ClassId> labels, std::size_t num_classes,
                         std::optional<ClassId> benign_class)
    : labels_(std::move(labels)), num_classes_(num_classes), benign_(benign_class) {
    if (num_classes_ < 2) fail(ErrorKind::invalid_argument, "num_classes must be at least 2");
    if (benign_ && *benign_ >= num_classes_) {
        fail(ErrorKind::invalid_argument, "benign class id out of range");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= num_classes_) {
            fail(ErrorKind::validation, "label " + std::to_string(labels_[i]) + " at row " +
                                            std::to_string(i) + " exceeds class count " +
                                            std::to_string(num_classes_));
        }
    }
}

LabelVector LabelVector::select(std::span<const std::size_t> indices) const {
    std::vector<ClassId> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels_[i]);
    LabelVector v;
    v.labels_ = std::move(out);
    v.num_classes_ = num_classes_;
    v.benign_ = benign_;
    return v;
}

std::vector<std::size_t> class_counts(const LabelVector& labels) {
    std::vector<std::size_t> counts(labels.num_classes(), 0);
    for (auto l : labels.values()) ++counts[l];
    return counts;
}

// ---------------------------------------------------------------- datasets

LabeledDataset::LabeledDataset(FeatureMatrix f, LabelVector l) : features(std::move(f)), labels(std::move(l)) {
    if (features.rows() != labels.size()) {
        fail(ErrorKind::dimension_mismatch, "feature rows (" + std::to_string(features.rows()) +
                                                ") differ from label count (" +
                                                std::to_string(labels.size()) + ")");
    }
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> indices) const {
    return {features.select_rows(indices), labels.select(indices)};
}

FeatureMatrix concat_features(std::span<const FeatureMatrix> parts) {
    if (parts.empty()) fail(ErrorKind::invalid_argument, "concat of zero matrices");
    const auto dims = parts.front().dims();
    bool all_sparse = true;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].dims() != dims) {
            fail(ErrorKind::dimension_mismatch, "concat input " + std::to_string(i) + " has " +
                                                    std::to_string(parts[i].dims()) + " dims, expected " +
                                                    std::to_string(dims));
        }
        all_sparse = all_sparse && parts[i].is_sparse();
        rows += parts[i].rows();
    }
    if (parts.size() == 1) return parts.front();
    if (all_sparse) {
        std::vector<std::size_t> offsets{0};
        std::vector<std::uint32_t> active;
        for (const auto& p : parts) {
            for (std::size_t r = 0; r < p.rows(); ++r) {
                auto a = p.active(r);
                active.insert(active.end(), a.begin(), a.end());
                offsets.push_back(active.size());
            }
        }
        return FeatureMatrix::sparse_binary(rows, dims, std::move(offsets), std::move(active));
    }
    std::vector<double> values;
    values.reserve(rows * dims);
    for (const auto& p : parts) {
        if (p.is_sparse()) {
            const auto d = p.to_dense();
            values.insert(values.end(), d.dense_values().begin(), d.dense_values().end());
        } else {
            values.insert(values.end(), p.dense_values().begin(), p.dense_values().end());
        }
    }
    return FeatureMatrix::dense(rows, dims, std::move(values));
}

LabeledDataset concat(std::span<const LabeledDataset> parts) {
    if (parts.empty()) fail(ErrorKind::invalid_argument, "concat of zero datasets");
    if (parts.size() == 1) return parts.front();
    const auto classes = parts.front().num_classes();
    std::vector<FeatureMatrix> feats;
    std::vector<ClassId> labels;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].num_classes() != classes) {
            fail(ErrorKind::dimension_mismatch, "concat input " + std::to_string(i) +
                                                    " has a different class count");
        }
        feats.push_back(parts[i].features);
        labels.insert(labels.end(), parts[i].labels.values().begin(), parts[i].labels.values().end());
    }
    return {concat_features(feats), LabelVector(std::move(labels), classes, parts.front().labels.benign_class())};
}

TemporalDataset::TemporalDataset(std::vector<Period> partitions) : parts_(std::move(partitions)) {
    for (std::size_t i = 1; i < parts_.size(); ++i) {
        if (parts_[i].period_id <= parts_[i - 1].period_id) {
            fail(ErrorKind::validation, "period ids must be strictly increasing (period " +
                                            std::to_string(parts_[i].period_id) + ")");
        }
        if (parts_[i].data.dims() != parts_[0].data.dims() ||
            parts_[i].data.num_classes() != parts_[0].data.num_classes()) {
            fail(ErrorKind::dimension_mismatch,
                 "period " + std::to_string(parts_[i].period_id) + " disagrees on dims or class count");
        }
    }
}

TemporalDataset TemporalDataset::slice(std::size_t first, std::size_t last) const {
    last = std::min(last, parts_.size());
    if (first > last) first = last;
    return TemporalDataset(std::vector<Period>(parts_.begin() + static_cast<std::ptrdiff_t>(first),
                                               parts_.begin() + static_cast<std::ptrdiff_t>(last)));
}

LabeledDataset TemporalDataset::flatten() const {
    if (parts_.empty()) fail(ErrorKind::empty_dataset, "flatten of empty stream");
    std::vector<LabeledDataset> all;
    for (const auto& p : parts_) all.push_back(p.data);
    return concat(all);
}

// ---------------------------------------------------------------- probabilities

ProbabilityMatrix::ProbabilityMatrix(std::size_t rows, std::size_t num_classes, std::vector<double> probs)
    : rows_(rows), classes_(num_classes), probs_(std::move(probs)) {
    if (classes_ < 2) fail(ErrorKind::invalid_argument, "probability matrix needs at least 2 classes");
    if (probs_.size() != rows_ * classes_) {
        fail(ErrorKind::dimension_mismatch, "probability matrix size mismatch");
    }
    for (std::size_t r = 0; r < rows_; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < classes_; ++k) {
            const double p = probs_[r * classes_ + k];
            if (!(p >= 0.0 && p <= 1.0)) {
                fail(ErrorKind::validation, "probability outside [0,1] at row " + std::to_string(r));
            }
            s += p;
        }
        if (std::abs(s - 1.0) > row_tolerance) {
            fail(ErrorKind::validation, "probability row " + std::to_string(r) + " sums to " + std::to_string(s));
        }
    }
}

ProbabilityMatrix ProbabilityMatrix::one_hot(const LabelVector& labels) {
    std::vector<double> p(labels.size() * labels.num_classes(), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) p[i * labels.num_classes() + labels[i]] = 1.0;
    return {labels.size(), labels.num_classes(), std::move(p)};
}

ProbabilityMatrix ProbabilityMatrix::select_rows(std::span<const std::size_t> indices) const {
    std::vector<double> out;
    out.reserve(indices.size() * classes_);
    for (auto r : indices) {
        auto src = row(r);
        out.insert(out.end(), src.begin(), src.end());
    }
    ProbabilityMatrix m;
    m.rows_ = indices.size();
    m.classes_ = classes_;
    m.probs_ = std::move(out);
    return m;
}

ProbabilityMatrix concat_probabilities(std::span<const ProbabilityMatrix> parts) {
    if (parts.empty()) fail(ErrorKind::invalid_argument, "concat of zero probability matrices");
    const auto classes = parts.front().num_classes();
    std::vector<double> all;
    std::size_t rows = 0;
    for (const auto& p : parts) {
        if (p.num_classes() != classes) fail(ErrorKind::dimension_mismatch, "class count mismatch");
        all.insert(all.end(), p.values().begin(), p.values().end());
        rows += p.rows();
    }
    return {rows, classes, std::move(all)};
}

ClassId argmax(std::span<const double> row, std::optional<ClassId> benign_class) {
    ClassId best = 0;
    for (ClassId k = 1; k < row.size(); ++k) {
        if (row[k] > row[best]) best = k;
    }
    if (benign_class && *benign_class != best && row[*benign_class] == row[best]) return *benign_class;
    return best;
}

LabelVector argmax_labels(const ProbabilityMatrix& probs, std::optional<ClassId> benign_class) {
    std::vector<ClassId> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = argmax(probs.row(r), benign_class);
    return {std::move(out), probs.num_classes(), benign_class};
}

double max_probability(std::span<const double> row) {
    return *std::max_element(row.begin(), row.end());
}

}  // namespace adapt
