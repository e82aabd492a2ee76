#pragma once

// Core data types: feature matrices (dense or sparse-binary), label vectors,
// labeled datasets, time-partitioned streams and row-normalized probability
// matrices. Every type is immutable after construction.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adapt/error.hpp"

namespace adapt {

enum class StorageKind { dense, sparse_binary };

const char* to_string(StorageKind kind) noexcept;

class FeatureMatrix {
public:
    FeatureMatrix() = default;

    // Row-major dense values; throws on non-finite entries.
    static FeatureMatrix dense(std::size_t rows, std::size_t dims, std::vector<double> values);

    // CSR layout without values: row r owns active[offsets[r] .. offsets[r+1]).
    // Column indices must be strictly increasing within a row and < dims.
    static FeatureMatrix sparse_binary(std::size_t rows, std::size_t dims,
                                       std::vector<std::size_t> offsets,
                                       std::vector<std::uint32_t> active);

    static FeatureMatrix empty(std::size_t dims, StorageKind kind = StorageKind::dense);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t dims() const noexcept { return dims_; }
    StorageKind storage() const noexcept { return kind_; }
    bool is_sparse() const noexcept { return kind_ == StorageKind::sparse_binary; }

    double at(std::size_t row, std::size_t col) const;

    // Dense only.
    std::span<const double> dense_row(std::size_t row) const;
    // Sparse only: sorted active column indices of a row.
    std::span<const std::uint32_t> active(std::size_t row) const;

    void copy_row(std::size_t row, std::span<double> out) const;
    std::vector<double> row_vector(std::size_t row) const;
    double dot_row(std::size_t row, std::span<const double> weights) const;
    // out += scale * x_row
    void axpy_row(std::size_t row, double scale, std::span<double> out) const;

    FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
    FeatureMatrix to_dense() const;

    const std::vector<double>& dense_values() const noexcept { return values_; }
    const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    const std::vector<std::uint32_t>& active_indices() const noexcept { return active_; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t dims_ = 0;
    StorageKind kind_ = StorageKind::dense;
    std::vector<double> values_;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> active_;
};

using ClassId = std::uint32_t;

class LabelVector {
public:
    LabelVector() = default;
    LabelVector(std::vector<ClassId> labels, std::size_t num_classes,
                std::optional<ClassId> benign_class = ClassId{0});

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::optional<ClassId> benign_class() const noexcept { return benign_; }
    ClassId operator[](std::size_t i) const { return labels_[i]; }
    const std::vector<ClassId>& values() const noexcept { return labels_; }

    LabelVector select(std::span<const std::size_t> indices) const;

    friend bool operator==(const LabelVector&, const LabelVector&) = default;

private:
    std::vector<ClassId> labels_;
    std::size_t num_classes_ = 2;
    std::optional<ClassId> benign_ = ClassId{0};
};

std::vector<std::size_t> class_counts(const LabelVector& labels);

struct LabeledDataset {
    FeatureMatrix features;
    LabelVector labels;

    LabeledDataset() = default;
    LabeledDataset(FeatureMatrix f, LabelVector l);

    std::size_t rows() const noexcept { return features.rows(); }
    std::size_t dims() const noexcept { return features.dims(); }
    std::size_t num_classes() const noexcept { return labels.num_classes(); }

    LabeledDataset select(std::span<const std::size_t> indices) const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Stable concatenation. Mixed storage kinds promote to dense.
LabeledDataset concat(std::span<const LabeledDataset> parts);
FeatureMatrix concat_features(std::span<const FeatureMatrix> parts);

struct Period {
    std::int64_t period_id = 0;
    LabeledDataset data;
};

class TemporalDataset {
public:
    TemporalDataset() = default;
    explicit TemporalDataset(std::vector<Period> partitions);

    std::size_t size() const noexcept { return parts_.size(); }
    bool empty() const noexcept { return parts_.empty(); }
    const Period& operator[](std::size_t i) const { return parts_[i]; }
    const std::vector<Period>& partitions() const noexcept { return parts_; }
    auto begin() const { return parts_.begin(); }
    auto end() const { return parts_.end(); }

    // Partitions with index in [first, last).
    TemporalDataset slice(std::size_t first, std::size_t last) const;
    LabeledDataset flatten() const;

private:
    std::vector<Period> parts_;
};

class ProbabilityMatrix {
public:
    static constexpr double row_tolerance = 1e-6;

    ProbabilityMatrix() = default;
    // Validates entries in [0, 1] and row sums within row_tolerance of 1.
    ProbabilityMatrix(std::size_t rows, std::size_t num_classes, std::vector<double> probs);

    static ProbabilityMatrix one_hot(const LabelVector& labels);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t num_classes() const noexcept { return classes_; }
    double operator()(std::size_t row, std::size_t cls) const { return probs_[row * classes_ + cls]; }
    std::span<const double> row(std::size_t r) const {
        return {probs_.data() + r * classes_, classes_};
    }
    const std::vector<double>& values() const noexcept { return probs_; }

    ProbabilityMatrix select_rows(std::span<const std::size_t> indices) const;

    friend bool operator==(const ProbabilityMatrix&, const ProbabilityMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t classes_ = 2;
    std::vector<double> probs_;
};

ProbabilityMatrix concat_probabilities(std::span<const ProbabilityMatrix> parts);

// Argmax of a probability row. Ties resolve toward the benign class when it
// is among the maxima, otherwise to the lowest class id.
ClassId argmax(std::span<const double> row, std::optional<ClassId> benign_class);
LabelVector argmax_labels(const ProbabilityMatrix& probs, std::optional<ClassId> benign_class);
double max_probability(std::span<const double> row);

}  // namespace adapt
