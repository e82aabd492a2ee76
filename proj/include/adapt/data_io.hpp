#pragma once

// File formats.
//
// Dense: comma-separated text with a header row `label,f0,...,f{d-1}`, or
// `period,label,f0,...` for combined files. Leading `#` lines carry metadata
// (`# num_classes=C`, `# benign=B` or `# benign=none`).
//
// Sparse: one row per line, `label i:1 j:1 ...` with 0-based, strictly
// increasing indices. A `# dims=N` header comment is required; `# num_classes`
// and `# benign` are optional as above.
//
// Manifest: JSON object listing one file per period, see DatasetManifest.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adapt/data.hpp"

namespace adapt {

LabeledDataset load_dense(const std::filesystem::path& path);
// Combined file with a period column; rows are grouped by period id.
TemporalDataset load_dense_periods(const std::filesystem::path& path);
void save_dense(const LabeledDataset& data, const std::filesystem::path& path);
void save_dense_periods(const TemporalDataset& data, const std::filesystem::path& path);

LabeledDataset load_sparse(const std::filesystem::path& path);
void save_sparse(const LabeledDataset& data, const std::filesystem::path& path);

enum class PeriodRole { train, validation, test };

const char* to_string(PeriodRole role) noexcept;

struct ManifestEntry {
    std::int64_t period_id = 0;
    std::string path;  // as written; relative paths resolve against the manifest's directory
    std::size_t rows = 0;
    PeriodRole role = PeriodRole::test;
};

struct DatasetManifest {
    int schema_version = 1;
    std::size_t dims = 0;
    std::size_t num_classes = 2;
    std::optional<ClassId> benign_class = ClassId{0};
    StorageKind storage = StorageKind::dense;
    std::vector<ManifestEntry> periods;  // sorted by period_id
    std::vector<std::string> class_names;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ManifestEntry& e) const;
};

struct ManifestData {
    DatasetManifest manifest;
    TemporalDataset periods;  // every entry, in period order

    // Train periods flattened, and the remaining periods in order.
    LabeledDataset initial() const;
    TemporalDataset with_role(PeriodRole role) const;
    TemporalDataset stream() const;  // validation and test periods
};

// Parses and validates the manifest structure without touching period files.
DatasetManifest read_manifest(const std::filesystem::path& path);
// Reads every period file and checks row counts, dims and classes.
ManifestData load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Writes each period to `<stem>_<period>.{csv,svm}` next to `path` and a
// manifest referencing them. Periods with index < train_periods get the train
// role, the next validation_periods the validation role, the rest test.
DatasetManifest write_dataset(const TemporalDataset& data, const std::filesystem::path& path, StorageKind storage,
                              std::size_t train_periods, std::size_t validation_periods = 0);

}  // namespace adapt
