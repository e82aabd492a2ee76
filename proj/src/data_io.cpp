#include "adapt/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include "adapt/util.hpp"
#include "json.hpp"

namespace adapt {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return lines;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(sep, start);
        out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
        if (p == std::string_view::npos) break;
        start = p + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

template <class T>
bool parse_int(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line + 1);
}

// `# key=value` metadata lines.
struct Meta {
    std::optional<std::size_t> dims;
    std::optional<std::size_t> num_classes;
    std::optional<std::optional<ClassId>> benign;
};

bool read_meta(std::string_view line, Meta& meta, const fs::path& path, std::size_t lineno) {
    if (line.empty() || line.front() != '#') return false;
    line.remove_prefix(1);
    line = trim(line);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) return true;  // plain comment
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    std::size_t n = 0;
    if (key == "dims") {
        if (!parse_int(value, n)) fail(ErrorKind::parse, where(path, lineno) + ": bad dims");
        meta.dims = n;
    } else if (key == "num_classes") {
        if (!parse_int(value, n) || n < 2) fail(ErrorKind::parse, where(path, lineno) + ": bad num_classes");
        meta.num_classes = n;
    } else if (key == "benign") {
        if (value == "none") {
            meta.benign = std::optional<ClassId>{};
        } else {
            ClassId b = 0;
            if (!parse_int(value, b)) fail(ErrorKind::parse, where(path, lineno) + ": bad benign class");
            meta.benign = std::optional<ClassId>{b};
        }
    }
    return true;
}

LabelVector make_labels(std::vector<ClassId> labels, const Meta& meta, const fs::path& path) {
    std::size_t classes = meta.num_classes.value_or(0);
    if (!meta.num_classes) {
        classes = 2;
        for (auto l : labels) classes = std::max<std::size_t>(classes, l + 1);
    }
    const std::optional<ClassId> benign = meta.benign.value_or(std::optional<ClassId>{ClassId{0}});
    try {
        return LabelVector(std::move(labels), classes, benign);
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
}

std::string meta_header(const LabelVector& labels) {
    std::string s = "# num_classes=" + std::to_string(labels.num_classes()) + "\n# benign=";
    s += labels.benign_class() ? std::to_string(*labels.benign_class()) : std::string("none");
    s += "\n";
    return s;
}

struct DenseRows {
    std::size_t dims = 0;
    Meta meta;
    std::vector<std::int64_t> periods;
    std::vector<ClassId> labels;
    std::vector<double> values;
};

DenseRows parse_dense(const fs::path& path, bool want_period) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    DenseRows out;
    std::size_t i = 0;
    while (i < lines.size() && read_meta(lines[i], out.meta, path, i)) ++i;
    if (i >= lines.size()) fail(ErrorKind::parse, path.string() + ": missing header row");

    const auto header = split(lines[i], ',');
    std::size_t first = 0;
    bool has_period = false;
    if (!header.empty() && trim(header[0]) == "period") {
        has_period = true;
        first = 1;
    }
    if (want_period && !has_period) fail(ErrorKind::parse, path.string() + ": expected a leading period column");
    if (header.size() <= first || trim(header[first]) != "label") {
        fail(ErrorKind::parse, where(path, i) + ": header must start with 'label' (or 'period,label')");
    }
    out.dims = header.size() - first - 1;
    for (std::size_t j = 0; j < out.dims; ++j) {
        if (trim(header[first + 1 + j]) != "f" + std::to_string(j)) {
            fail(ErrorKind::parse, where(path, i) + ": header column " + std::to_string(first + 1 + j) +
                                       " should be f" + std::to_string(j));
        }
    }
    const std::size_t width = header.size();
    for (++i; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto cells = split(lines[i], ',');
        if (cells.size() != width) {
            fail(ErrorKind::parse, where(path, i) + ": expected " + std::to_string(width) + " cells, got " +
                                       std::to_string(cells.size()));
        }
        if (has_period) {
            std::int64_t p = 0;
            if (!parse_int(cells[0], p)) fail(ErrorKind::parse, where(path, i) + ": bad period");
            out.periods.push_back(p);
        }
        ClassId label = 0;
        if (!parse_int(cells[first], label)) fail(ErrorKind::parse, where(path, i) + ": bad label");
        out.labels.push_back(label);
        for (std::size_t j = 0; j < out.dims; ++j) {
            double v = 0.0;
            try {
                v = parse_double(cells[first + 1 + j]);
            } catch (const Error&) {
                fail(ErrorKind::parse, where(path, i) + ": bad value in column f" + std::to_string(j));
            }
            if (!std::isfinite(v)) {
                fail(ErrorKind::validation, where(path, i) + ": non-finite value in row " +
                                                std::to_string(out.labels.size() - 1) + ", column f" +
                                                std::to_string(j));
            }
            out.values.push_back(v);
        }
    }
    return out;
}

void append_dense_row(std::string& s, const FeatureMatrix& x, std::size_t r, std::vector<double>& row) {
    x.copy_row(r, row);
    for (double v : row) {
        s += ',';
        s += format_double(v);
    }
    s += '\n';
}

std::string dense_header(std::size_t dims, bool period) {
    std::string s = period ? "period,label" : "label";
    for (std::size_t j = 0; j < dims; ++j) s += ",f" + std::to_string(j);
    s += '\n';
    return s;
}

PeriodRole parse_role(const std::string& s) {
    if (s == "train") return PeriodRole::train;
    if (s == "validation") return PeriodRole::validation;
    if (s == "test") return PeriodRole::test;
    fail(ErrorKind::validation, "unknown period role '" + s + "'");
}

}  // namespace

LabeledDataset load_dense(const fs::path& path) {
    auto rows = parse_dense(path, false);
    const auto n = rows.labels.size();
    auto labels = make_labels(std::move(rows.labels), rows.meta, path);
    return {FeatureMatrix::dense(n, rows.dims, std::move(rows.values)), std::move(labels)};
}

TemporalDataset load_dense_periods(const fs::path& path) {
    auto rows = parse_dense(path, true);
    const auto all = make_labels(rows.labels, rows.meta, path);
    std::map<std::int64_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.periods.size(); ++i) groups[rows.periods[i]].push_back(i);
    const auto x = FeatureMatrix::dense(rows.labels.size(), rows.dims, std::move(rows.values));
    std::vector<Period> parts;
    for (const auto& [id, idx] : groups) parts.push_back({id, LabeledDataset(x.select_rows(idx), all.select(idx))});
    return TemporalDataset(std::move(parts));
}

void save_dense(const LabeledDataset& data, const fs::path& path) {
    std::string s = meta_header(data.labels) + dense_header(data.dims(), false);
    std::vector<double> row(data.dims());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        s += std::to_string(data.labels[r]);
        append_dense_row(s, data.features, r, row);
    }
    write_file(path, s);
}

void save_dense_periods(const TemporalDataset& data, const fs::path& path) {
    if (data.empty()) fail(ErrorKind::empty_dataset, "no periods to save");
    std::string s = meta_header(data[0].data.labels) + dense_header(data[0].data.dims(), true);
    std::vector<double> row(data[0].data.dims());
    for (const auto& p : data) {
        for (std::size_t r = 0; r < p.data.rows(); ++r) {
            s += std::to_string(p.period_id) + "," + std::to_string(p.data.labels[r]);
            append_dense_row(s, p.data.features, r, row);
        }
    }
    write_file(path, s);
}

LabeledDataset load_sparse(const fs::path& path) {
    const auto text = read_file(path);
    const auto lines = split_lines(text);
    Meta meta;
    std::vector<ClassId> labels;
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> active;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        if (line.empty()) continue;
        if (read_meta(line, meta, path, i)) continue;
        if (!meta.dims) fail(ErrorKind::parse, path.string() + ": '# dims=N' must precede the data rows");
        const auto dims = *meta.dims;
        std::vector<std::string_view> tokens;
        for (auto tok : split(line, ' ')) {
            if (!trim(tok).empty()) tokens.push_back(trim(tok));
        }
        ClassId label = 0;
        if (!parse_int(tokens[0], label)) fail(ErrorKind::parse, where(path, i) + ": bad label");
        labels.push_back(label);
        long long prev = -1;
        for (std::size_t k = 1; k < tokens.size(); ++k) {
            const auto colon = tokens[k].find(':');
            if (colon == std::string_view::npos) fail(ErrorKind::parse, where(path, i) + ": expected index:1");
            long long idx = 0;
            if (!parse_int(tokens[k].substr(0, colon), idx) || idx < 0) {
                fail(ErrorKind::parse, where(path, i) + ": bad index '" + std::string(tokens[k]) + "'");
            }
            if (static_cast<unsigned long long>(idx) >= dims) {
                fail(ErrorKind::validation, where(path, i) + ": index " + std::to_string(idx) + " out of range for dims " +
                                                std::to_string(dims));
            }
            if (idx <= prev) fail(ErrorKind::validation, where(path, i) + ": indices must be strictly increasing");
            int value = 0;
            if (!parse_int(tokens[k].substr(colon + 1), value) || value != 1) {
                fail(ErrorKind::validation, where(path, i) + ": sparse-binary values must be 1");
            }
            active.push_back(static_cast<std::uint32_t>(idx));
            prev = idx;
        }
        offsets.push_back(active.size());
    }
    if (!meta.dims) fail(ErrorKind::parse, path.string() + ": missing '# dims=N' header");
    const auto n = labels.size();
    auto lv = make_labels(std::move(labels), meta, path);
    return {FeatureMatrix::sparse_binary(n, *meta.dims, std::move(offsets), std::move(active)), std::move(lv)};
}

void save_sparse(const LabeledDataset& data, const fs::path& path) {
    if (!data.features.is_sparse()) fail(ErrorKind::unsupported, "save_sparse needs sparse-binary features");
    std::string s = "# dims=" + std::to_string(data.dims()) + "\n" + meta_header(data.labels);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        s += std::to_string(data.labels[r]);
        for (auto j : data.features.active(r)) s += " " + std::to_string(j) + ":1";
        s += '\n';
    }
    write_file(path, s);
}

const char* to_string(PeriodRole role) noexcept {
    switch (role) {
        case PeriodRole::train: return "train";
        case PeriodRole::validation: return "validation";
        case PeriodRole::test: return "test";
    }
    return "?";
}

fs::path DatasetManifest::resolve(const ManifestEntry& e) const {
    const fs::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest read_manifest(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorKind::io, "manifest not found: '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
    static const std::set<std::string> allowed{"schema_version", "dims",    "num_classes", "benign_class",
                                               "storage",        "periods", "class_names"};
    if (!j.is_object()) fail(ErrorKind::validation, path.string() + ": manifest must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.contains(k)) fail(ErrorKind::validation, path.string() + ": unknown manifest key '" + k + "'");
    }
    DatasetManifest m;
    m.base_dir = path.parent_path();
    try {
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != 1) fail(ErrorKind::validation, "unsupported schema_version");
        m.dims = j.at("dims").get<std::size_t>();
        m.num_classes = j.at("num_classes").get<std::size_t>();
        if (m.num_classes < 2) fail(ErrorKind::validation, "num_classes must be at least 2");
        if (j.contains("benign_class") && !j["benign_class"].is_null()) {
            m.benign_class = j["benign_class"].get<ClassId>();
            if (*m.benign_class >= m.num_classes) fail(ErrorKind::validation, "benign_class out of range");
        } else {
            m.benign_class.reset();
        }
        const auto storage = j.at("storage").get<std::string>();
        if (storage == "dense") {
            m.storage = StorageKind::dense;
        } else if (storage == "sparse") {
            m.storage = StorageKind::sparse_binary;
        } else {
            fail(ErrorKind::validation, "storage must be 'dense' or 'sparse'");
        }
        if (j.contains("class_names")) m.class_names = j["class_names"].get<std::vector<std::string>>();
        if (!m.class_names.empty() && m.class_names.size() != m.num_classes) {
            fail(ErrorKind::validation, "class_names must list num_classes names");
        }
        for (const auto& e : j.at("periods")) {
            for (const auto& [k, v] : e.items()) {
                if (k != "period_id" && k != "path" && k != "rows" && k != "role") {
                    fail(ErrorKind::validation, "unknown period key '" + k + "'");
                }
            }
            ManifestEntry entry;
            entry.period_id = e.at("period_id").get<std::int64_t>();
            entry.path = e.at("path").get<std::string>();
            entry.rows = e.at("rows").get<std::size_t>();
            entry.role = parse_role(e.value("role", std::string("test")));
            m.periods.push_back(entry);
        }
    } catch (const Json::exception& e) {
        fail(ErrorKind::validation, path.string() + ": " + e.what());
    } catch (const Error& e) {
        fail(e.kind(), path.string() + ": " + e.what());
    }
    std::stable_sort(m.periods.begin(), m.periods.end(),
                     [](const auto& a, const auto& b) { return a.period_id < b.period_id; });
    for (std::size_t i = 1; i < m.periods.size(); ++i) {
        if (m.periods[i].period_id == m.periods[i - 1].period_id) {
            fail(ErrorKind::validation, path.string() + ": duplicate period " + std::to_string(m.periods[i].period_id));
        }
    }
    if (m.periods.empty()) fail(ErrorKind::validation, path.string() + ": no periods listed");
    return m;
}

ManifestData load_manifest(const fs::path& path) {
    ManifestData out;
    out.manifest = read_manifest(path);
    const auto& m = out.manifest;
    for (const auto& e : m.periods) {
        if (!fs::exists(m.resolve(e))) {
            fail(ErrorKind::io, "period " + std::to_string(e.period_id) + ": missing file '" + m.resolve(e).string() + "'");
        }
    }
    std::vector<Period> parts;
    for (const auto& e : m.periods) {
        const auto file = m.resolve(e);
        const std::string tag = "period " + std::to_string(e.period_id) + " ('" + file.string() + "')";
        LabeledDataset d = m.storage == StorageKind::dense ? load_dense(file) : load_sparse(file);
        if (d.rows() != e.rows) {
            fail(ErrorKind::validation, tag + ": manifest says " + std::to_string(e.rows) + " rows, file has " +
                                            std::to_string(d.rows()));
        }
        if (d.dims() != m.dims) {
            fail(ErrorKind::validation, tag + ": dims " + std::to_string(d.dims()) + " != manifest dims " +
                                            std::to_string(m.dims));
        }
        for (auto l : d.labels.values()) {
            if (l >= m.num_classes) fail(ErrorKind::validation, tag + ": label outside num_classes");
        }
        // manifest metadata is authoritative for class count and benign id
        d.labels = LabelVector(d.labels.values(), m.num_classes, m.benign_class);
        parts.push_back({e.period_id, std::move(d)});
    }
    out.periods = TemporalDataset(std::move(parts));
    return out;
}

LabeledDataset ManifestData::initial() const {
    std::vector<LabeledDataset> parts;
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (manifest.periods[i].role == PeriodRole::train) parts.push_back(periods[i].data);
    }
    if (parts.empty()) fail(ErrorKind::validation, "manifest has no train periods");
    return concat(parts);
}

TemporalDataset ManifestData::with_role(PeriodRole role) const {
    std::vector<Period> parts;
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (manifest.periods[i].role == role) parts.push_back(periods[i]);
    }
    return TemporalDataset(std::move(parts));
}

TemporalDataset ManifestData::stream() const {
    std::vector<Period> parts;
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (manifest.periods[i].role != PeriodRole::train) parts.push_back(periods[i]);
    }
    return TemporalDataset(std::move(parts));
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
    Json j;
    j["schema_version"] = m.schema_version;
    j["dims"] = m.dims;
    j["num_classes"] = m.num_classes;
    j["benign_class"] = m.benign_class ? Json(*m.benign_class) : Json(nullptr);
    j["storage"] = m.storage == StorageKind::dense ? "dense" : "sparse";
    if (!m.class_names.empty()) j["class_names"] = m.class_names;
    j["periods"] = Json::array();
    for (const auto& e : m.periods) {
        j["periods"].push_back({{"period_id", e.period_id}, {"path", e.path}, {"rows", e.rows},
                                {"role", to_string(e.role)}});
    }
    write_file(path, j.dump(2) + "\n");
}

DatasetManifest write_dataset(const TemporalDataset& data, const fs::path& path, StorageKind storage,
                              std::size_t train_periods, std::size_t validation_periods) {
    if (data.empty()) fail(ErrorKind::empty_dataset, "no periods to write");
    DatasetManifest m;
    m.dims = data[0].data.dims();
    m.num_classes = data[0].data.num_classes();
    m.benign_class = data[0].data.labels.benign_class();
    m.storage = storage;
    m.base_dir = path.parent_path();
    const auto stem = path.stem().string();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& p = data[i];
        const std::string name =
            stem + "_" + std::to_string(p.period_id) + (storage == StorageKind::dense ? ".csv" : ".svm");
        const auto file = m.base_dir / name;
        if (storage == StorageKind::dense) {
            save_dense(p.data, file);
        } else {
            if (!p.data.features.is_sparse()) fail(ErrorKind::unsupported, "sparse output needs sparse-binary data");
            save_sparse(p.data, file);
        }
        const PeriodRole role = i < train_periods                        ? PeriodRole::train
                                : i < train_periods + validation_periods ? PeriodRole::validation
                                                                         : PeriodRole::test;
        m.periods.push_back({p.period_id, name, p.data.rows(), role});
    }
    save_manifest(m, path);
    return m;
}

}  // namespace adapt
