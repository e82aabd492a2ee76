#include <fstream>
#include <set>
#include <sstream>

#include "adapt/commands.hpp"
#include "adapt/util.hpp"

namespace adapt {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) fail(ErrorKind::validation, context + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) fail(ErrorKind::validation, context + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

double uniform(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

}  // namespace

fs::path ExperimentConfig::manifest_path() const {
    const fs::path p(manifest);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

fs::path ExperimentConfig::output_path() const {
    const fs::path p(output_dir);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ExperimentConfig config_from_json(const Json& j, const fs::path& base_dir) {
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    try {
        check_keys(j, {"data", "learner", "adapt", "evaluation", "search", "output", "override_ranges"}, "config");
        if (!j.contains("data")) fail(ErrorKind::validation, "config: missing 'data' section");
        const auto& data = j.at("data");
        check_keys(data, {"manifest"}, "data");
        cfg.manifest = data.at("manifest").get<std::string>();

        if (j.contains("learner")) {
            try {
                cfg.learner = learner_spec_from_json(j.at("learner"));
            } catch (const Error& e) {
                fail(ErrorKind::validation, e.what());
            }
        }
        if (j.contains("adapt")) {
            const auto& a = j.at("adapt");
            check_keys(a,
                       {"mode", "threshold_benign", "threshold_malware", "lambda", "mask_ratio", "mixup_alpha",
                        "source_free", "active_budget", "adaptive_thresholds", "augmentation", "mixup",
                        "chain_thresholds", "invert_mask"},
                       "adapt");
            auto& c = cfg.adapt;
            if (a.contains("mode")) c.mode = parse_adapt_mode(a.at("mode").get<std::string>());
            read_opt(a, "threshold_benign", c.thresholds.benign);
            read_opt(a, "threshold_malware", c.thresholds.malware);
            read_opt(a, "lambda", c.lambda);
            read_opt(a, "mask_ratio", c.p_a);
            read_opt(a, "mixup_alpha", c.alpha);
            read_opt(a, "source_free", c.source_free);
            read_opt(a, "active_budget", c.active_budget);
            read_opt(a, "adaptive_thresholds", c.adaptive_thresholds);
            read_opt(a, "augmentation", c.augmentation);
            read_opt(a, "mixup", c.mixup);
            read_opt(a, "chain_thresholds", c.chain_thresholds);
            read_opt(a, "invert_mask", c.invert_mask);
        }
        if (j.contains("evaluation")) {
            const auto& e = j.at("evaluation");
            check_keys(e, {"bins", "seeds", "sample_weighted"}, "evaluation");
            read_opt(e, "bins", cfg.evaluation.bins);
            read_opt(e, "seeds", cfg.evaluation.seeds);
            read_opt(e, "sample_weighted", cfg.evaluation.sample_weighted);
        }
        if (j.contains("search")) {
            const auto& s = j.at("search");
            check_keys(s, {"budget", "seed"}, "search");
            read_opt(s, "budget", cfg.search.budget);
            read_opt(s, "seed", cfg.search.seed);
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            check_keys(o, {"dir"}, "output");
            read_opt(o, "dir", cfg.output_dir);
        }
        read_opt(j, "override_ranges", cfg.override_ranges);
    } catch (const Json::exception& e) {
        fail(ErrorKind::validation, std::string("config: ") + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::validation, e.what());
    }
    return cfg;
}

Json to_json(const ExperimentConfig& cfg) {
    Json j;
    j["data"] = {{"manifest", cfg.manifest}};
    j["learner"] = to_json(cfg.learner);
    const auto& c = cfg.adapt;
    j["adapt"] = {{"mode", to_string(c.mode)},
                  {"threshold_benign", c.thresholds.benign},
                  {"threshold_malware", c.thresholds.malware},
                  {"lambda", c.lambda},
                  {"mask_ratio", c.p_a},
                  {"mixup_alpha", c.alpha},
                  {"source_free", c.source_free},
                  {"active_budget", c.active_budget},
                  {"adaptive_thresholds", c.adaptive_thresholds},
                  {"augmentation", c.augmentation},
                  {"mixup", c.mixup},
                  {"chain_thresholds", c.chain_thresholds},
                  {"invert_mask", c.invert_mask}};
    j["evaluation"] = {{"bins", cfg.evaluation.bins},
                       {"seeds", cfg.evaluation.seeds},
                       {"sample_weighted", cfg.evaluation.sample_weighted}};
    j["search"] = {{"budget", cfg.search.budget}, {"seed", cfg.search.seed}};
    j["output"] = {{"dir", cfg.output_dir}};
    j["override_ranges"] = cfg.override_ranges;
    return j;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in, nullptr, true, true);  // allow // comments
    } catch (const Json::parse_error& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

void save_config(const ExperimentConfig& cfg, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << to_json(cfg).dump(2) << "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(to_json(cfg).dump()); }

void validate(const ExperimentConfig& cfg) {
    validate(cfg.adapt);
    if (cfg.evaluation.bins == 0) fail(ErrorKind::validation, "evaluation.bins must be positive");
    if (cfg.evaluation.seeds.empty()) fail(ErrorKind::validation, "evaluation.seeds must not be empty");
    if (cfg.search.budget == 0) fail(ErrorKind::validation, "search.budget must be at least 1");
    if (cfg.manifest.empty()) fail(ErrorKind::validation, "data.manifest is empty");
    if (cfg.override_ranges) return;
    if (auto msg = check_ranges(cfg.adapt); !msg.empty()) {
        fail(ErrorKind::validation, msg + " (set override_ranges to allow)");
    }
    if (auto msg = check_ranges(cfg.learner); !msg.empty()) {
        fail(ErrorKind::validation, msg + " (set override_ranges to allow)");
    }
}

AdaptConfig sample_adapt_config(const AdaptConfig& base, Rng& rng) {
    AdaptConfig c = base;
    c.thresholds.benign = uniform(0.8, 0.99, rng);
    c.thresholds.malware = uniform(0.6, 0.99, rng);
    c.lambda = uniform(0.0, 0.5, rng);
    c.p_a = uniform(0.0, 0.2, rng);
    c.alpha = uniform(0.0, 0.2, rng);
    return c;
}

}  // namespace adapt
