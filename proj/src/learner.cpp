#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "adapt/learners.hpp"
#include "adapt/util.hpp"

namespace adapt {

namespace {

constexpr int kModelFormatVersion = 1;

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& context) {
    if (!j.is_object()) fail(ErrorKind::parse, context + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) fail(ErrorKind::parse, context + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

SplitCriterion parse_criterion(const std::string& s) {
    if (s == "gini") return SplitCriterion::gini;
    if (s == "entropy") return SplitCriterion::entropy;
    if (s == "log_loss") return SplitCriterion::log_loss;
    fail(ErrorKind::parse, "unknown split criterion '" + s + "'");
}

const std::vector<std::vector<int>> kMlpLayerChoices{
    {100, 100}, {512, 256, 128}, {512, 384, 256, 128}, {512, 384, 256, 128, 64}};
const std::vector<int> kMlpEpochChoices{25, 30, 35, 40, 50, 60, 80, 100, 150};
const std::vector<double> kFineTuneFractions{0.1, 0.2, 0.3, 0.4, 0.5};

template <typename T>
const T& pick(const std::vector<T>& choices, Rng& rng) {
    return choices[std::uniform_int_distribution<std::size_t>(0, choices.size() - 1)(rng)];
}

double uniform(double lo, double hi, Rng& rng) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

const char* to_string(LearnerKind kind) noexcept {
    switch (kind) {
        case LearnerKind::logistic: return "logistic";
        case LearnerKind::forest: return "forest";
        case LearnerKind::mlp: return "mlp";
    }
    return "?";
}

const char* to_string(RetrainPolicy policy) noexcept {
    return policy == RetrainPolicy::fine_tune ? "fine_tune" : "from_scratch";
}

const char* to_string(SplitCriterion c) noexcept {
    switch (c) {
        case SplitCriterion::gini: return "gini";
        case SplitCriterion::entropy: return "entropy";
        case SplitCriterion::log_loss: return "log_loss";
    }
    return "?";
}

LearnerKind parse_learner_kind(const std::string& s) {
    if (s == "logistic") return LearnerKind::logistic;
    if (s == "forest") return LearnerKind::forest;
    if (s == "mlp") return LearnerKind::mlp;
    fail(ErrorKind::parse, "unknown learner kind '" + s + "'");
}

RetrainPolicy retrain_policy(LearnerKind kind) noexcept {
    return kind == LearnerKind::mlp ? RetrainPolicy::fine_tune : RetrainPolicy::from_scratch;
}

// ---------------------------------------------------------------- targets

std::size_t TrainTargets::size() const noexcept {
    return is_fractional() ? fractional().rows() : hard().size();
}

std::size_t TrainTargets::num_classes() const noexcept {
    return is_fractional() ? fractional().num_classes() : hard().num_classes();
}

ProbabilityMatrix TrainTargets::as_distribution() const {
    return is_fractional() ? fractional() : ProbabilityMatrix::one_hot(hard());
}

std::vector<double> class_balance_weights(const ProbabilityMatrix& targets, bool balanced) {
    std::vector<double> w(targets.rows(), 1.0);
    if (!balanced || targets.rows() == 0) return w;
    const auto classes = targets.num_classes();
    std::vector<double> mass(classes, 0.0);
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        for (std::size_t k = 0; k < classes; ++k) mass[k] += targets(r, k);
    }
    std::vector<double> per_class(classes, 0.0);
    for (std::size_t k = 0; k < classes; ++k) {
        if (mass[k] > 0.0) per_class[k] = static_cast<double>(targets.rows()) / (static_cast<double>(classes) * mass[k]);
    }
    for (std::size_t r = 0; r < targets.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < classes; ++k) s += targets(r, k) * per_class[k];
        w[r] = s;
    }
    return w;
}

// ---------------------------------------------------------------- specs

LearnerSpec default_learner_spec(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::logistic: return {LogisticParams{}};
        case LearnerKind::forest: return {ForestParams{}};
        case LearnerKind::mlp: return {MlpParams{}};
    }
    return {LogisticParams{}};
}

Json to_json(const LearnerSpec& spec) {
    Json j;
    j["kind"] = to_string(spec.kind());
    if (const auto* p = std::get_if<LogisticParams>(&spec.params)) {
        j["l2"] = p->l2;
        j["balanced"] = p->balanced;
        j["max_iterations"] = p->max_iterations;
        j["tolerance"] = p->tolerance;
    } else if (const auto* p = std::get_if<ForestParams>(&spec.params)) {
        j["n_estimators"] = p->n_estimators;
        j["max_depth"] = p->max_depth;
        j["criterion"] = to_string(p->criterion);
        j["balanced"] = p->balanced;
    } else if (const auto* p = std::get_if<MlpParams>(&spec.params)) {
        j["layers"] = p->layers;
        j["learning_rate"] = p->learning_rate;
        j["dropout"] = p->dropout;
        j["batch_size"] = p->batch_size;
        j["epochs"] = p->epochs;
        j["balanced"] = p->balanced;
        j["fine_tune_fraction"] = p->fine_tune_fraction;
    }
    return j;
}

LearnerSpec learner_spec_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind")) fail(ErrorKind::parse, "learner: missing 'kind'");
    const auto kind = parse_learner_kind(j.at("kind").get<std::string>());
    try {
        switch (kind) {
            case LearnerKind::logistic: {
                check_keys(j, {"kind", "l2", "balanced", "max_iterations", "tolerance"}, "learner");
                LogisticParams p;
                read_opt(j, "l2", p.l2);
                read_opt(j, "balanced", p.balanced);
                read_opt(j, "max_iterations", p.max_iterations);
                read_opt(j, "tolerance", p.tolerance);
                return {p};
            }
            case LearnerKind::forest: {
                check_keys(j, {"kind", "n_estimators", "max_depth", "criterion", "balanced"}, "learner");
                ForestParams p;
                read_opt(j, "n_estimators", p.n_estimators);
                read_opt(j, "max_depth", p.max_depth);
                if (j.contains("criterion")) p.criterion = parse_criterion(j.at("criterion").get<std::string>());
                read_opt(j, "balanced", p.balanced);
                if (p.n_estimators < 1 || p.max_depth < 1) fail(ErrorKind::validation, "forest sizes must be positive");
                return {p};
            }
            case LearnerKind::mlp: {
                check_keys(j, {"kind", "layers", "learning_rate", "dropout", "batch_size", "epochs", "balanced",
                               "fine_tune_fraction"},
                           "learner");
                MlpParams p;
                read_opt(j, "layers", p.layers);
                read_opt(j, "learning_rate", p.learning_rate);
                read_opt(j, "dropout", p.dropout);
                read_opt(j, "batch_size", p.batch_size);
                read_opt(j, "epochs", p.epochs);
                read_opt(j, "balanced", p.balanced);
                read_opt(j, "fine_tune_fraction", p.fine_tune_fraction);
                if (p.layers.empty() || std::any_of(p.layers.begin(), p.layers.end(), [](int w) { return w < 1; })) {
                    fail(ErrorKind::validation, "mlp layers must be a nonempty list of positive widths");
                }
                if (p.batch_size < 1 || p.epochs < 0) fail(ErrorKind::validation, "mlp batch/epochs invalid");
                if (!(p.dropout >= 0.0 && p.dropout < 1.0)) fail(ErrorKind::validation, "mlp dropout must be in [0,1)");
                return {p};
            }
        }
    } catch (const Json::exception& e) {
        fail(ErrorKind::parse, std::string("learner: ") + e.what());
    }
    fail(ErrorKind::parse, "learner: unreachable");
}

LearnerSpec sample_learner_spec(LearnerKind kind, Rng& rng) {
    switch (kind) {
        case LearnerKind::logistic: {
            LogisticParams p;
            p.l2 = std::pow(10.0, uniform(-6.0, 0.0, rng));
            p.balanced = uniform01(rng) < 0.5;
            return {p};
        }
        case LearnerKind::forest: {
            ForestParams p;
            p.n_estimators = static_cast<int>(std::lround(std::pow(2.0, uniform(5.0, 10.0, rng))));
            p.max_depth = static_cast<int>(std::lround(std::pow(2.0, uniform(5.0, 10.0, rng))));
            p.criterion = pick(std::vector<SplitCriterion>{SplitCriterion::gini, SplitCriterion::entropy,
                                                           SplitCriterion::log_loss},
                               rng);
            p.balanced = uniform01(rng) < 0.5;
            return {p};
        }
        case LearnerKind::mlp: {
            MlpParams p;
            p.layers = pick(kMlpLayerChoices, rng);
            p.learning_rate = std::pow(10.0, uniform(-5.0, -3.0, rng));
            p.dropout = uniform(0.0, 0.5, rng);
            p.batch_size = 1 << std::uniform_int_distribution<int>(5, 10)(rng);
            p.epochs = pick(kMlpEpochChoices, rng);
            p.balanced = uniform01(rng) < 0.5;
            p.fine_tune_fraction = pick(kFineTuneFractions, rng);
            return {p};
        }
    }
    return default_learner_spec(kind);
}

std::string check_ranges(const LearnerSpec& spec) {
    if (const auto* p = std::get_if<LogisticParams>(&spec.params)) {
        if (!in(p->l2, 1e-6, 1.0)) return "logistic l2 outside [1e-6, 1]";
    } else if (const auto* p = std::get_if<ForestParams>(&spec.params)) {
        if (p->n_estimators < 32 || p->n_estimators > 1024) return "forest n_estimators outside [2^5, 2^10]";
        if (p->max_depth < 32 || p->max_depth > 1024) return "forest max_depth outside [2^5, 2^10]";
    } else if (const auto* p = std::get_if<MlpParams>(&spec.params)) {
        if (std::find(kMlpLayerChoices.begin(), kMlpLayerChoices.end(), p->layers) == kMlpLayerChoices.end()) {
            return "mlp layers not one of the search choices";
        }
        if (!in(p->learning_rate, 1e-5, 1e-3)) return "mlp learning_rate outside [1e-5, 1e-3]";
        if (!in(p->dropout, 0.0, 0.5)) return "mlp dropout outside [0, 0.5]";
        const bool pow2 = p->batch_size >= 32 && p->batch_size <= 1024 && (p->batch_size & (p->batch_size - 1)) == 0;
        if (!pow2) return "mlp batch_size not a power of two in [32, 1024]";
        if (std::find(kMlpEpochChoices.begin(), kMlpEpochChoices.end(), p->epochs) == kMlpEpochChoices.end()) {
            return "mlp epochs not one of the search choices";
        }
        if (std::find(kFineTuneFractions.begin(), kFineTuneFractions.end(), p->fine_tune_fraction) ==
            kFineTuneFractions.end()) {
            return "mlp fine_tune_fraction not one of {0.1..0.5}";
        }
    }
    return {};
}

// ---------------------------------------------------------------- Learner

std::unique_ptr<Learner> Learner::fit(const FeatureMatrix& x, const TrainTargets& targets, std::uint64_t seed) const {
    if (x.rows() == 0) fail(ErrorKind::empty_dataset, "cannot fit on an empty dataset");
    if (targets.size() != x.rows()) {
        fail(ErrorKind::dimension_mismatch, "targets (" + std::to_string(targets.size()) + ") differ from rows (" +
                                                std::to_string(x.rows()) + ")");
    }
    if (targets.is_fractional() && !supports_fractional_targets()) {
        fail(ErrorKind::unsupported, std::string(to_string(kind())) + " learner does not accept fractional targets");
    }
    auto out = clone();
    out->dims_ = x.dims();
    out->classes_ = targets.num_classes();
    const auto dist = targets.as_distribution();
    out->train(x, dist, class_balance_weights(dist, balanced()), seed);
    out->trained_ = true;
    return out;
}

std::unique_ptr<Learner> Learner::fine_tune(const FeatureMatrix& x, const TrainTargets& targets,
                                            double epoch_fraction, std::uint64_t seed) const {
    if (!supports_fine_tune()) {
        fail(ErrorKind::unsupported, std::string(to_string(kind())) + " learner does not support fine-tuning");
    }
    if (!trained_) fail(ErrorKind::not_trained, "fine_tune requires a trained learner");
    if (x.dims() != dims_) fail(ErrorKind::dimension_mismatch, "fine_tune dims differ from training dims");
    if (targets.size() != x.rows()) fail(ErrorKind::dimension_mismatch, "targets differ from rows");
    if (targets.num_classes() != classes_) fail(ErrorKind::dimension_mismatch, "class count differs from training");
    if (!(epoch_fraction >= 0.0)) fail(ErrorKind::invalid_argument, "epoch_fraction must be nonnegative");
    auto out = clone();
    if (epoch_fraction == 0.0 || x.rows() == 0) return out;
    const auto dist = targets.as_distribution();
    out->continue_training(x, dist, class_balance_weights(dist, balanced()), epoch_fraction, seed);
    return out;
}

void Learner::continue_training(const FeatureMatrix&, const ProbabilityMatrix&, const std::vector<double>&, double,
                                std::uint64_t) {
    fail(ErrorKind::unsupported, "fine-tuning not supported");
}

ProbabilityMatrix Learner::predict_proba(const FeatureMatrix& x) const {
    if (!trained_) fail(ErrorKind::not_trained, "predict_proba requires a trained learner");
    if (x.dims() != dims_) {
        fail(ErrorKind::dimension_mismatch, "input has " + std::to_string(x.dims()) + " dims, model expects " +
                                                std::to_string(dims_));
    }
    return predict(x);
}

Json Learner::to_json() const {
    Json j;
    j["format"] = "adapt-learner";
    j["version"] = kModelFormatVersion;
    j["kind"] = adapt::to_string(kind());
    j["hyperparams"] = adapt::to_json(spec());
    j["trained"] = trained_;
    j["dims"] = dims_;
    j["num_classes"] = classes_;
    j["parameters"] = trained_ ? parameters_json() : Json::object();
    return j;
}

std::uint64_t Learner::checksum() const { return fnv1a64(to_json().dump()); }

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec) {
    if (const auto* p = std::get_if<LogisticParams>(&spec.params)) return std::make_unique<LogisticLearner>(*p);
    if (const auto* p = std::get_if<ForestParams>(&spec.params)) return std::make_unique<ForestLearner>(*p);
    return std::make_unique<MlpLearner>(std::get<MlpParams>(spec.params));
}

std::unique_ptr<Learner> load_learner(const Json& j) {
    try {
        if (j.value("format", std::string{}) != "adapt-learner") fail(ErrorKind::parse, "not an adapt-learner document");
        if (j.at("version").get<int>() != kModelFormatVersion) {
            fail(ErrorKind::parse, "unsupported model format version " + j.at("version").dump());
        }
        auto learner = make_learner(learner_spec_from_json(j.at("hyperparams")));
        if (to_string(learner->kind()) != j.at("kind").get<std::string>()) {
            fail(ErrorKind::parse, "model kind disagrees with hyperparameters");
        }
        learner->dims_ = j.at("dims").get<std::size_t>();
        learner->classes_ = j.at("num_classes").get<std::size_t>();
        learner->trained_ = j.at("trained").get<bool>();
        if (learner->trained_) learner->load_parameters(j.at("parameters"));
        return learner;
    } catch (const Json::exception& e) {
        fail(ErrorKind::parse, std::string("model: ") + e.what());
    }
}

void save_learner(const Learner& learner, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write model file " + path);
    out << learner.to_json().dump() << '\n';
}

std::unique_ptr<Learner> load_learner_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open model file " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        fail(ErrorKind::parse, path + ": " + e.what());
    }
    return load_learner(j);
}

}  // namespace adapt
