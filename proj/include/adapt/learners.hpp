#pragma once

// Model-agnostic probabilistic classifiers. A Learner value carries its
// hyperparameters and (once trained) its parameters; fit and fine_tune return
// new values and never mutate the receiver.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "adapt/data.hpp"
#include "adapt/random.hpp"
#include "json.hpp"

namespace adapt {

using Json = nlohmann::json;

enum class LearnerKind { logistic, forest, mlp };
enum class RetrainPolicy { from_scratch, fine_tune };
enum class SplitCriterion { gini, entropy, log_loss };

const char* to_string(LearnerKind kind) noexcept;
const char* to_string(RetrainPolicy policy) noexcept;
const char* to_string(SplitCriterion c) noexcept;
LearnerKind parse_learner_kind(const std::string& s);

RetrainPolicy retrain_policy(LearnerKind kind) noexcept;

// Either hard class ids or a per-sample class distribution.
class TrainTargets {
public:
    TrainTargets(LabelVector hard) : value_(std::move(hard)) {}  // NOLINT(google-explicit-constructor)
    TrainTargets(ProbabilityMatrix fractional) : value_(std::move(fractional)) {}  // NOLINT

    bool is_fractional() const noexcept { return std::holds_alternative<ProbabilityMatrix>(value_); }
    std::size_t size() const noexcept;
    std::size_t num_classes() const noexcept;
    const LabelVector& hard() const { return std::get<LabelVector>(value_); }
    const ProbabilityMatrix& fractional() const { return std::get<ProbabilityMatrix>(value_); }
    // One-hot expansion for hard targets.
    ProbabilityMatrix as_distribution() const;

private:
    std::variant<LabelVector, ProbabilityMatrix> value_;
};

struct LogisticParams {
    double l2 = 1e-4;
    bool balanced = false;
    int max_iterations = 5000;
    double tolerance = 1e-8;
};

struct ForestParams {
    int n_estimators = 100;
    int max_depth = 32;
    SplitCriterion criterion = SplitCriterion::gini;
    bool balanced = false;
};

struct MlpParams {
    std::vector<int> layers{100, 100};
    double learning_rate = 1e-3;
    double dropout = 0.0;
    int batch_size = 64;
    int epochs = 30;
    bool balanced = false;
    double fine_tune_fraction = 0.3;
};

struct LearnerSpec {
    std::variant<LogisticParams, ForestParams, MlpParams> params;

    LearnerKind kind() const noexcept { return static_cast<LearnerKind>(params.index()); }
};

LearnerSpec default_learner_spec(LearnerKind kind);
Json to_json(const LearnerSpec& spec);
// Strict: unknown keys are errors.
LearnerSpec learner_spec_from_json(const Json& j);

// Random-search space over learner hyperparameters (log-uniform where the
// ranges are exponents). Every sampled value passes check_ranges.
LearnerSpec sample_learner_spec(LearnerKind kind, Rng& rng);
// Empty string when inside the search ranges, else a description.
std::string check_ranges(const LearnerSpec& spec);

class Learner {
public:
    virtual ~Learner() = default;

    virtual LearnerKind kind() const noexcept = 0;
    virtual bool supports_fractional_targets() const noexcept = 0;
    virtual bool supports_fine_tune() const noexcept { return false; }
    virtual LearnerSpec spec() const = 0;

    bool trained() const noexcept { return trained_; }
    std::size_t dims() const noexcept { return dims_; }
    std::size_t num_classes() const noexcept { return classes_; }

    // Deterministic given (features, targets, hyperparameters, seed).
    std::unique_ptr<Learner> fit(const FeatureMatrix& x, const TrainTargets& targets, std::uint64_t seed) const;
    std::unique_ptr<Learner> fit(const LabeledDataset& data, std::uint64_t seed) const {
        return fit(data.features, data.labels, seed);
    }

    // Continues optimisation from the current parameters for
    // ceil(epoch_fraction * base epochs) epochs.
    std::unique_ptr<Learner> fine_tune(const FeatureMatrix& x, const TrainTargets& targets,
                                       double epoch_fraction, std::uint64_t seed) const;

    ProbabilityMatrix predict_proba(const FeatureMatrix& x) const;

    // Versioned, self-describing structured-text form.
    Json to_json() const;
    std::uint64_t checksum() const;

    virtual std::unique_ptr<Learner> clone() const = 0;

protected:
    virtual void train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                       const std::vector<double>& sample_weights, std::uint64_t seed) = 0;
    virtual void continue_training(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                                   const std::vector<double>& sample_weights, double epoch_fraction,
                                   std::uint64_t seed);
    virtual ProbabilityMatrix predict(const FeatureMatrix& x) const = 0;
    virtual bool balanced() const noexcept = 0;
    virtual Json parameters_json() const = 0;
    virtual void load_parameters(const Json& j) = 0;

    friend std::unique_ptr<Learner> load_learner(const Json& j);

    bool trained_ = false;
    std::size_t dims_ = 0;
    std::size_t classes_ = 0;
};

std::unique_ptr<Learner> make_learner(const LearnerSpec& spec);
std::unique_ptr<Learner> load_learner(const Json& j);
void save_learner(const Learner& learner, const std::string& path);
std::unique_ptr<Learner> load_learner_file(const std::string& path);

// Per-sample weights n / (C * count_c) mixed over the target distribution;
// all ones when balancing is off.
std::vector<double> class_balance_weights(const ProbabilityMatrix& targets, bool balanced);

// ------------------------------------------------------------------ learners

class LogisticLearner final : public Learner {
public:
    explicit LogisticLearner(LogisticParams params = {}) : params_(params) {}

    // Binary models use one weight vector (p_1 = sigmoid, p_0 = 1 - p_1);
    // multiclass models use one row of weights per class with softmax.
    static LogisticLearner from_weights(std::size_t dims, std::size_t num_classes,
                                        std::vector<double> weights, std::vector<double> bias,
                                        LogisticParams params = {});

    LearnerKind kind() const noexcept override { return LearnerKind::logistic; }
    bool supports_fractional_targets() const noexcept override { return true; }
    LearnerSpec spec() const override { return {params_}; }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<LogisticLearner>(*this); }

    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& bias() const noexcept { return bias_; }
    int iterations_run() const noexcept { return iterations_; }

protected:
    void train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
               const std::vector<double>& sample_weights, std::uint64_t seed) override;
    ProbabilityMatrix predict(const FeatureMatrix& x) const override;
    bool balanced() const noexcept override { return params_.balanced; }
    Json parameters_json() const override;
    void load_parameters(const Json& j) override;

private:
    std::size_t outputs() const noexcept { return classes_ == 2 ? 1 : classes_; }
    void train_binary(const FeatureMatrix& x, const ProbabilityMatrix& t, const std::vector<double>& w);
    void train_multiclass(const FeatureMatrix& x, const ProbabilityMatrix& t, const std::vector<double>& w);

    LogisticParams params_;
    std::vector<double> weights_;  // outputs x dims, row-major
    std::vector<double> bias_;     // outputs
    int iterations_ = 0;
};

class ForestLearner final : public Learner {
public:
    struct Node {
        std::int32_t feature = -1;  // -1 marks a leaf
        double threshold = 0.0;     // go left when x[feature] <= threshold
        std::int32_t left = -1;
        std::int32_t right = -1;
        ClassId label = 0;
    };
    using Tree = std::vector<Node>;

    explicit ForestLearner(ForestParams params = {}) : params_(params) {}

    static ForestLearner from_trees(std::size_t dims, std::size_t num_classes, std::vector<Tree> trees,
                                    ForestParams params = {});

    LearnerKind kind() const noexcept override { return LearnerKind::forest; }
    bool supports_fractional_targets() const noexcept override { return false; }
    LearnerSpec spec() const override { return {params_}; }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<ForestLearner>(*this); }

    const std::vector<Tree>& trees() const noexcept { return trees_; }

protected:
    void train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
               const std::vector<double>& sample_weights, std::uint64_t seed) override;
    ProbabilityMatrix predict(const FeatureMatrix& x) const override;
    bool balanced() const noexcept override { return params_.balanced; }
    Json parameters_json() const override;
    void load_parameters(const Json& j) override;

private:
    ClassId vote(const Tree& tree, const FeatureMatrix& x, std::size_t row) const;

    ForestParams params_;
    std::vector<Tree> trees_;
};

class MlpLearner final : public Learner {
public:
    explicit MlpLearner(MlpParams params = {}) : params_(std::move(params)) {}

    LearnerKind kind() const noexcept override { return LearnerKind::mlp; }
    bool supports_fractional_targets() const noexcept override { return true; }
    bool supports_fine_tune() const noexcept override { return true; }
    LearnerSpec spec() const override { return {params_}; }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<MlpLearner>(*this); }

    // Activations of the last hidden layer (rows x last width).
    FeatureMatrix embed(const FeatureMatrix& x) const;

    // Layer l maps widths[l] -> widths[l+1]; weights stored row-major (in x out).
    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    const std::vector<std::vector<double>>& layer_weights() const noexcept { return weights_; }
    const std::vector<std::vector<double>>& layer_bias() const noexcept { return bias_; }

protected:
    void train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
               const std::vector<double>& sample_weights, std::uint64_t seed) override;
    void continue_training(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                           const std::vector<double>& sample_weights, double epoch_fraction,
                           std::uint64_t seed) override;
    ProbabilityMatrix predict(const FeatureMatrix& x) const override;
    bool balanced() const noexcept override { return params_.balanced; }
    Json parameters_json() const override;
    void load_parameters(const Json& j) override;

private:
    void run_epochs(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                    const std::vector<double>& sample_weights, int epochs, std::uint64_t seed);

    MlpParams params_;
    std::vector<std::size_t> widths_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> bias_;
};

}  // namespace adapt
