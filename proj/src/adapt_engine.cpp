#include "adapt/adapt_engine.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace adapt {

namespace {

// Stream ids for derived seeds.
constexpr std::uint64_t kFitStream = 3;
constexpr std::uint64_t kAugmentStream = 1;
constexpr std::uint64_t kMixupStream = 2;

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

LabeledDataset concat_nonempty(std::vector<const LabeledDataset*> parts) {
    std::vector<LabeledDataset> keep;
    for (const auto* p : parts) {
        if (p->rows() > 0) keep.push_back(*p);
    }
    if (keep.empty()) fail(ErrorKind::empty_dataset, "nothing to merge");
    return concat(keep);
}

}  // namespace

const char* to_string(AdaptMode mode) noexcept {
    switch (mode) {
        case AdaptMode::adapt: return "adapt";
        case AdaptMode::oracle: return "oracle";
        case AdaptMode::offline: return "offline";
        case AdaptMode::fixed_threshold_baseline: return "fixed_threshold";
    }
    return "?";
}

AdaptMode parse_adapt_mode(const std::string& s) {
    if (s == "adapt") return AdaptMode::adapt;
    if (s == "oracle") return AdaptMode::oracle;
    if (s == "offline") return AdaptMode::offline;
    if (s == "fixed_threshold") return AdaptMode::fixed_threshold_baseline;
    fail(ErrorKind::parse, "unknown mode '" + s + "' (adapt, oracle, offline, fixed_threshold)");
}

void validate(const AdaptConfig& cfg) {
    validate(cfg.thresholds);
    if (!in(cfg.lambda, 0.0, 1.0)) fail(ErrorKind::validation, "lambda must lie in [0, 1]");
    if (!in(cfg.p_a, 0.0, 1.0)) fail(ErrorKind::validation, "p_a must lie in [0, 1]");
    if (!(cfg.alpha >= 0.0)) fail(ErrorKind::validation, "mixup alpha must be nonnegative");
}

std::string check_ranges(const AdaptConfig& cfg) {
    if (!in(cfg.thresholds.benign, 0.8, 0.99)) return "threshold_benign outside [0.8, 0.99]";
    if (!in(cfg.thresholds.malware, 0.6, 0.99)) return "threshold_malware outside [0.6, 0.99]";
    if (!in(cfg.lambda, 0.0, 0.5)) return "lambda outside [0, 0.5]";
    if (!in(cfg.p_a, 0.0, 0.2)) return "mask_ratio outside [0, 0.2]";
    if (!in(cfg.alpha, 0.0, 0.2)) return "mixup_alpha outside [0, 0.2]";
    return {};
}

std::size_t AdaptRun::ground_truth_labels() const {
    std::size_t n = initial_labeled_rows;
    for (const auto& p : periods) n += p.ground_truth_used;
    return n;
}

std::vector<std::size_t> active_select(const ProbabilityMatrix& probs, std::size_t k) {
    if (k > probs.rows()) {
        fail(ErrorKind::invalid_argument, "annotation budget " + std::to_string(k) + " exceeds pool size " +
                                              std::to_string(probs.rows()));
    }
    std::vector<std::size_t> order(probs.rows());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> conf(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) conf[r] = max_probability(probs.row(r));
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return conf[a] < conf[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

LabeledDataset merge_labeled(const LabeledDataset& labeled, const LabeledDataset& pseudo,
                             std::span<const std::size_t> pseudo_indices, const LabeledDataset& annotated,
                             std::span<const std::size_t> annotated_indices, bool source_free) {
    std::vector<std::size_t> a(annotated_indices.begin(), annotated_indices.end());
    std::sort(a.begin(), a.end());
    for (auto i : pseudo_indices) {
        if (std::binary_search(a.begin(), a.end(), i)) {
            fail(ErrorKind::invalid_argument, "row " + std::to_string(i) + " is both annotated and pseudo-labeled");
        }
    }
    if (source_free) {
        if (annotated.rows() + pseudo.rows() == 0) {
            fail(ErrorKind::empty_dataset, "source-free merge is empty: no pseudo-labels or annotations to train on");
        }
        return concat_nonempty({&annotated, &pseudo});
    }
    return concat_nonempty({&labeled, &annotated, &pseudo});
}

AdaptRun run_adapt(const LabeledDataset& labeled, const TemporalDataset& stream, const AdaptConfig& cfg,
                   const LearnerSpec& learner_spec) {
    validate(cfg);
    if (stream.empty()) fail(ErrorKind::empty_dataset, "adapt needs a nonempty stream");
    if (labeled.rows() == 0) fail(ErrorKind::empty_dataset, "adapt needs an initial labeled dataset");
    if (stream[0].data.dims() != labeled.dims() || stream[0].data.num_classes() != labeled.num_classes()) {
        fail(ErrorKind::dimension_mismatch, "stream dims/classes disagree with the labeled dataset");
    }

    const auto benign = labeled.labels.benign_class();
    const bool binary = labeled.num_classes() == 2 && benign.has_value();
    const auto prototype = make_learner(learner_spec);
    const auto policy = retrain_policy(prototype->kind());
    const bool fractional = prototype->supports_fractional_targets();
    double fine_tune_fraction = 0.3;
    if (const auto* p = std::get_if<MlpParams>(&learner_spec.params)) fine_tune_fraction = p->fine_tune_fraction;

    const bool self_training = cfg.mode == AdaptMode::adapt || cfg.mode == AdaptMode::fixed_threshold_baseline;
    const bool use_augment = cfg.mode == AdaptMode::adapt && cfg.augmentation;
    const bool use_mixup = cfg.mode == AdaptMode::adapt && cfg.mixup;
    const double lambda = (cfg.mode == AdaptMode::adapt && cfg.adaptive_thresholds) ? cfg.lambda : 0.0;

    AdaptRun run;
    run.config = cfg;
    run.learner = prototype->kind();
    run.initial_labeled_rows = labeled.rows();
    run.models.push_back(prototype->fit(labeled, derive_seed(cfg.seed, 0, kFitStream)));

    LabeledDataset pool_labeled = labeled;  // D_l plus annotations so far
    LabeledDataset annotations;             // annotations only (source-free merges)
    Thresholds last_updated = cfg.thresholds;

    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto& period = stream[i];
        const FeatureMatrix& x = period.data.features;
        const auto& current = run.models.back();
        const std::uint64_t step = i + 1;

        PeriodRecord rec;
        rec.period_id = period.period_id;
        rec.probs = current->predict_proba(x);
        rec.predictions = argmax_labels(rec.probs, benign);
        rec.updated = cfg.thresholds;

        std::shared_ptr<const Learner> next = current;
        if (cfg.mode != AdaptMode::offline && x.rows() > 0) {
            LabeledDataset annotated_now;
            if (cfg.active_budget > 0 && cfg.mode != AdaptMode::oracle) {
                rec.annotated = active_select(rec.probs, std::min(cfg.active_budget, x.rows()));
                annotated_now = period.data.select(rec.annotated);  // reveals ground truth for k rows
                rec.ground_truth_used = rec.annotated.size();
            }

            LabeledDataset pseudo;
            if (self_training) {
                AdaptiveState state{cfg.chain_thresholds ? last_updated : cfg.thresholds, lambda, {}};
                rec.means = class_means(rec.probs, benign, state.base, rec.annotated);
                rec.updated = update_thresholds(state, rec.means.malware, rec.means.benign);
                last_updated = rec.updated;
                rec.batch = binary ? select_binary(rec.probs, rec.updated, *benign, rec.annotated)
                                   : select_multiclass(rec.probs, rec.updated.malware, rec.updated.benign, benign,
                                                       rec.annotated);
                pseudo = LabeledDataset(x.select_rows(rec.batch.indices), rec.batch.labels);
            } else {
                // oracle: the whole period with its ground truth stands in for D_p
                pseudo = period.data;
                rec.batch.indices.resize(x.rows());
                std::iota(rec.batch.indices.begin(), rec.batch.indices.end(), 0);
                rec.batch.labels = period.data.labels;
                rec.batch.confidences.assign(x.rows(), 1.0);
                rec.ground_truth_used = x.rows();
            }

            if (annotated_now.rows() > 0) {
                pool_labeled = concat(std::vector<LabeledDataset>{pool_labeled, annotated_now});
                annotations = annotations.rows() > 0 ? concat(std::vector<LabeledDataset>{annotations, annotated_now})
                                                     : annotated_now;
            }

            const LabeledDataset& labeled_part = pool_labeled;
            const LabeledDataset& annotated_part = cfg.source_free ? annotations : annotated_now;
            const bool have_rows = cfg.source_free ? (annotations.rows() + pseudo.rows() > 0) : true;
            if (have_rows) {
                // non-source-free: pool_labeled already holds this period's annotations
                const LabeledDataset none;
                const auto merged = merge_labeled(labeled_part, pseudo, rec.batch.indices,
                                                  cfg.source_free ? annotated_part : none, rec.annotated,
                                                  cfg.source_free);
                rec.merged_rows = merged.rows();
                rec.merged_from_initial = cfg.source_free ? 0 : labeled.rows();

                std::vector<FeatureMatrix> feats{merged.features};
                std::vector<ProbabilityMatrix> soft{ProbabilityMatrix::one_hot(merged.labels)};
                std::vector<ClassId> hard(merged.labels.values());

                if (use_augment) {
                    AugmentConfig acfg{cfg.p_a, true, cfg.invert_mask};
                    const auto aug = make_augmented_set(merged, current.get(), acfg,
                                                        derive_seed(cfg.seed, step, kAugmentStream));
                    rec.augmented_rows = aug.rows();
                    if (aug.rows() > 0) {
                        feats.push_back(aug.features);
                        soft.push_back(ProbabilityMatrix::one_hot(aug.labels));
                        hard.insert(hard.end(), aug.labels.values().begin(), aug.labels.values().end());
                    }
                }
                if (use_mixup && merged.rows() >= 2) {
                    MixupConfig mcfg{cfg.alpha, fractional ? MixupLabelMode::fractional : MixupLabelMode::hard};
                    auto mix = make_mixup_set(merged, mcfg, derive_seed(cfg.seed, step, kMixupStream));
                    rec.mixup_rows = mix.features.rows();
                    feats.push_back(mix.features);
                    if (fractional) {
                        soft.push_back(mix.targets.fractional());
                    } else {
                        const auto& h = mix.targets.hard().values();
                        hard.insert(hard.end(), h.begin(), h.end());
                    }
                }

                const auto combined = concat_features(feats);
                rec.combined_rows = combined.rows();
                const TrainTargets targets =
                    fractional ? TrainTargets(concat_probabilities(soft))
                               : TrainTargets(LabelVector(std::move(hard), labeled.num_classes(), benign));
                const auto seed = derive_seed(cfg.seed, step, kFitStream);
                if (policy == RetrainPolicy::fine_tune) {
                    next = current->fine_tune(combined, targets, fine_tune_fraction, seed);
                } else {
                    next = prototype->fit(combined, targets, seed);
                }
                rec.retrained = true;
            }
        }
        rec.labeled_pool_rows = pool_labeled.rows();
        rec.model_checksum = next->checksum();
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        run.models.push_back(std::move(next));
        run.periods.push_back(std::move(rec));
    }
    return run;
}

}  // namespace adapt
