#include "adapt/commands.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "adapt/data_io.hpp"
#include "adapt/util.hpp"

namespace adapt {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) fail(ErrorKind::io, "write failed for '" + path.string() + "'");
}

// Runs `f`; any exception becomes a diagnostic line and `code`.
template <class F>
int guarded(std::ostream& err, int code, F&& f) {
    try {
        f();
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return code;
    }
}

struct Prepared {
    ManifestData data;
    LabeledDataset initial;
    TemporalDataset stream;
    std::optional<ClassId> benign;
};

Prepared prepare(const ExperimentConfig& cfg) {
    validate(cfg);
    Prepared p;
    p.data = load_manifest(cfg.manifest_path());
    p.initial = p.data.initial();
    p.stream = p.data.stream();
    p.benign = p.data.manifest.benign_class;
    if (!p.benign) fail(ErrorKind::validation, "manifest has no benign_class; binary metrics need one");
    if (p.stream.empty()) fail(ErrorKind::validation, "manifest has no validation or test periods to stream");
    return p;
}

Json row_to_json(const PeriodRow& r) {
    return {{"type", "period"},
            {"seed", r.seed},
            {"period_id", r.period_id},
            {"rows", r.rows},
            {"tp", r.tp},
            {"fp", r.fp},
            {"tn", r.tn},
            {"fn", r.fn},
            {"pseudo", r.pseudo},
            {"pseudo_benign_labeled", r.pseudo_errors.benign_labeled},
            {"pseudo_benign_wrong", r.pseudo_errors.benign_wrong},
            {"pseudo_malware_labeled", r.pseudo_errors.malware_labeled},
            {"pseudo_malware_wrong", r.pseudo_errors.malware_wrong},
            {"annotated", r.annotated},
            {"labeled_pool", r.labeled_pool},
            {"merged", r.merged},
            {"augmented", r.augmented},
            {"mixup", r.mixup},
            {"combined", r.combined},
            {"threshold_benign", r.thresholds.benign},
            {"threshold_malware", r.thresholds.malware},
            {"model_checksum", hex64(r.model_checksum)},
            {"seconds", r.seconds},
            {"calibration",
             {{"count", r.calib_count}, {"confidence_sum", r.calib_confidence}, {"correct_sum", r.calib_correct}}}};
}

PeriodRow row_from_json(const Json& j) {
    PeriodRow r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.period_id = j.at("period_id").get<std::int64_t>();
    r.rows = j.at("rows").get<std::size_t>();
    r.tp = j.at("tp").get<std::size_t>();
    r.fp = j.at("fp").get<std::size_t>();
    r.tn = j.at("tn").get<std::size_t>();
    r.fn = j.at("fn").get<std::size_t>();
    r.pseudo = j.at("pseudo").get<std::size_t>();
    auto& e = r.pseudo_errors;
    e.benign_labeled = j.at("pseudo_benign_labeled").get<std::size_t>();
    e.benign_wrong = j.at("pseudo_benign_wrong").get<std::size_t>();
    e.malware_labeled = j.at("pseudo_malware_labeled").get<std::size_t>();
    e.malware_wrong = j.at("pseudo_malware_wrong").get<std::size_t>();
    e.benign = e.benign_labeled ? static_cast<double>(e.benign_wrong) / static_cast<double>(e.benign_labeled) : 0.0;
    e.malware =
        e.malware_labeled ? static_cast<double>(e.malware_wrong) / static_cast<double>(e.malware_labeled) : 0.0;
    r.annotated = j.at("annotated").get<std::size_t>();
    r.labeled_pool = j.at("labeled_pool").get<std::size_t>();
    r.merged = j.at("merged").get<std::size_t>();
    r.augmented = j.at("augmented").get<std::size_t>();
    r.mixup = j.at("mixup").get<std::size_t>();
    r.combined = j.at("combined").get<std::size_t>();
    r.thresholds.benign = j.at("threshold_benign").get<double>();
    r.thresholds.malware = j.at("threshold_malware").get<double>();
    r.model_checksum = std::stoull(j.at("model_checksum").get<std::string>(), nullptr, 16);
    r.seconds = j.at("seconds").get<double>();
    const auto& c = j.at("calibration");
    r.calib_count = c.at("count").get<std::vector<std::size_t>>();
    r.calib_confidence = c.at("confidence_sum").get<std::vector<double>>();
    r.calib_correct = c.at("correct_sum").get<std::vector<double>>();
    return r;
}

void accumulate(CalibrationAccumulator& acc, const PeriodRow& r) {
    if (r.calib_count.size() != acc.count.size()) fail(ErrorKind::validation, "calibration bin count mismatch");
    for (std::size_t b = 0; b < acc.count.size(); ++b) {
        acc.count[b] += r.calib_count[b];
        acc.confidence_sum[b] += r.calib_confidence[b];
        acc.correct_sum[b] += r.calib_correct[b];
    }
}

std::string fmt(double v) { return format_double(v); }

Json adapt_section(const ExperimentConfig& base, const AdaptConfig& adapt) {
    auto c = base;
    c.adapt = adapt;
    return to_json(c)["adapt"];
}

}  // namespace

std::vector<PeriodRow> period_rows(const AdaptRun& run, const TemporalDataset& stream, std::uint64_t seed,
                                   std::size_t bins) {
    if (run.periods.size() != stream.size()) fail(ErrorKind::invalid_argument, "run and stream differ in periods");
    std::vector<PeriodRow> rows;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto& rec = run.periods[i];
        const auto& truth = stream[i].data.labels;
        const auto benign = truth.benign_class().value_or(0);
        const auto m = period_metrics(rec.predictions, truth, benign, rec.period_id);
        PeriodRow r;
        r.seed = seed;
        r.period_id = rec.period_id;
        r.rows = truth.size();
        r.tp = m.tp;
        r.fp = m.fp;
        r.tn = m.tn;
        r.fn = m.fn;
        r.pseudo = rec.batch.size();
        r.pseudo_errors = pseudo_label_errors(rec.batch, truth);
        r.annotated = rec.annotated.size();
        r.labeled_pool = rec.labeled_pool_rows;
        r.merged = rec.merged_rows;
        r.augmented = rec.augmented_rows;
        r.mixup = rec.mixup_rows;
        r.combined = rec.combined_rows;
        r.thresholds = rec.updated;
        r.model_checksum = rec.model_checksum;
        r.seconds = rec.seconds;
        CalibrationAccumulator acc(rec.probs.num_classes(), bins);
        if (rec.probs.rows() > 0) acc.add(rec.probs, truth);
        r.calib_count = acc.count;
        r.calib_confidence = acc.confidence_sum;
        r.calib_correct = acc.correct_sum;
        rows.push_back(std::move(r));
    }
    return rows;
}

RunArtifacts render_metrics(const std::vector<PeriodRow>& rows, std::uint64_t hash, std::size_t num_classes,
                            std::size_t bins, bool sample_weighted) {
    const std::string stamp = "# config_hash=" + hex64(hash) + "\n";
    RunArtifacts out;
    out.metrics_csv = stamp +
                      "seed,period_id,rows,tp,fp,tn,fn,f1,fpr,fnr,exposure,pseudo_labeled,err_pseudo_benign,"
                      "err_pseudo_malware,ece,threshold_benign,threshold_malware,model_checksum\n";
    out.summary_csv = stamp + "seed,mean_f1,mean_fpr,mean_fnr,exposure,ece\n";

    std::map<std::uint64_t, std::vector<const PeriodRow*>> by_seed;
    std::vector<std::uint64_t> seed_order;
    for (const auto& r : rows) {
        if (!by_seed.count(r.seed)) seed_order.push_back(r.seed);
        by_seed[r.seed].push_back(&r);
    }
    CalibrationAccumulator pooled(num_classes, bins);
    double sum_f1 = 0.0, sum_fpr = 0.0, sum_fnr = 0.0, sum_ece = 0.0, sum_ae = 0.0;
    for (auto seed : seed_order) {
        CalibrationAccumulator seed_acc(num_classes, bins);
        std::vector<PeriodMetrics> metrics;
        std::size_t exposure = 0;
        for (const auto* r : by_seed[seed]) {
            const auto m = metrics_from_counts(r->period_id, r->tp, r->fp, r->tn, r->fn);
            metrics.push_back(m);
            exposure += r->fn;
            CalibrationAccumulator acc(num_classes, bins);
            accumulate(acc, *r);
            accumulate(seed_acc, *r);
            accumulate(pooled, *r);
            out.metrics_csv += std::to_string(seed) + "," + std::to_string(r->period_id) + "," +
                               std::to_string(r->rows) + "," + std::to_string(r->tp) + "," + std::to_string(r->fp) +
                               "," + std::to_string(r->tn) + "," + std::to_string(r->fn) + "," + fmt(m.f1) + "," +
                               fmt(m.fpr) + "," + fmt(m.fnr) + "," + std::to_string(exposure) + "," +
                               std::to_string(r->pseudo) + "," + fmt(r->pseudo_errors.benign) + "," +
                               fmt(r->pseudo_errors.malware) + "," + fmt(acc.report().ece) + "," +
                               fmt(r->thresholds.benign) + "," + fmt(r->thresholds.malware) + "," +
                               hex64(r->model_checksum) + "\n";
        }
        const auto rep = summarize(metrics, {}, sample_weighted);
        const double ece = seed_acc.report().ece;
        out.summary_csv += std::to_string(seed) + "," + fmt(rep.mean_f1) + "," + fmt(rep.mean_fpr) + "," +
                           fmt(rep.mean_fnr) + "," + std::to_string(exposure) + "," + fmt(ece) + "\n";
        sum_f1 += rep.mean_f1;
        sum_fpr += rep.mean_fpr;
        sum_fnr += rep.mean_fnr;
        sum_ece += ece;
        sum_ae += static_cast<double>(exposure);
    }
    if (!seed_order.empty()) {
        const auto n = static_cast<double>(seed_order.size());
        out.summary_csv += "mean," + fmt(sum_f1 / n) + "," + fmt(sum_fpr / n) + "," + fmt(sum_fnr / n) + "," +
                           fmt(sum_ae / n) + "," + fmt(sum_ece / n) + "\n";
    }
    const auto rep = pooled.report();
    out.calibration_csv = stamp + "bin,lower,upper,count,mean_confidence,accuracy\n";
    for (std::size_t b = 0; b < rep.bins.size(); ++b) {
        const auto& bin = rep.bins[b];
        out.calibration_csv += std::to_string(b) + "," + fmt(bin.lower) + "," + fmt(bin.upper) + "," +
                               std::to_string(bin.count) + "," + fmt(bin.mean_confidence) + "," +
                               fmt(bin.accuracy) + "\n";
    }
    out.calibration_csv += "# ece=" + fmt(rep.ece) + "\n";
    return out;
}

namespace {

RunOutcome run_prepared(const ExperimentConfig& cfg, const Prepared& p) {
    RunOutcome out;
    out.hash = config_hash(cfg);
    for (auto seed : cfg.evaluation.seeds) {
        auto acfg = cfg.adapt;
        acfg.seed = seed;
        auto run = run_adapt(p.initial, p.stream, acfg, cfg.learner);
        auto rows = period_rows(run, p.stream, seed, cfg.evaluation.bins);
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
        out.runs.push_back(std::move(run));
    }
    out.artifacts = render_metrics(out.rows, out.hash, p.data.manifest.num_classes, cfg.evaluation.bins,
                                   cfg.evaluation.sample_weighted);
    return out;
}

std::string run_manifest_text(const ExperimentConfig& cfg, const Prepared& p, const RunOutcome& out) {
    std::vector<std::int64_t> ids;
    for (const auto& period : p.stream) ids.push_back(period.period_id);
    Json header{{"type", "header"},
                {"format", "adapt-run"},
                {"version", 1},
                {"config_hash", hex64(out.hash)},
                {"config", to_json(cfg)},
                {"seeds", cfg.evaluation.seeds},
                {"num_classes", p.data.manifest.num_classes},
                {"bins", cfg.evaluation.bins},
                {"sample_weighted", cfg.evaluation.sample_weighted},
                {"initial_rows", p.initial.rows()},
                {"periods", ids}};
    std::string text = header.dump() + "\n";
    std::size_t k = 0;
    for (std::size_t s = 0; s < out.runs.size(); ++s) {
        for (std::size_t i = 0; i < p.stream.size(); ++i) text += row_to_json(out.rows[k++]).dump() + "\n";
        text += Json{{"type", "seed_end"},
                     {"seed", cfg.evaluation.seeds[s]},
                     {"ground_truth_labels", out.runs[s].ground_truth_labels()}}
                    .dump() +
                "\n";
    }
    text += Json{{"type", "end"}, {"runs", out.runs.size()}}.dump() + "\n";
    return text;
}

double mean_validation_f1(const Prepared& p, const TemporalDataset& validation, const LearnerSpec& learner,
                          const AdaptConfig& adapt, const EvaluationOptions& eval) {
    double total = 0.0;
    for (auto seed : eval.seeds) {
        auto acfg = adapt;
        acfg.seed = seed;
        const auto run = run_adapt(p.initial, validation, acfg, learner);
        std::vector<PeriodMetrics> metrics;
        for (std::size_t i = 0; i < validation.size(); ++i) {
            metrics.push_back(period_metrics(run.periods[i].predictions, validation[i].data.labels, *p.benign,
                                             validation[i].period_id));
        }
        total += summarize(metrics, {}, eval.sample_weighted).mean_f1;
    }
    return total / static_cast<double>(eval.seeds.size());
}

}  // namespace

RunOutcome execute_run(const ExperimentConfig& cfg) { return run_prepared(cfg, prepare(cfg)); }

SearchOutcome execute_search(const ExperimentConfig& cfg) {
    const auto p = prepare(cfg);
    const auto validation = p.data.with_role(PeriodRole::validation);
    if (validation.empty()) fail(ErrorKind::validation, "search needs validation periods in the manifest");
    SearchOutcome out;
    for (std::size_t t = 0; t < cfg.search.budget; ++t) {
        Rng rng = make_rng(derive_seed(cfg.search.seed, 0x5ea7c4, t));
        Trial trial;
        trial.index = t;
        trial.learner = sample_learner_spec(cfg.learner.kind(), rng);
        trial.adapt = sample_adapt_config(cfg.adapt, rng);
        trial.score = mean_validation_f1(p, validation, trial.learner, trial.adapt, cfg.evaluation);
        if (t == 0 || trial.score > out.trials[out.best].score) out.best = t;
        out.trials.push_back(std::move(trial));
    }
    return out;
}

std::vector<DriftRow> drift_table(const LabeledDataset& reference, const TemporalDataset& periods,
                                  const Learner* model, bool standardize, std::size_t dims_cap) {
    std::optional<Standardizer> scaler;
    if (standardize) scaler = Standardizer::fit(reference.features);
    auto prep = [&](const FeatureMatrix& x) { return scaler ? scaler->apply(x) : x; };
    const auto ref = fit_gaussian(prep(reference.features), dims_cap);
    std::vector<DriftRow> rows;
    for (const auto& period : periods) {
        DriftRow row;
        row.period_id = period.period_id;
        row.otdd = gaussian_w2(ref, fit_gaussian(prep(period.data.features), dims_cap));
        if (model != nullptr) row.fdd = fdd(*model, reference.features, period.data.features, dims_cap);
        rows.push_back(row);
    }
    return rows;
}

void apply(const ConfigOverrides& o, ExperimentConfig& cfg) {
    if (o.mode) cfg.adapt.mode = parse_adapt_mode(*o.mode);
    if (o.adaptive_thresholds) cfg.adapt.adaptive_thresholds = *o.adaptive_thresholds;
    if (o.augmentation) cfg.adapt.augmentation = *o.augmentation;
    if (o.mixup) cfg.adapt.mixup = *o.mixup;
    if (o.source_free) cfg.adapt.source_free = *o.source_free;
    if (o.active_budget) cfg.adapt.active_budget = *o.active_budget;
    if (o.seeds) cfg.evaluation.seeds = *o.seeds;
    if (o.budget) cfg.search.budget = *o.budget;
    if (o.output_dir) {
        // relative to the working directory, not the config file
        cfg.output_dir = fs::absolute(*o.output_dir).lexically_normal().string();
    }
    if (o.override_ranges) cfg.override_ranges = true;
}

int cmd_run(const fs::path& config, std::ostream& err, const ConfigOverrides& overrides) {
    ExperimentConfig cfg;
    Prepared p;
    if (int rc = guarded(err, kExitValidation, [&] {
            cfg = load_config(config);
            apply(overrides, cfg);
            p = prepare(cfg);
        })) {
        return rc;
    }
    return guarded(err, kExitRuntime, [&] {
        const auto out = run_prepared(cfg, p);
        const auto dir = cfg.output_path();
        write_text(dir / "run_manifest.jsonl", run_manifest_text(cfg, p, out));
        write_text(dir / "metrics.csv", out.artifacts.metrics_csv);
        write_text(dir / "summary.csv", out.artifacts.summary_csv);
        write_text(dir / "calibration.csv", out.artifacts.calibration_csv);
        fs::create_directories(dir);
        save_learner(out.runs.front().final_model(), (dir / "final_model.json").string());
    });
}

int cmd_search(const fs::path& config, std::ostream& err, const ConfigOverrides& overrides) {
    ExperimentConfig cfg;
    if (int rc = guarded(err, kExitValidation, [&] {
            cfg = load_config(config);
            apply(overrides, cfg);
            const auto p = prepare(cfg);
            if (p.data.with_role(PeriodRole::validation).empty()) {
                fail(ErrorKind::validation, "search needs validation periods in the manifest");
            }
        })) {
        return rc;
    }
    return guarded(err, kExitRuntime, [&] {
        const auto out = execute_search(cfg);
        const auto hash = hex64(config_hash(cfg));
        std::string log = Json{{"type", "header"}, {"config_hash", hash}, {"budget", cfg.search.budget},
                               {"search_seed", cfg.search.seed}}
                              .dump() +
                          "\n";
        for (const auto& t : out.trials) {
            log += Json{{"type", "trial"},
                        {"trial", t.index},
                        {"score", t.score},
                        {"learner", to_json(t.learner)},
                        {"adapt", adapt_section(cfg, t.adapt)}}
                       .dump() +
                   "\n";
        }
        const auto dir = cfg.output_path();
        write_text(dir / "trials.jsonl", log);
        auto best = cfg;
        best.learner = out.trials[out.best].learner;
        best.adapt = out.trials[out.best].adapt;
        auto j = to_json(best);
        // best_config.json sits in the output directory; keep paths valid from there
        j["data"]["manifest"] = fs::absolute(cfg.manifest_path()).lexically_normal().string();
        j["output"]["dir"] = "best_run";
        write_text(dir / "best_config.json", "// config_hash=" + hash + "\n" + j.dump(2) + "\n");
        err << "best trial " << out.best << " mean validation f1 " << fmt(out.trials[out.best].score) << "\n";
    });
}

int cmd_drift(const fs::path& manifest, const DriftOptions& opts, const fs::path& out, std::ostream& err) {
    ManifestData data;
    std::unique_ptr<Learner> model;
    if (int rc = guarded(err, kExitValidation, [&] {
            data = load_manifest(manifest);
            if (opts.model) {
                model = load_learner_file(opts.model->string());
                if (model->kind() != LearnerKind::mlp) {
                    fail(ErrorKind::validation, "fdd needs an mlp model, '" + opts.model->string() + "' is " +
                                                    to_string(model->kind()));
                }
            }
        })) {
        return rc;
    }
    return guarded(err, kExitRuntime, [&] {
        const auto reference = data.initial();
        const auto rows = drift_table(reference, data.periods, model.get(), opts.standardize, opts.dims_cap);
        const Json inputs{{"manifest", manifest.string()},
                          {"model", opts.model ? opts.model->string() : std::string()},
                          {"standardize", opts.standardize},
                          {"dims_cap", opts.dims_cap}};
        std::string text = "# config_hash=" + hex64(fnv1a64(inputs.dump())) + "\n";
        text += std::string("# covariance=") + (data.manifest.dims > opts.dims_cap ? "diagonal" : "full") + "\n";
        text += model ? "period_id,otdd,fdd\n" : "period_id,otdd\n";
        for (const auto& r : rows) {
            text += std::to_string(r.period_id) + "," + fmt(r.otdd);
            if (r.fdd) text += "," + fmt(*r.fdd);
            text += "\n";
        }
        write_text(out, text);
    });
}

int cmd_report(const fs::path& run_manifest, const fs::path& out_dir, std::ostream& err) {
    std::vector<PeriodRow> rows;
    std::uint64_t hash = 0;
    std::size_t classes = 2, bins = 10;
    bool weighted = false;
    if (int rc = guarded(err, kExitValidation, [&] {
            std::ifstream in(run_manifest);
            if (!in) fail(ErrorKind::io, "cannot open run manifest '" + run_manifest.string() + "'");
            std::string line;
            bool have_header = false, ended = false;
            std::vector<std::uint64_t> seeds;
            std::size_t expected_periods = 0;
            std::map<std::uint64_t, std::size_t> per_seed, closed;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty()) continue;
                Json j;
                try {
                    j = Json::parse(line);
                } catch (const Json::exception& e) {
                    fail(ErrorKind::parse, run_manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
                }
                const auto type = j.value("type", std::string());
                try {
                    if (type == "header") {
                        hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
                        classes = j.at("num_classes").get<std::size_t>();
                        bins = j.at("bins").get<std::size_t>();
                        weighted = j.at("sample_weighted").get<bool>();
                        seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
                        expected_periods = j.at("periods").size();
                        have_header = true;
                    } else if (type == "period") {
                        if (!have_header) fail(ErrorKind::validation, "period record before header");
                        rows.push_back(row_from_json(j));
                        ++per_seed[rows.back().seed];
                    } else if (type == "seed_end") {
                        ++closed[j.at("seed").get<std::uint64_t>()];
                    } else if (type == "end") {
                        ended = true;
                    } else {
                        fail(ErrorKind::validation, "unknown record type '" + type + "'");
                    }
                } catch (const Json::exception& e) {
                    fail(ErrorKind::parse, run_manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
                }
            }
            if (!have_header) fail(ErrorKind::validation, "run manifest has no header");
            if (!ended) fail(ErrorKind::validation, "incomplete run: no end record in '" + run_manifest.string() + "'");
            for (auto s : seeds) {
                if (per_seed[s] != expected_periods || closed[s] != 1) {
                    fail(ErrorKind::validation, "incomplete run: seed " + std::to_string(s) + " has " +
                                                    std::to_string(per_seed[s]) + " of " +
                                                    std::to_string(expected_periods) + " periods");
                }
            }
        })) {
        return rc;
    }
    return guarded(err, kExitRuntime, [&] {
        const auto art = render_metrics(rows, hash, classes, bins, weighted);
        write_text(out_dir / "metrics.csv", art.metrics_csv);
        write_text(out_dir / "summary.csv", art.summary_csv);
        write_text(out_dir / "calibration.csv", art.calibration_csv);
    });
}

int cmd_synth(const SynthOptions& opts, const fs::path& manifest_out, std::ostream& err) {
    if (int rc = guarded(err, kExitValidation, [&] {
            validate(opts.spec);
            if (opts.train_periods < 1) fail(ErrorKind::validation, "need at least one train period");
            if (opts.train_periods + opts.validation_periods >= opts.spec.periods) {
                fail(ErrorKind::validation, "train + validation periods must leave at least one test period");
            }
        })) {
        return rc;
    }
    return guarded(err, kExitRuntime, [&] {
        const auto data = generate_imbalanced(opts.spec, opts.spec.imbalance);
        write_dataset(data, manifest_out, StorageKind::dense, opts.train_periods, opts.validation_periods);
    });
}

}  // namespace adapt
