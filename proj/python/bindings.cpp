// Python bindings. Datasets cross the boundary as numpy arrays: features are
// float64 (rows, dims) and labels are integer vectors with class 0 benign.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <functional>
#include <numbers>
#include <sstream>

#include "adapt/adapt_engine.hpp"
#include "adapt/commands.hpp"
#include "adapt/drift_metrics.hpp"
#include "adapt/evaluation.hpp"
#include "adapt/pseudo_label.hpp"
#include "adapt/synthetic.hpp"

namespace py = pybind11;
using namespace adapt;

namespace {

using Features = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_features(const Features& x) {
    if (x.ndim() != 2) throw py::value_error("features must be a 2-D array");
    const auto rows = static_cast<std::size_t>(x.shape(0)), dims = static_cast<std::size_t>(x.shape(1));
    return FeatureMatrix::dense(rows, dims, std::vector<double>(x.data(), x.data() + rows * dims));
}

LabelVector to_labels(const Labels& y, std::size_t num_classes) {
    if (y.ndim() != 1) throw py::value_error("labels must be a 1-D array");
    std::vector<ClassId> v;
    for (py::ssize_t i = 0; i < y.shape(0); ++i) {
        if (y.at(i) < 0) throw py::value_error("labels must be nonnegative");
        v.push_back(static_cast<ClassId>(y.at(i)));
    }
    return {std::move(v), num_classes};
}

std::size_t infer_classes(const Labels& y, std::size_t num_classes) {
    if (num_classes > 0) return num_classes;
    std::int64_t top = 1;
    for (py::ssize_t i = 0; i < y.shape(0); ++i) top = std::max(top, y.at(i));
    return static_cast<std::size_t>(top) + 1;
}

LabeledDataset to_dataset(const Features& x, const Labels& y, std::size_t num_classes) {
    return {to_features(x), to_labels(y, infer_classes(y, num_classes))};
}

ProbabilityMatrix to_probs(const Features& p) {
    if (p.ndim() != 2) throw py::value_error("probabilities must be a 2-D array");
    const auto rows = static_cast<std::size_t>(p.shape(0)), cls = static_cast<std::size_t>(p.shape(1));
    return {rows, cls, std::vector<double>(p.data(), p.data() + rows * cls)};
}

py::array_t<double> from_matrix(std::size_t rows, std::size_t cols, const std::vector<double>& v) {
    py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_features(const FeatureMatrix& f) {
    return from_matrix(f.rows(), f.dims(), f.to_dense().dense_values());
}

py::array_t<std::int64_t> from_labels(const LabelVector& l) {
    py::array_t<std::int64_t> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(l.size())});
    for (std::size_t i = 0; i < l.size(); ++i) out.mutable_data()[i] = l[i];
    return out;
}

py::tuple from_dataset(const LabeledDataset& d) { return py::make_tuple(from_features(d.features), from_labels(d.labels)); }

py::dict period_dict(const PeriodRecord& rec) {
    py::dict d;
    d["period_id"] = rec.period_id;
    d["probs"] = from_matrix(rec.probs.rows(), rec.probs.num_classes(), rec.probs.values());
    d["predictions"] = from_labels(rec.predictions);
    d["pseudo_indices"] = rec.batch.indices;
    d["pseudo_labels"] = from_labels(rec.batch.labels);
    d["threshold_benign"] = rec.updated.benign;
    d["threshold_malware"] = rec.updated.malware;
    d["annotated"] = rec.annotated;
    d["merged_rows"] = rec.merged_rows;
    d["augmented_rows"] = rec.augmented_rows;
    d["mixup_rows"] = rec.mixup_rows;
    d["combined_rows"] = rec.combined_rows;
    d["ground_truth_used"] = rec.ground_truth_used;
    d["retrained"] = rec.retrained;
    d["model_checksum"] = rec.model_checksum;
    return d;
}

// The CLI entry points write diagnostics to a stream; surface them with the exit code.
py::tuple with_messages(const std::function<int(std::ostream&)>& f) {
    std::ostringstream err;
    const int rc = f(err);
    return py::make_tuple(rc, err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Drift-aware pseudo-labeling for malware classifiers";

    static py::exception<Error> error(m, "AdaptError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const std::string msg = std::string(to_string(e.kind())) + ": " + e.what();
            if (e.kind() == ErrorKind::validation || e.kind() == ErrorKind::invalid_argument ||
                e.kind() == ErrorKind::dimension_mismatch || e.kind() == ErrorKind::parse) {
                PyErr_SetString(PyExc_ValueError, msg.c_str());
            } else {
                error(msg.c_str());
            }
        }
    });

    m.def(
        "generate_rotating",
        [](std::size_t n_per_class, double radius, double sigma2, double rotation, std::size_t periods,
           std::uint64_t seed) {
            RotatingDriftSpec spec{n_per_class, radius, sigma2, rotation, periods, 1.0, seed};
            const auto [labeled, stream] = generate_rotating(spec);
            py::list out;
            for (const auto& p : stream) out.append(py::make_tuple(p.period_id, from_dataset(p.data)));
            return py::make_tuple(from_dataset(labeled), out);
        },
        py::arg("n_per_class") = 200, py::arg("radius") = 2.0, py::arg("sigma2") = 0.25,
        py::arg("rotation") = 3.0 * std::numbers::pi / 4.0, py::arg("periods") = 8, py::arg("seed") = 0,
        "Rotating two-Gaussian stream: ((X0, y0), [(period_id, (X, y)), ...]).");

    m.def(
        "run_adapt",
        [](const Features& x, const Labels& y, const std::vector<std::pair<Features, Labels>>& periods,
           const std::string& mode, const std::string& learner, double threshold_benign, double threshold_malware,
           double lambda, double p_a, double alpha, bool adaptive_thresholds, bool augmentation, bool mixup,
           bool source_free, std::size_t active_budget, std::uint64_t seed) {
            const auto labeled = to_dataset(x, y, 0);
            std::vector<Period> parts;
            for (std::size_t i = 0; i < periods.size(); ++i) {
                parts.push_back({static_cast<std::int64_t>(i + 1),
                                 to_dataset(periods[i].first, periods[i].second, labeled.num_classes())});
            }
            AdaptConfig cfg;
            cfg.mode = parse_adapt_mode(mode);
            cfg.thresholds = {threshold_benign, threshold_malware};
            cfg.lambda = lambda;
            cfg.p_a = p_a;
            cfg.alpha = alpha;
            cfg.adaptive_thresholds = adaptive_thresholds;
            cfg.augmentation = augmentation;
            cfg.mixup = mixup;
            cfg.source_free = source_free;
            cfg.active_budget = active_budget;
            cfg.seed = seed;
            AdaptRun run;
            {
                py::gil_scoped_release release;
                run = run_adapt(labeled, TemporalDataset(std::move(parts)), cfg,
                                default_learner_spec(parse_learner_kind(learner)));
            }
            py::list out;
            for (const auto& rec : run.periods) out.append(period_dict(rec));
            return out;
        },
        py::arg("x"), py::arg("y"), py::arg("periods"), py::arg("mode") = "adapt", py::arg("learner") = "logistic",
        py::arg("threshold_benign") = 0.9, py::arg("threshold_malware") = 0.8, py::arg("lam") = 0.2,
        py::arg("p_a") = 0.1, py::arg("alpha") = 0.1, py::arg("adaptive_thresholds") = true,
        py::arg("augmentation") = true, py::arg("mixup") = true, py::arg("source_free") = false,
        py::arg("active_budget") = 0, py::arg("seed") = 0,
        "Run the update loop; returns one dict per period with the prequential predictions.");

    m.def(
        "select_pseudo_labels",
        [](const Features& probs, double threshold_benign, double threshold_malware, std::optional<ClassId> benign) {
            const auto batch = select_multiclass(to_probs(probs), threshold_malware, threshold_benign, benign);
            return py::make_tuple(batch.indices, from_labels(batch.labels));
        },
        py::arg("probs"), py::arg("threshold_benign"), py::arg("threshold_malware"), py::arg("benign_class") = 0,
        "Rows whose argmax probability strictly exceeds its class threshold: (indices, labels).");

    m.def(
        "update_thresholds",
        [](double threshold_benign, double threshold_malware, double lambda, double mu_malware, double mu_benign) {
            const auto t = update_thresholds({{threshold_benign, threshold_malware}, lambda, {}}, mu_malware, mu_benign);
            return py::make_tuple(t.benign, t.malware);
        },
        py::arg("threshold_benign"), py::arg("threshold_malware"), py::arg("lam"), py::arg("mu_malware"),
        py::arg("mu_benign"), "Convex mix of base thresholds and class means: (benign, malware).");

    m.def(
        "otdd",
        [](const Features& a, const Features& b, bool standardize) {
            auto fa = to_features(a), fb = to_features(b);
            if (standardize) {
                const auto s = Standardizer::fit(fa);
                fa = s.apply(fa);
                fb = s.apply(fb);
            }
            return gaussian_w2(fit_gaussian(fa), fit_gaussian(fb));
        },
        py::arg("a"), py::arg("b"), py::arg("standardize") = false,
        "Squared 2-Wasserstein distance between Gaussian fits of two feature sets.");

    m.def(
        "expected_calibration_error",
        [](const Features& probs, const Labels& y, std::size_t bins) {
            const auto p = to_probs(probs);
            return calibration(p, to_labels(y, p.num_classes()), bins).ece;
        },
        py::arg("probs"), py::arg("y"), py::arg("bins") = 10);

    m.def(
        "period_metrics",
        [](const Labels& pred, const Labels& truth) {
            const auto c = std::max(infer_classes(pred, 0), infer_classes(truth, 0));
            const auto pm = period_metrics(to_labels(pred, c), to_labels(truth, c));
            py::dict d;
            d["tp"] = pm.tp;
            d["fp"] = pm.fp;
            d["tn"] = pm.tn;
            d["fn"] = pm.fn;
            d["f1"] = pm.f1;
            d["fpr"] = pm.fpr;
            d["fnr"] = pm.fnr;
            return d;
        },
        py::arg("pred"), py::arg("truth"), "Binary confusion metrics with malware (any class but 0) positive.");

    m.def("absolute_exposure", [](const std::vector<std::size_t>& fn) { return absolute_exposure(fn); },
          py::arg("false_negatives"));

    m.def(
        "wilcoxon",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const auto r = wilcoxon_signed_rank(a, b);
            return py::make_tuple(r.statistic, r.p_value);
        },
        py::arg("a"), py::arg("b"), "Two-sided signed-rank test: (W+, p-value).");

    m.def("rank_auc", [](const std::vector<double>& k, const std::vector<double>& u) { return rank_auc(k, u); },
          py::arg("known_scores"), py::arg("unknown_scores"));

    m.def(
        "cmd_run",
        [](const std::string& config, std::optional<std::string> output_dir) {
            ConfigOverrides o;
            o.output_dir = std::move(output_dir);
            return with_messages([&](std::ostream& err) { return cmd_run(config, err, o); });
        },
        py::arg("config"), py::arg("output_dir") = py::none(), "Same as `adapt run`; returns (exit code, messages).");

    m.def(
        "cmd_search",
        [](const std::string& config, std::optional<std::size_t> budget) {
            ConfigOverrides o;
            o.budget = budget;
            return with_messages([&](std::ostream& err) { return cmd_search(config, err, o); });
        },
        py::arg("config"), py::arg("budget") = py::none());

    m.def(
        "cmd_drift",
        [](const std::string& manifest, const std::string& out, std::optional<std::string> model, bool standardize) {
            DriftOptions opts;
            if (model) opts.model = *model;
            opts.standardize = standardize;
            return with_messages([&](std::ostream& err) { return cmd_drift(manifest, opts, out, err); });
        },
        py::arg("manifest"), py::arg("out"), py::arg("model") = py::none(), py::arg("standardize") = false);

    m.def(
        "cmd_report",
        [](const std::string& run_manifest, const std::string& out_dir) {
            return with_messages([&](std::ostream& err) { return cmd_report(run_manifest, out_dir, err); });
        },
        py::arg("run_manifest"), py::arg("out_dir"));

    m.def(
        "cmd_synth",
        [](const std::string& out, std::size_t n_per_class, std::size_t periods, std::uint64_t seed,
           std::size_t train_periods, std::size_t validation_periods) {
            SynthOptions opts;
            opts.spec.n_per_class = n_per_class;
            opts.spec.periods = periods;
            opts.spec.seed = seed;
            opts.train_periods = train_periods;
            opts.validation_periods = validation_periods;
            return with_messages([&](std::ostream& err) { return cmd_synth(opts, out, err); });
        },
        py::arg("out"), py::arg("n_per_class") = 200, py::arg("periods") = 8, py::arg("seed") = 0,
        py::arg("train_periods") = 1, py::arg("validation_periods") = 0);
}
