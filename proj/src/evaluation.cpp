#include "adapt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adapt/adapt_engine.hpp"

namespace adapt {

namespace {

double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// Average ranks (1-based) of `values`, returned doubled so ties stay integral.
std::vector<std::uint64_t> doubled_average_ranks(const std::vector<double>& values) {
    const auto n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return values[i] < values[j]; });
    std::vector<std::uint64_t> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const std::uint64_t twice = (i + 1) + (j + 1);  // first + last rank
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
        i = j + 1;
    }
    return ranks;
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace

PeriodMetrics metrics_from_counts(std::int64_t period_id, std::size_t tp, std::size_t fp, std::size_t tn,
                                  std::size_t fn) {
    PeriodMetrics m{period_id, tp, fp, tn, fn};
    m.f1 = ratio(2 * tp, 2 * tp + fp + fn);
    m.fpr = ratio(fp, fp + tn);
    m.fnr = ratio(fn, fn + tp);
    return m;
}

PeriodMetrics period_metrics(const LabelVector& pred, const LabelVector& truth, ClassId benign_class,
                             std::int64_t period_id) {
    if (pred.size() != truth.size()) {
        fail(ErrorKind::dimension_mismatch, "predictions (" + std::to_string(pred.size()) + ") and truth (" +
                                                std::to_string(truth.size()) + ") differ in length");
    }
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != benign_class;
        const bool t = truth[i] != benign_class;
        if (p && t) ++tp;
        else if (p) ++fp;
        else if (t) ++fn;
        else ++tn;
    }
    return metrics_from_counts(period_id, tp, fp, tn, fn);
}

std::vector<std::size_t> absolute_exposure(std::span<const std::size_t> per_period_fn) {
    std::vector<std::size_t> out(per_period_fn.size());
    std::partial_sum(per_period_fn.begin(), per_period_fn.end(), out.begin());
    return out;
}

PseudoLabelErrors pseudo_label_errors(const PseudoLabelBatch& batch, const LabelVector& truth) {
    PseudoLabelErrors e;
    const auto benign = batch.labels.benign_class().value_or(0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto idx = batch.indices[i];
        if (idx >= truth.size()) fail(ErrorKind::invalid_argument, "truth does not cover pseudo-label index");
        const bool labeled_benign = batch.labels[i] == benign;
        const bool truly_benign = truth[idx] == benign;
        if (labeled_benign) {
            ++e.benign_labeled;
            if (!truly_benign) ++e.benign_wrong;
        } else {
            ++e.malware_labeled;
            if (truly_benign) ++e.malware_wrong;
        }
    }
    e.benign = ratio(e.benign_wrong, e.benign_labeled);
    e.malware = ratio(e.malware_wrong, e.malware_labeled);
    return e;
}

MetricsReport summarize(std::vector<PeriodMetrics> periods, std::vector<PseudoLabelErrors> pseudo_errors,
                        bool sample_weighted) {
    MetricsReport rep;
    std::vector<std::size_t> fns;
    for (const auto& p : periods) fns.push_back(p.fn);
    rep.exposure = absolute_exposure(fns);
    if (!periods.empty()) {
        if (sample_weighted) {
            std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
            for (const auto& p : periods) {
                tp += p.tp;
                fp += p.fp;
                tn += p.tn;
                fn += p.fn;
            }
            const auto pooled = metrics_from_counts(0, tp, fp, tn, fn);
            rep.mean_f1 = pooled.f1;
            rep.mean_fpr = pooled.fpr;
            rep.mean_fnr = pooled.fnr;
        } else {
            for (const auto& p : periods) {
                rep.mean_f1 += p.f1;
                rep.mean_fpr += p.fpr;
                rep.mean_fnr += p.fnr;
            }
            const auto t = static_cast<double>(periods.size());
            rep.mean_f1 /= t;
            rep.mean_fpr /= t;
            rep.mean_fnr /= t;
        }
    }
    rep.periods = std::move(periods);
    rep.pseudo_errors = std::move(pseudo_errors);
    return rep;
}

MacroMetrics macro_metrics(const LabelVector& pred, const LabelVector& truth, std::size_t num_classes) {
    if (pred.size() != truth.size()) fail(ErrorKind::dimension_mismatch, "macro_metrics: length mismatch");
    if (num_classes == 0) fail(ErrorKind::invalid_argument, "macro_metrics: zero classes");
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= num_classes || truth[i] >= num_classes) fail(ErrorKind::invalid_argument, "label out of range");
        if (pred[i] == truth[i]) {
            ++tp[pred[i]];
        } else {
            ++fp[pred[i]];
            ++fn[truth[i]];
        }
    }
    MacroMetrics m;
    for (std::size_t k = 0; k < num_classes; ++k) {
        m.precision += ratio(tp[k], tp[k] + fp[k]);
        m.recall += ratio(tp[k], tp[k] + fn[k]);
        m.f1 += ratio(2 * tp[k], 2 * tp[k] + fp[k] + fn[k]);
    }
    const auto c = static_cast<double>(num_classes);
    m.precision /= c;
    m.recall /= c;
    m.f1 /= c;
    return m;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
    if (a.size() != b.size()) fail(ErrorKind::dimension_mismatch, "wilcoxon: series differ in length");
    std::vector<double> magnitude;
    std::vector<bool> positive;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        magnitude.push_back(std::abs(d));
        positive.push_back(d > 0.0);
    }
    const auto n = magnitude.size();
    if (n < 5) {
        fail(ErrorKind::validation, "wilcoxon: need at least 5 nonzero differences, have " + std::to_string(n));
    }
    const auto ranks = doubled_average_ranks(magnitude);
    std::uint64_t w2 = 0;  // doubled W+
    for (std::size_t i = 0; i < n; ++i) {
        if (positive[i]) w2 += ranks[i];
    }

    WilcoxonResult res;
    res.n = n;
    res.statistic = static_cast<double>(w2) / 2.0;
    const bool exact = method == WilcoxonMethod::exact ||
                       (method == WilcoxonMethod::automatic && n <= kWilcoxonExactLimit);
    if (exact) {
        if (n > 62) fail(ErrorKind::invalid_argument, "wilcoxon: exact branch limited to 62 differences");
        // counts[s] = number of sign assignments whose doubled W+ equals s
        const std::uint64_t total_sum = std::accumulate(ranks.begin(), ranks.end(), std::uint64_t{0});
        std::vector<double> counts(total_sum + 1, 0.0);
        counts[0] = 1.0;
        std::uint64_t reach = 0;
        for (auto r : ranks) {
            for (std::uint64_t s = reach + 1; s-- > 0;) {
                if (counts[s] != 0.0) counts[s + r] += counts[s];
            }
            reach += r;
        }
        double lower = 0.0, upper = 0.0;
        for (std::uint64_t s = 0; s <= total_sum; ++s) {
            if (s <= w2) lower += counts[s];
            if (s >= w2) upper += counts[s];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        res.exact = true;
        return res;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    {
        auto sorted = magnitude;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_term += t * t * t - t;
            i = j + 1;
        }
    }
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double diff = res.statistic - mean;
    // continuity correction toward the mean
    const double corrected = std::abs(diff) <= 0.5 ? 0.0 : diff - std::copysign(0.5, diff);
    res.p_value = var > 0.0 ? std::min(1.0, normal_two_sided(corrected / std::sqrt(var))) : 1.0;
    return res;
}

double rank_auc(std::span<const double> known_scores, std::span<const double> unknown_scores) {
    if (known_scores.empty() || unknown_scores.empty()) fail(ErrorKind::empty_dataset, "auc needs both groups");
    std::vector<double> all(known_scores.begin(), known_scores.end());
    all.insert(all.end(), unknown_scores.begin(), unknown_scores.end());
    const auto ranks = doubled_average_ranks(all);
    double known_rank_sum = 0.0;
    for (std::size_t i = 0; i < known_scores.size(); ++i) known_rank_sum += static_cast<double>(ranks[i]) / 2.0;
    const double nk = static_cast<double>(known_scores.size());
    const double nu = static_cast<double>(unknown_scores.size());
    return (known_rank_sum - nk * (nk + 1.0) / 2.0) / (nk * nu);
}

UnknownFamilyResult unknown_family_eval(const ProbabilityMatrix& unknown_probs, std::optional<ClassId> benign_class,
                                        const ProbabilityMatrix& known_probs) {
    if (unknown_probs.rows() == 0) fail(ErrorKind::empty_dataset, "unknown-family evaluation needs unseen samples");
    UnknownFamilyResult res;
    std::vector<double> unknown_conf, known_conf;
    std::size_t evaded = 0;
    for (std::size_t r = 0; r < unknown_probs.rows(); ++r) {
        const auto row = unknown_probs.row(r);
        if (benign_class && argmax(row, benign_class) == *benign_class) ++evaded;
        unknown_conf.push_back(max_probability(row));
    }
    for (std::size_t r = 0; r < known_probs.rows(); ++r) known_conf.push_back(max_probability(known_probs.row(r)));
    res.evasion_rate = ratio(evaded, unknown_probs.rows());
    res.auc = known_conf.empty() ? 0.0 : rank_auc(known_conf, unknown_conf);
    return res;
}

std::vector<ForgettingRow> forgetting_analysis(const AdaptRun& run, const TemporalDataset& probe) {
    if (run.models.empty()) fail(ErrorKind::invalid_argument, "forgetting analysis needs a completed run");
    const auto data = probe.flatten();
    const auto benign = data.labels.benign_class().value_or(0);
    std::vector<ForgettingRow> rows;
    for (std::size_t m = 0; m < run.models.size(); ++m) {
        const auto pred = argmax_labels(run.models[m]->predict_proba(data.features), data.labels.benign_class());
        ForgettingRow row;
        row.model_index = m;
        row.trained_through = m == 0 ? run.initial_period_id : run.periods[m - 1].period_id;
        row.metrics = period_metrics(pred, data.labels, benign, row.trained_through);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace adapt
