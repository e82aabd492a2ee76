#pragma once

// Independent reference computations used by the tests. Each one is written
// the slow, obvious way and shares no code with the library beyond the data
// containers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "adapt/data.hpp"

namespace oracle {

using adapt::ClassId;

// Argmax with ties to benign when benign is among the maxima, else lowest id.
inline ClassId argmax_row(const std::vector<double>& row, std::optional<ClassId> benign) {
    double best = -1.0;
    for (double v : row) best = std::max(best, v);
    if (benign && row[*benign] == best) return *benign;
    for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k] == best) return static_cast<ClassId>(k);
    }
    return 0;
}

struct Selected {
    std::vector<std::size_t> indices;
    std::vector<ClassId> labels;
};

// Row-by-row application of the threshold rule.
inline Selected select(const adapt::ProbabilityMatrix& p, double tau_m, double tau_b, std::optional<ClassId> benign,
                       const std::set<std::size_t>& exclude) {
    Selected s;
    for (std::size_t r = 0; r < p.rows(); ++r) {
        if (exclude.count(r)) continue;
        std::vector<double> row(p.row(r).begin(), p.row(r).end());
        const auto k = argmax_row(row, benign);
        const bool is_benign = benign && k == *benign;
        const double tau = is_benign ? tau_b : tau_m;
        if (row[k] > tau) {
            s.indices.push_back(r);
            s.labels.push_back(k);
        }
    }
    return s;
}

inline std::vector<std::size_t> prefix_sums(const std::vector<std::size_t>& xs) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::size_t s = 0;
        for (std::size_t j = 0; j <= i; ++j) s += xs[j];
        out.push_back(s);
    }
    return out;
}

// Average 1-based ranks by counting, O(n^2).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0, equal = 0;
        for (double w : v) {
            if (w < v[i]) ++less;
            if (w == v[i]) ++equal;
        }
        ranks[i] = less + (equal + 1.0) / 2.0;
    }
    return ranks;
}

// Two-sided exact signed-rank p-value by enumerating all 2^n sign patterns.
inline double wilcoxon_enumerated(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> mag;
    std::vector<int> sign;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d == 0.0) continue;
        mag.push_back(std::fabs(d));
        sign.push_back(d > 0 ? 1 : -1);
    }
    const auto ranks = average_ranks(mag);
    double observed = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        if (sign[i] > 0) observed += ranks[i];
    }
    const std::uint64_t total = std::uint64_t{1} << mag.size();
    double lower = 0, upper = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < mag.size(); ++i) {
            if (mask >> i & 1U) w += ranks[i];
        }
        if (w <= observed + 1e-9) ++lower;
        if (w >= observed - 1e-9) ++upper;
    }
    return std::min(1.0, 2.0 * std::min(lower, upper) / static_cast<double>(total));
}

inline double pairwise_auc(const std::vector<double>& known, const std::vector<double>& unknown) {
    double s = 0.0;
    for (double k : known) {
        for (double u : unknown) s += k > u ? 1.0 : (k == u ? 0.5 : 0.0);
    }
    return s / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

struct Macro {
    double f1 = 0, precision = 0, recall = 0;
};

inline Macro macro(const std::vector<ClassId>& pred, const std::vector<ClassId>& truth, std::size_t classes) {
    Macro m;
    for (ClassId k = 0; k < classes; ++k) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            tp += pred[i] == k && truth[i] == k;
            fp += pred[i] == k && truth[i] != k;
            fn += pred[i] != k && truth[i] == k;
        }
        m.precision += tp + fp > 0 ? tp / (tp + fp) : 0.0;
        m.recall += tp + fn > 0 ? tp / (tp + fn) : 0.0;
        m.f1 += 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    m.precision /= static_cast<double>(classes);
    m.recall /= static_cast<double>(classes);
    m.f1 /= static_cast<double>(classes);
    return m;
}

// (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2, summed over independent axes.
inline double w2_diagonal(const std::vector<double>& ma, const std::vector<double>& va, const std::vector<double>& mb,
                          const std::vector<double>& vb) {
    double s = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        s += (ma[i] - mb[i]) * (ma[i] - mb[i]);
        s += (std::sqrt(va[i]) - std::sqrt(vb[i])) * (std::sqrt(va[i]) - std::sqrt(vb[i]));
    }
    return s;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle

namespace testdata {

using adapt::ClassId;

// Random row-normalized probability matrix; `ties` makes exact ties likely.
inline adapt::ProbabilityMatrix random_probs(std::size_t rows, std::size_t classes, std::mt19937_64& rng,
                                             bool ties = false) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(rows * classes);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            double v = ties ? std::floor(u(rng) * 4.0) : -std::log(1.0 - u(rng)) * (u(rng) < 0.3 ? 8.0 : 1.0);
            if (ties && v == 0.0) v = 1.0;
            p[r * classes + k] = v;
            s += v;
        }
        for (std::size_t k = 0; k < classes; ++k) p[r * classes + k] /= s;
    }
    return {rows, classes, std::move(p)};
}

inline adapt::LabeledDataset random_dense(std::size_t rows, std::size_t dims, std::size_t classes,
                                          std::mt19937_64& rng, bool integer_values = false) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> small(0, 3);
    std::vector<double> v(rows * dims);
    for (auto& x : v) x = integer_values ? small(rng) : n(rng);
    std::vector<ClassId> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) labels[r] = static_cast<ClassId>(r % classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    return {adapt::FeatureMatrix::dense(rows, dims, std::move(v)), adapt::LabelVector(std::move(labels), classes)};
}

inline adapt::LabeledDataset random_sparse(std::size_t rows, std::size_t dims, std::size_t classes,
                                           std::mt19937_64& rng, double density = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> active;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < dims; ++j) {
            if (u(rng) < density) active.push_back(static_cast<std::uint32_t>(j));
        }
        offsets.push_back(active.size());
    }
    std::vector<ClassId> labels(rows);
    for (std::size_t r = 0; r < rows; ++r) labels[r] = static_cast<ClassId>(r % classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    return {adapt::FeatureMatrix::sparse_binary(rows, dims, std::move(offsets), std::move(active)),
            adapt::LabelVector(std::move(labels), classes)};
}

// Two well-separated Gaussian blobs in 2-D, classes at (+-c, 0).
inline adapt::LabeledDataset blobs(std::size_t per_class, double c, std::mt19937_64& rng, double sd = 0.3) {
    std::normal_distribution<double> n(0.0, sd);
    std::vector<double> v;
    std::vector<ClassId> labels;
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const ClassId y = i % 2;
        v.push_back((y == 0 ? c : -c) + n(rng));
        v.push_back(n(rng));
        labels.push_back(y);
    }
    return {adapt::FeatureMatrix::dense(labels.size(), 2, std::move(v)), adapt::LabelVector(std::move(labels), 2)};
}

}  // namespace testdata
