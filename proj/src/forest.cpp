#include <algorithm>
#include <cmath>
#include <numeric>

#include "adapt/learners.hpp"

namespace adapt {

namespace {

double impurity(const std::vector<double>& counts, double total, SplitCriterion criterion) {
    if (total <= 0.0) return 0.0;
    double acc = 0.0;
    if (criterion == SplitCriterion::gini) {
        for (double c : counts) {
            const double p = c / total;
            acc += p * p;
        }
        return 1.0 - acc;
    }
    // entropy and log_loss coincide for classification trees
    for (double c : counts) {
        if (c > 0.0) {
            const double p = c / total;
            acc -= p * std::log2(p);
        }
    }
    return acc;
}

ClassId majority(const std::vector<double>& counts) {
    ClassId best = 0;
    for (ClassId k = 1; k < counts.size(); ++k) {
        if (counts[k] > counts[best]) best = k;
    }
    return best;
}

struct TreeBuilder {
    const FeatureMatrix& x;
    const std::vector<ClassId>& labels;
    const std::vector<double>& weights;
    std::size_t classes;
    int max_depth;
    SplitCriterion criterion;
    std::size_t features_per_split;
    Rng rng;
    std::vector<std::uint32_t> feature_pool;
    ForestLearner::Tree tree;

    std::int32_t build(std::vector<std::size_t>& rows, int depth) {
        std::vector<double> counts(classes, 0.0);
        double total = 0.0;
        for (auto r : rows) {
            counts[labels[r]] += weights[r];
            total += weights[r];
        }
        const auto id = static_cast<std::int32_t>(tree.size());
        tree.push_back({});
        tree[id].label = majority(counts);

        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        if (pure || depth >= max_depth || rows.size() < 2) return id;

        const double parent = impurity(counts, total, criterion);
        double best_gain = 1e-12;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;

        // partial Fisher-Yates: the first features_per_split entries form the sample
        for (std::size_t i = 0; i < features_per_split; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, feature_pool.size() - 1);
            std::swap(feature_pool[i], feature_pool[pick(rng)]);
        }
        std::vector<std::pair<double, std::size_t>> column(rows.size());
        std::vector<double> left(classes), right(classes);
        for (std::size_t fi = 0; fi < features_per_split; ++fi) {
            const auto f = feature_pool[fi];
            for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x.at(rows[i], f), rows[i]};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;
            std::fill(left.begin(), left.end(), 0.0);
            right = counts;
            double lw = 0.0;
            for (std::size_t i = 0; i + 1 < column.size(); ++i) {
                const auto r = column[i].second;
                left[labels[r]] += weights[r];
                right[labels[r]] -= weights[r];
                lw += weights[r];
                if (column[i].first == column[i + 1].first) continue;
                const double rw = total - lw;
                const double child = (lw * impurity(left, lw, criterion) + rw * impurity(right, rw, criterion)) / total;
                const double gain = parent - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<std::int32_t>(f);
                    best_threshold = 0.5 * (column[i].first + column[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return id;

        std::vector<std::size_t> lrows, rrows;
        for (auto r : rows) (x.at(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? lrows : rrows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        tree[id].feature = best_feature;
        tree[id].threshold = best_threshold;
        const auto l = build(lrows, depth + 1);
        const auto rr = build(rrows, depth + 1);
        tree[id].left = l;
        tree[id].right = rr;
        return id;
    }
};

}  // namespace

ForestLearner ForestLearner::from_trees(std::size_t dims, std::size_t num_classes, std::vector<Tree> trees,
                                        ForestParams params) {
    if (trees.empty()) fail(ErrorKind::invalid_argument, "forest needs at least one tree");
    ForestLearner f(params);
    f.params_.n_estimators = static_cast<int>(trees.size());
    f.dims_ = dims;
    f.classes_ = num_classes;
    f.trees_ = std::move(trees);
    f.trained_ = true;
    return f;
}

void ForestLearner::train(const FeatureMatrix& x, const ProbabilityMatrix& targets,
                          const std::vector<double>& sample_weights, std::uint64_t seed) {
    const auto n = x.rows();
    std::vector<ClassId> labels(n);
    for (std::size_t r = 0; r < n; ++r) labels[r] = argmax(targets.row(r), std::nullopt);

    const auto mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(x.dims()))));
    std::vector<std::uint32_t> pool(x.dims());
    std::iota(pool.begin(), pool.end(), 0u);

    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(params_.n_estimators));
    for (int t = 0; t < params_.n_estimators; ++t) {
        // per-tree stream: adding trees never perturbs earlier ones
        TreeBuilder b{x, labels, sample_weights, classes_, params_.max_depth, params_.criterion,
                      std::min(mtry, x.dims()), make_rng(derive_seed(seed, static_cast<std::uint64_t>(t))), pool, {}};
        std::vector<std::size_t> rows(n);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        for (auto& r : rows) r = draw(b.rng);
        std::sort(rows.begin(), rows.end());
        b.build(rows, 0);
        trees_.push_back(std::move(b.tree));
    }
}

ClassId ForestLearner::vote(const Tree& tree, const FeatureMatrix& x, std::size_t row) const {
    std::int32_t node = 0;
    while (tree[node].feature >= 0) {
        const auto& nd = tree[node];
        node = x.at(row, static_cast<std::size_t>(nd.feature)) <= nd.threshold ? nd.left : nd.right;
    }
    return tree[node].label;
}

ProbabilityMatrix ForestLearner::predict(const FeatureMatrix& x) const {
    const auto n = x.rows();
    const auto c = classes_;
    std::vector<double> probs(n * c, 0.0);
    std::vector<std::size_t> votes(c);
    const auto t = static_cast<double>(trees_.size());
    for (std::size_t r = 0; r < n; ++r) {
        std::fill(votes.begin(), votes.end(), 0);
        for (const auto& tree : trees_) ++votes[vote(tree, x, r)];
        for (std::size_t k = 0; k < c; ++k) probs[r * c + k] = static_cast<double>(votes[k]) / t;
    }
    return {n, c, std::move(probs)};
}

Json ForestLearner::parameters_json() const {
    Json trees = Json::array();
    for (const auto& tree : trees_) {
        std::vector<std::int32_t> feature, left, right;
        std::vector<double> threshold;
        std::vector<ClassId> label;
        for (const auto& nd : tree) {
            feature.push_back(nd.feature);
            threshold.push_back(nd.threshold);
            left.push_back(nd.left);
            right.push_back(nd.right);
            label.push_back(nd.label);
        }
        trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"label", label}});
    }
    return {{"trees", trees}};
}

void ForestLearner::load_parameters(const Json& j) {
    trees_.clear();
    for (const auto& jt : j.at("trees")) {
        const auto feature = jt.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = jt.at("threshold").get<std::vector<double>>();
        const auto left = jt.at("left").get<std::vector<std::int32_t>>();
        const auto right = jt.at("right").get<std::vector<std::int32_t>>();
        const auto label = jt.at("label").get<std::vector<ClassId>>();
        const auto m = feature.size();
        if (m == 0 || threshold.size() != m || left.size() != m || right.size() != m || label.size() != m) {
            fail(ErrorKind::parse, "forest tree arrays disagree in length");
        }
        Tree tree(m);
        for (std::size_t i = 0; i < m; ++i) {
            tree[i] = {feature[i], threshold[i], left[i], right[i], label[i]};
            const bool leaf = feature[i] < 0;
            if (label[i] >= classes_ ||
                (!leaf && (static_cast<std::size_t>(feature[i]) >= dims_ || left[i] <= static_cast<std::int32_t>(i) ||
                           right[i] <= static_cast<std::int32_t>(i) || static_cast<std::size_t>(left[i]) >= m ||
                           static_cast<std::size_t>(right[i]) >= m))) {
                fail(ErrorKind::parse, "forest node " + std::to_string(i) + " is malformed");
            }
        }
        trees_.push_back(std::move(tree));
    }
    if (trees_.empty()) fail(ErrorKind::parse, "forest has no trees");
}

}  // namespace adapt
