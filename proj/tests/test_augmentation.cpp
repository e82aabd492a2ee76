#include <algorithm>
#include <random>
#include <vector>

#include "adapt/augmentation.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adapt;

namespace {

// The four-sample, three-feature example, all in one class.
LabeledDataset four_by_three(StorageKind kind) {
    const std::vector<double> v{0, 1, 0, 1, 1, 0, 0, 0, 1, 0, 1, 1};
    auto f = FeatureMatrix::dense(4, 3, v);
    if (kind == StorageKind::sparse_binary) {
        f = FeatureMatrix::sparse_binary(4, 3, {0, 1, 3, 4, 6}, {1, 0, 1, 2, 1, 2});
    }
    return {f, LabelVector({1, 1, 1, 1}, 2)};
}

bool in_pool(const MarginalIndex& idx, ClassId c, std::size_t j, double v) {
    const auto pool = idx.pool(c, j);
    return std::binary_search(pool.begin(), pool.end(), v);
}

}  // namespace

TEST_SUITE("augmentation") {

TEST_CASE("marginal pool of the four-sample example") {
    for (auto kind : {StorageKind::dense, StorageKind::sparse_binary}) {
        const auto idx = MarginalIndex::build(four_by_three(kind));
        CHECK(idx.pool(1, 1) == std::vector<double>{0, 1, 1, 1});
        CHECK(idx.pool(1, 0) == std::vector<double>{0, 0, 0, 1});
        CHECK(idx.pool(1, 2) == std::vector<double>{0, 0, 1, 1});
        CHECK_FALSE(idx.has_class(0));
    }
}

TEST_CASE("pools of a single-row class are that row") {
    const LabeledDataset d(FeatureMatrix::dense(3, 2, {1.5, -2, 7, 8, 9, 10}), LabelVector({0, 1, 1}, 2));
    const auto idx = MarginalIndex::build(d);
    CHECK(idx.pool(0, 0) == std::vector<double>{1.5});
    CHECK(idx.pool(0, 1) == std::vector<double>{-2});
    CHECK(idx.pool(1, 0) == std::vector<double>{7, 9});
    CHECK(idx.pool(1, 1) == std::vector<double>{8, 10});
}

TEST_CASE("pools match per-class column multisets") {
    std::mt19937_64 rng(3);
    const auto d = testdata::random_dense(50, 4, 3, rng);
    const auto idx = MarginalIndex::build(d);
    for (ClassId c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < 4; ++j) {
            std::vector<double> want;
            for (std::size_t r = 0; r < d.rows(); ++r) {
                if (d.labels[r] == c) want.push_back(d.features.at(r, j));
            }
            std::sort(want.begin(), want.end());
            CHECK(idx.pool(c, j) == want);
        }
    }
}

TEST_CASE("augmenting a class with no samples is an error") {
    const auto idx = MarginalIndex::build(four_by_three(StorageKind::dense));
    Rng rng(0);
    const std::vector<double> x{0, 1, 0};
    CHECK_THROWS_AS(augment_sample(x, 0, idx, 0.1, rng), Error);
}

TEST_CASE("p_a endpoints") {
    std::mt19937_64 gen(4);
    const auto d = testdata::random_dense(30, 6, 2, gen);
    const auto idx = MarginalIndex::build(d);
    Rng rng(1);
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto x = d.features.row_vector(r);
        CHECK(augment_sample(x, d.labels[r], idx, 0.0, rng) == x);
        const auto all = augment_sample(x, d.labels[r], idx, 1.0, rng);
        for (std::size_t j = 0; j < x.size(); ++j) CHECK(in_pool(idx, d.labels[r], j, all[j]));
    }
    AugmentConfig none{0.0, false, false};
    CHECK(make_augmented_set(d, nullptr, none, 7) == d);
}

TEST_CASE("constant features stay constant") {
    const LabeledDataset d(FeatureMatrix::dense(3, 2, {5, 1, 5, 2, 5, 3}), LabelVector({0, 0, 0}, 2));
    const auto idx = MarginalIndex::build(d);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        CHECK(augment_sample(d.features.row_vector(0), 0, idx, 1.0, rng)[0] == 5.0);
    }
}

TEST_CASE("augmented values come from the same-class column") {
    std::mt19937_64 gen(5);
    const auto dense = testdata::random_dense(80, 5, 3, gen, true);
    const auto sparse = testdata::random_sparse(80, 12, 2, gen);
    for (const auto* d : {&dense, &sparse}) {
        const auto idx = MarginalIndex::build(*d);
        const auto out = make_augmented_set(*d, nullptr, {0.5, false, false}, 9);
        REQUIRE(out.rows() == d->rows());
        CHECK(out.features.storage() == d->features.storage());
        for (std::size_t r = 0; r < out.rows(); ++r) {
            CHECK(out.labels[r] == d->labels[r]);
            for (std::size_t j = 0; j < out.dims(); ++j) CHECK(in_pool(idx, out.labels[r], j, out.features.at(r, j)));
        }
    }
}

TEST_CASE("augmented sets are deterministic per seed") {
    std::mt19937_64 gen(6);
    const auto d = testdata::random_dense(40, 3, 2, gen);
    const AugmentConfig cfg{0.3, false, false};
    CHECK(make_augmented_set(d, nullptr, cfg, 1) == make_augmented_set(d, nullptr, cfg, 1));
    CHECK_FALSE(make_augmented_set(d, nullptr, cfg, 1) == make_augmented_set(d, nullptr, cfg, 2));
}

TEST_CASE("consistency filter matches the per-row rule") {
    std::mt19937_64 gen(7);
    const auto train = testdata::random_dense(100, 3, 2, gen);
    const auto model = make_learner(default_learner_spec(LearnerKind::logistic))->fit(train, 0);
    const auto candidates = testdata::random_dense(500, 3, 2, gen);
    const auto kept = consistency_filter(*model, candidates);
    const auto probs = model->predict_proba(candidates.features);
    std::vector<std::size_t> want;
    for (std::size_t r = 0; r < candidates.rows(); ++r) {
        std::vector<double> row(probs.row(r).begin(), probs.row(r).end());
        if (oracle::argmax_row(row, ClassId{0}) == candidates.labels[r]) want.push_back(r);
    }
    CHECK(kept == candidates.select(want));
    CHECK(kept.rows() > 0);
    CHECK(kept.rows() < candidates.rows());
}

TEST_CASE("a model that disagrees with every label empties the set") {
    // Class 1 everywhere with zero features: sigmoid(large bias) ~ 1.
    const auto model = LogisticLearner::from_weights(2, 2, {0, 0}, {50});
    const LabeledDataset d(FeatureMatrix::dense(3, 2, {1, 2, 3, 4, 5, 6}), LabelVector({0, 0, 0}, 2));
    CHECK(make_augmented_set(d, &model, {0.1, true, false}, 0).rows() == 0);
    CHECK(make_augmented_set(d, &model, {0.1, false, false}, 0).rows() == 3);
    CHECK_THROWS_AS(consistency_filter(LogisticLearner{}, d), Error);
}

TEST_CASE("inverted mask treats p_a as the keep probability") {
    std::mt19937_64 gen(8);
    const auto d = testdata::random_dense(20, 4, 2, gen);
    CHECK(make_augmented_set(d, nullptr, {1.0, false, true}, 3) == d);
}

TEST_CASE("mixup endpoints and label modes") {
    const std::vector<double> xi{1, 2}, xj{3, 6};
    const auto one = mix_with_coefficient(xi, 1, xj, 0, 2, 1.0, MixupLabelMode::fractional);
    CHECK(one.features == xi);
    CHECK(one.target == std::vector<double>{0, 1});

    const auto mid = mix_with_coefficient(xi, 1, xj, 1, 2, 0.5, MixupLabelMode::fractional);
    CHECK(mid.features == std::vector<double>{2, 4});
    CHECK(mid.target == std::vector<double>{0, 1});

    CHECK(mix_with_coefficient(xi, 1, xj, 0, 2, 0.6, MixupLabelMode::hard).target == std::vector<double>{0, 1});
    CHECK(mix_with_coefficient(xi, 1, xj, 0, 2, 0.4, MixupLabelMode::hard).target == std::vector<double>{1, 0});
    CHECK(mix_with_coefficient(xi, 1, xj, 0, 2, 0.5, MixupLabelMode::hard).target == std::vector<double>{0, 1});

    const auto frac = mix_with_coefficient(xi, 1, xj, 0, 2, 0.25, MixupLabelMode::fractional);
    CHECK(frac.target == std::vector<double>{0.75, 0.25});
}

TEST_CASE("mixup features lie between their parents") {
    Rng rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const std::vector<double> xi{n(rng), n(rng), n(rng)}, xj{n(rng), n(rng), n(rng)};
        const auto m = mixup_pair(xi, 0, xj, 1, 2, {0.2, MixupLabelMode::fractional}, rng);
        CHECK(m.coefficient >= 0.0);
        CHECK(m.coefficient <= 1.0);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(m.features[k] >= std::min(xi[k], xj[k]) - 1e-12);
            CHECK(m.features[k] <= std::max(xi[k], xj[k]) + 1e-12);
        }
        CHECK(m.target[0] + m.target[1] == doctest::Approx(1.0));
    }
}

TEST_CASE("mixup set sizes, alpha floor and determinism") {
    std::mt19937_64 gen(9);
    const auto d = testdata::random_dense(30, 4, 3, gen);
    const auto identity = make_mixup_set(d, {0.0, MixupLabelMode::fractional}, 5);
    CHECK(identity.features == d.features);
    CHECK(identity.targets.fractional() == ProbabilityMatrix::one_hot(d.labels));

    const auto a = make_mixup_set(d, {0.2, MixupLabelMode::fractional}, 5);
    const auto b = make_mixup_set(d, {0.2, MixupLabelMode::fractional}, 5);
    CHECK(a.features.rows() == d.rows());
    CHECK(a.features == b.features);
    CHECK(a.targets.fractional() == b.targets.fractional());

    const auto hard = make_mixup_set(d, {0.2, MixupLabelMode::hard}, 5);
    CHECK_FALSE(hard.targets.is_fractional());
    CHECK(hard.targets.size() == d.rows());

    const LabeledDataset one(FeatureMatrix::dense(1, 1, {0}), LabelVector({0}, 2));
    CHECK_THROWS_AS(make_mixup_set(one, {}, 0), Error);
}

}
