#include <random>
#include <set>
#include <vector>

#include "adapt/pseudo_label.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adapt;

namespace {

std::vector<std::size_t> random_exclude(std::size_t rows, std::mt19937_64& rng) {
    std::vector<std::size_t> out;
    std::bernoulli_distribution pick(0.1);
    for (std::size_t r = 0; r < rows; ++r) {
        if (pick(rng)) out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_SUITE("pseudo_label") {

TEST_CASE("class means over predicted groups") {
    const Thresholds fb{0.9, 0.8};
    const auto m = class_means(ProbabilityMatrix(3, 2, {0.1, 0.9, 0.2, 0.8, 0.7, 0.3}), ClassId{0}, fb);
    CHECK(m.malware == doctest::Approx(0.85));
    CHECK(m.benign == doctest::Approx(0.7));

    const auto tie = class_means(ProbabilityMatrix(2, 2, {0.5, 0.5, 0.5, 0.5}), ClassId{0}, fb);
    CHECK(tie.malware == fb.malware);
    CHECK(tie.benign == 0.5);

    const auto single = class_means(ProbabilityMatrix(1, 2, {0.3, 0.7}), ClassId{0}, fb);
    CHECK(single.malware == 0.7);
    CHECK(single.benign == fb.benign);

    CHECK_THROWS_AS(class_means(ProbabilityMatrix(0, 2, {}), ClassId{0}, fb), Error);
}

TEST_CASE("class means skip excluded rows") {
    const std::vector<std::size_t> exclude{0};
    const auto m = class_means(ProbabilityMatrix(2, 2, {0.1, 0.9, 0.3, 0.7}), ClassId{0}, {}, exclude);
    CHECK(m.malware == 0.7);
    CHECK(m.malware_count == 1);
}

TEST_CASE("threshold update arithmetic") {
    CHECK(update_thresholds({{0.9, 0.9}, 0.5, {}}, 0.7, 0.9).malware == doctest::Approx(0.8));
    const Thresholds base{0.93, 0.71};
    CHECK(update_thresholds({base, 0.0, {}}, 0.55, 0.6) == base);
    CHECK(update_thresholds({{0.9, 0.9}, 1.0, {}}, 0.8, 0.93).benign == 0.93);
}

TEST_CASE("updated thresholds lie between base and mean") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.5, 1.0), l(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const Thresholds base{u(rng), u(rng)};
        const double mu_m = u(rng), mu_b = u(rng), lambda = l(rng);
        const auto t = update_thresholds({base, lambda, {}}, mu_m, mu_b);
        CHECK(t.malware >= std::min(base.malware, mu_m) - 1e-15);
        CHECK(t.malware <= std::max(base.malware, mu_m) + 1e-15);
        CHECK(t.benign >= std::min(base.benign, mu_b) - 1e-15);
        CHECK(t.benign <= std::max(base.benign, mu_b) + 1e-15);
    }
}

TEST_CASE("binary selection examples") {
    const auto a = select_binary(ProbabilityMatrix(1, 2, {0.25, 0.75}), {0.9, 0.70}, 0);
    REQUIRE(a.size() == 1);
    CHECK(a.labels[0] == 1);
    const auto b = select_binary(ProbabilityMatrix(1, 2, {0.90, 0.10}), {0.96, 0.9}, 0);
    CHECK(b.empty());
    // equality does not pass the strict rule
    CHECK(select_binary(ProbabilityMatrix(1, 2, {0.2, 0.8}), {0.9, 0.8}, 0).empty());
}

TEST_CASE("multiclass selection examples") {
    const auto a = select_multiclass(ProbabilityMatrix(1, 3, {0.1, 0.2, 0.7}), 0.65, 0.9, ClassId{0});
    REQUIRE(a.size() == 1);
    CHECK(a.labels[0] == 2);
    CHECK(select_multiclass(ProbabilityMatrix(1, 3, {0.97, 0.02, 0.01}), 0.9, 0.98, ClassId{0}).empty());
    const std::vector<double> uniform(10, 0.1);
    for (double tau : {0.5, 0.7, 0.99}) {
        CHECK(select_multiclass(ProbabilityMatrix(1, 10, uniform), tau, tau, std::nullopt).empty());
    }
}

TEST_CASE("selection matches the per-row oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> rows_d(1, 300), classes_d(2, 9);
    std::uniform_real_distribution<double> tau(0.5, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const auto rows = rows_d(rng);
        const auto classes = classes_d(rng);
        const auto p = testdata::random_probs(rows, classes, rng, trial % 3 == 0);
        const auto exclude = random_exclude(rows, rng);
        const std::set<std::size_t> ex(exclude.begin(), exclude.end());
        const double tm = tau(rng), tb = tau(rng);
        const std::optional<ClassId> benign =
            trial % 4 == 0 ? std::nullopt : std::optional<ClassId>(static_cast<ClassId>(trial % classes));

        const auto got = select_multiclass(p, tm, tb, benign, exclude);
        const auto want = oracle::select(p, tm, tb, benign, ex);
        CHECK(got.indices == want.indices);
        CHECK(got.labels.values() == want.labels);

        if (classes == 2 && benign) {
            const auto bin = select_binary(p, {tb, tm}, *benign, exclude);
            CHECK(bin.indices == want.indices);
            CHECK(bin.labels.values() == want.labels);
        }
    }
}

TEST_CASE("batch invariants") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto p = testdata::random_probs(200, 2, rng);
        const auto exclude = random_exclude(200, rng);
        const Thresholds t{0.7, 0.6};
        const auto b = select_binary(p, t, 0, exclude);
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto r = b.indices[i];
            if (i > 0) CHECK(b.indices[i - 1] < r);
            CHECK(std::find(exclude.begin(), exclude.end(), r) == exclude.end());
            CHECK(b.labels[i] == argmax(p.row(r), ClassId{0}));
            CHECK(b.confidences[i] > (b.labels[i] == 0 ? t.benign : t.malware));
        }
    }
}

TEST_CASE("raising a threshold never adds samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tau(0.5, 0.95), bump(0.0, 0.05);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = testdata::random_probs(150, 2, rng);
        const Thresholds lo{tau(rng), tau(rng)};
        const Thresholds hi{lo.benign + bump(rng), lo.malware + bump(rng)};
        const auto a = select_binary(p, lo, 0);
        const auto b = select_binary(p, hi, 0);
        CHECK(b.size() <= a.size());
        CHECK(std::includes(a.indices.begin(), a.indices.end(), b.indices.begin(), b.indices.end()));
    }
}

TEST_CASE("thresholds are validated") {
    CHECK_NOTHROW(validate(Thresholds{0.5, 1.0}));
    CHECK_THROWS_AS(validate(Thresholds{0.4, 0.9}), Error);
}

}
