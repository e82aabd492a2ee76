#include <random>
#include <vector>

#include "adapt/data.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace adapt;

namespace {

LabeledDataset tiny(std::size_t rows, std::size_t dims, double offset) {
    std::vector<double> v(rows * dims);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = offset + static_cast<double>(i);
    std::vector<ClassId> y(rows);
    for (std::size_t r = 0; r < rows; ++r) y[r] = r % 2;
    return {FeatureMatrix::dense(rows, dims, v), LabelVector(y, 2)};
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("concat keeps input order and row count") {
    const auto a = tiny(3, 2, 0.0);
    const auto b = tiny(2, 2, 100.0);
    const std::vector<LabeledDataset> parts{a, b};
    const auto c = concat(parts);
    REQUIRE(c.rows() == 5);
    for (std::size_t r = 0; r < 3; ++r) CHECK(c.features.row_vector(r) == a.features.row_vector(r));
    for (std::size_t r = 0; r < 2; ++r) CHECK(c.features.row_vector(3 + r) == b.features.row_vector(r));
}

TEST_CASE("concat of a single dataset is the identity") {
    const auto a = tiny(3, 4, 1.5);
    const std::vector<LabeledDataset> parts{a};
    CHECK(concat(parts) == a);
}

TEST_CASE("concat rejects mismatched dims and names the index") {
    const std::vector<LabeledDataset> parts{tiny(2, 4, 0.0), tiny(2, 5, 0.0)};
    try {
        (void)concat(parts);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension_mismatch);
        CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
}

TEST_CASE("concat is associative") {
    const auto a = tiny(2, 3, 0.0), b = tiny(3, 3, 10.0), c = tiny(1, 3, 20.0);
    const std::vector<LabeledDataset> bc{b, c}, ab{a, b};
    const std::vector<LabeledDataset> left{a, concat(bc)}, right{concat(ab), c};
    CHECK(concat(left) == concat(right));
}

TEST_CASE("mixed storage concatenation promotes to dense") {
    std::mt19937_64 rng(3);
    const auto s = testdata::random_sparse(4, 6, 2, rng);
    const auto d = LabeledDataset(s.features.to_dense(), s.labels);
    const std::vector<LabeledDataset> parts{s, d};
    const auto c = concat(parts);
    CHECK_FALSE(c.features.is_sparse());
    for (std::size_t r = 0; r < 4; ++r) CHECK(c.features.row_vector(r) == c.features.row_vector(r + 4));
}

TEST_CASE("class_counts") {
    CHECK(class_counts(LabelVector({0, 1, 1, 0, 0}, 2)) == std::vector<std::size_t>{3, 2});
    CHECK(class_counts(LabelVector({}, 2)) == std::vector<std::size_t>{0, 0});
    CHECK(class_counts(LabelVector({2, 2, 2}, 3)) == std::vector<std::size_t>{0, 0, 3});
}

TEST_CASE("labels outside the class range are rejected") {
    CHECK_THROWS_AS(LabelVector({0, 2}, 2), Error);
}

TEST_CASE("dense matrices reject non-finite values") {
    CHECK_THROWS_AS(FeatureMatrix::dense(1, 2, {1.0, std::nan("")}), Error);
}

TEST_CASE("sparse rows must be strictly increasing and in range") {
    CHECK_THROWS_AS(FeatureMatrix::sparse_binary(1, 5, {0, 2}, {3, 3}), Error);
    CHECK_THROWS_AS(FeatureMatrix::sparse_binary(1, 5, {0, 1}, {5}), Error);
    const auto m = FeatureMatrix::sparse_binary(1, 5, {0, 2}, {1, 4});
    CHECK(m.row_vector(0) == std::vector<double>{0, 1, 0, 0, 1});
}

TEST_CASE("probability rows must sum to one") {
    CHECK_THROWS_AS(ProbabilityMatrix(1, 2, {0.5, 0.4}), Error);
    CHECK_THROWS_AS(ProbabilityMatrix(1, 2, {1.2, -0.2}), Error);
    CHECK_NOTHROW(ProbabilityMatrix(1, 2, {0.5, 0.5 + 5e-7}));
}

TEST_CASE("one_hot rows are normalized") {
    const auto p = ProbabilityMatrix::one_hot(LabelVector({2, 0, 1}, 3));
    CHECK(p(0, 2) == 1.0);
    CHECK(p(1, 0) == 1.0);
    CHECK(p(2, 1) == 1.0);
}

TEST_CASE("argmax ties go to benign, else to the lowest id") {
    const std::vector<double> tie{0.5, 0.5};
    CHECK(argmax(tie, ClassId{0}) == 0);
    CHECK(argmax(tie, ClassId{1}) == 1);
    const std::vector<double> tri{0.1, 0.45, 0.45};
    CHECK(argmax(tri, ClassId{0}) == 1);
    CHECK(argmax(tri, std::nullopt) == 1);
    CHECK(argmax(tri, ClassId{2}) == 2);
}

TEST_CASE("temporal datasets require increasing period ids") {
    const auto a = tiny(2, 2, 0.0);
    CHECK_THROWS_AS(TemporalDataset({{2, a}, {1, a}}), Error);
    const TemporalDataset t({{1, a}, {5, a}, {9, a}});
    CHECK(t.slice(1, 3).size() == 2);
    CHECK(t.slice(1, 3)[0].period_id == 5);
    CHECK(t.flatten().rows() == 6);
}

}
