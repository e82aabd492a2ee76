#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "adapt/synthetic.hpp"
#include "doctest.h"

using namespace adapt;

namespace {

// Empirical class means (x, y) of one period.
std::array<std::array<double, 2>, 2> class_means_2d(const LabeledDataset& d) {
    std::array<std::array<double, 2>, 2> m{};
    std::array<double, 2> n{};
    for (std::size_t r = 0; r < d.rows(); ++r) {
        const auto c = d.labels[r];
        m[c][0] += d.features.at(r, 0);
        m[c][1] += d.features.at(r, 1);
        ++n[c];
    }
    for (int c = 0; c < 2; ++c) {
        m[c][0] /= n[c];
        m[c][1] /= n[c];
    }
    return m;
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("zero rotation keeps every period at the same angle") {
    RotatingDriftSpec spec;
    spec.rotation = 0.0;
    for (std::size_t t = 0; t < spec.periods; ++t) CHECK(rotation_angle(spec, t) == 0.0);
}

TEST_CASE("closed-form mean positions") {
    RotatingDriftSpec spec;
    spec.rotation = std::numbers::pi / 2;
    spec.periods = 4;
    spec.radius = 2.0;
    CHECK(rotation_angle(spec, 3) == doctest::Approx(std::numbers::pi / 2));
    CHECK(rotation_angle(spec, 1) == doctest::Approx(std::numbers::pi / 6));
}

TEST_CASE("empirical means are within five standard errors") {
    RotatingDriftSpec spec;
    spec.n_per_class = 500;
    spec.rotation = std::numbers::pi / 2;
    spec.periods = 4;
    const double se = std::sqrt(spec.sigma2 / 500.0);
    for (std::size_t t = 0; t < spec.periods; ++t) {
        const auto m = class_means_2d(generate_period(spec, t));
        const double th = rotation_angle(spec, t);
        CHECK(std::fabs(m[0][0] - 2.0 * std::cos(th)) <= 5 * se);
        CHECK(std::fabs(m[0][1] - 2.0 * std::sin(th)) <= 5 * se);
        CHECK(std::fabs(m[1][0] - 2.0 * std::cos(th + std::numbers::pi)) <= 5 * se);
        CHECK(std::fabs(m[1][1] - 2.0 * std::sin(th + std::numbers::pi)) <= 5 * se);
    }
}

TEST_CASE("rotating stream layout and determinism") {
    RotatingDriftSpec spec;
    const auto [labeled, stream] = generate_rotating(spec);
    CHECK(labeled.rows() == 2 * spec.n_per_class);
    REQUIRE(stream.size() == spec.periods - 1);
    CHECK(stream[0].period_id == 1);
    CHECK(class_counts(labeled.labels) == std::vector<std::size_t>{200, 200});
    const auto again = generate_rotating(spec);
    CHECK(again.first == labeled);
    CHECK(generate_period(spec, 5) == stream[4].data);
    spec.seed = 1;
    CHECK_FALSE(generate_period(spec, 5) == stream[4].data);
}

TEST_CASE("imbalanced counts") {
    CHECK(imbalanced_counts(110, 10.0) == std::pair<std::size_t, std::size_t>{100, 10});
    CHECK(imbalanced_counts(400, 1.0) == std::pair<std::size_t, std::size_t>{200, 200});
    CHECK(imbalanced_counts(10, 1000.0) == std::pair<std::size_t, std::size_t>{9, 1});

    RotatingDriftSpec spec;
    spec.n_per_class = 55;
    const auto s = generate_imbalanced(spec, 10.0);
    REQUIRE(s.size() == spec.periods);
    CHECK(s[0].period_id == 0);
    for (const auto& p : s) CHECK(class_counts(p.data.labels) == std::vector<std::size_t>{100, 10});
}

TEST_CASE("invalid specs") {
    RotatingDriftSpec spec;
    spec.periods = 1;
    CHECK_THROWS_AS(validate(spec), Error);
    spec = {};
    spec.sigma2 = -1;
    CHECK_THROWS_AS(generate_rotating(spec), Error);
    spec = {};
    CHECK_THROWS_AS(generate_imbalanced(spec, 0.0), Error);
}

}
