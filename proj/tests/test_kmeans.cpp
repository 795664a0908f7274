#include "adaprompt/error.hpp"
#include "adaprompt/kmeans.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace adaprompt;

namespace {

std::vector<std::vector<double>> blobs(std::uint32_t seed, std::size_t per_blob) {
    const std::vector<std::vector<double>> centers = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<std::vector<double>> points;
    for (const auto& c : centers) {
        for (std::size_t i = 0; i < per_blob; ++i) points.push_back({c[0] + noise(rng), c[1] + noise(rng)});
    }
    return points;
}

} // namespace

TEST_CASE("vector helpers") {
    const auto unit = l2_normalized({3.0, 4.0});
    CHECK(unit[0] == doctest::Approx(0.6));
    CHECK(unit[1] == doctest::Approx(0.8));
    CHECK(l2_normalized({0.0, 0.0}) == std::vector<double>{0.0, 0.0});
    const std::vector<double> a{1.0, 2.0};
    const std::vector<double> b{4.0, 6.0};
    CHECK(squared_distance(a, b) == 25.0);
}

TEST_CASE("separated blobs are recovered") {
    const auto points = blobs(11, 20);
    const auto result = kmeans(points, {3, 5});
    REQUIRE(result.assignment.size() == points.size());
    for (std::size_t blob = 0; blob < 3; ++blob) {
        std::set<std::size_t> labels;
        for (std::size_t i = 0; i < 20; ++i) labels.insert(result.assignment[blob * 20 + i]);
        CHECK(labels.size() == 1);
    }
    std::set<std::size_t> all(result.assignment.begin(), result.assignment.end());
    CHECK(all.size() == 3);
    CHECK(result.inertia < 60 * 2 * 0.3 * 0.3 * 2);
}

TEST_CASE("assignment is to the nearest centroid and inertia is consistent") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> points(40, std::vector<double>(4));
    for (auto& p : points) {
        for (auto& x : p) x = u(rng);
    }
    const auto result = kmeans(points, {5, 9});
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto own = squared_distance(points[i], result.centroids[result.assignment[i]]);
        for (const auto& c : result.centroids) CHECK(own <= squared_distance(points[i], c) + 1e-12);
        inertia += own;
    }
    CHECK(result.inertia == doctest::Approx(inertia));
    std::vector<std::size_t> sizes(5, 0);
    for (auto a : result.assignment) ++sizes[a];
    for (auto s : sizes) CHECK(s > 0);
}

TEST_CASE("same seed, same clustering") {
    const auto points = blobs(5, 15);
    const auto a = kmeans(points, {4, 123});
    const auto b = kmeans(points, {4, 123});
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
}

TEST_CASE("duplicated points still give non-empty clusters") {
    std::vector<std::vector<double>> points(6, std::vector<double>{1.0, 1.0});
    points.push_back({2.0, 2.0});
    const auto result = kmeans(points, {3, 0});
    std::vector<std::size_t> sizes(3, 0);
    for (auto a : result.assignment) ++sizes[a];
    for (auto s : sizes) CHECK(s > 0);
}

TEST_CASE("invalid inputs") {
    const std::vector<std::vector<double>> two = {{0.0}, {1.0}};
    try {
        kmeans(two, {3, 0});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DegenerateClustering);
    }
    try {
        kmeans(two, {0, 0});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
    const std::vector<std::vector<double>> ragged = {{0.0}, {1.0, 2.0}};
    try {
        kmeans(ragged, {1, 0});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidConfig);
    }
}
