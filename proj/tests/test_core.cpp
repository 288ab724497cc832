#include "doctest.h"

#include "rwnn/core.hpp"

#include <cmath>
#include <stdexcept>

using namespace rwnn;

TEST_CASE("uniform grid") {
    const TimeGrid g = make_uniform_grid(1.0, 21);
    REQUIRE(g.steps() == 21);
    CHECK(g.times.front() == 0.0);
    CHECK(g.horizon() == doctest::Approx(1.0).epsilon(1e-15));
    for (double d : g.deltas) CHECK(d == doctest::Approx(1.0 / 21.0).epsilon(1e-14));

    const TimeGrid one = make_uniform_grid(1.0, 1);
    REQUIRE(one.times.size() == 2);
    CHECK(one.times[0] == 0.0);
    CHECK(one.times[1] == 1.0);

    const TimeGrid four = make_uniform_grid(2.0, 4);
    const double expected[] = {0.0, 0.5, 1.0, 1.5, 2.0};
    for (int i = 0; i < 5; ++i) CHECK(four.times[i] == doctest::Approx(expected[i]).epsilon(1e-15));
}

TEST_CASE("grid validation") {
    CHECK_THROWS_AS(make_uniform_grid(0.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_uniform_grid(-1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(make_uniform_grid(1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_grid({0.0, 0.5, 0.5, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_grid({0.1, 0.5}), std::invalid_argument);
    const TimeGrid g = make_grid({0.0, 0.25, 1.0});
    CHECK(g.deltas[0] == 0.25);
    CHECK(g.deltas[1] == 0.75);
}

namespace {

double sample_correlation(const std::vector<double>& inc, std::size_t count) {
    double sxy = 0.0, sxx = 0.0, syy = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
        mx += inc[2 * s];
        my += inc[2 * s + 1];
    }
    mx /= static_cast<double>(count);
    my /= static_cast<double>(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double x = inc[2 * s] - mx, y = inc[2 * s + 1] - my;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("correlated increments: identity and rho = -0.7") {
    const TimeGrid grid = make_uniform_grid(1.0, 10);
    const std::size_t n = 20000;
    const double band = 3.0 / std::sqrt(static_cast<double>(n * grid.steps()));

    const auto indep = sample_correlated_increments(grid, n, Eigen::Matrix2d::Identity(), SeedSpec{1});
    CHECK(std::abs(sample_correlation(indep, n * grid.steps())) < band);

    Eigen::Matrix2d corr;
    corr << 1.0, -0.7, -0.7, 1.0;
    const auto inc = sample_correlated_increments(grid, n, corr, SeedSpec{2});
    CHECK(std::abs(sample_correlation(inc, n * grid.steps()) + 0.7) < band);
}

TEST_CASE("increment variance per step within 5 standard errors") {
    const TimeGrid grid = make_grid({0.0, 0.1, 0.4, 1.0});
    const std::size_t n = 40000;
    const auto inc = sample_correlated_increments(grid, n, Eigen::MatrixXd::Identity(1, 1), SeedSpec{3});
    for (std::size_t i = 0; i < grid.steps(); ++i) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = inc[j * grid.steps() + i];
            s += v;
            s2 += v * v;
        }
        const double delta = grid.deltas[i];
        const double var = s2 / n - (s / n) * (s / n);
        // Var of the sample variance of N(0, delta) is 2 delta^2 / n.
        CHECK(std::abs(var - delta) < 5.0 * delta * std::sqrt(2.0 / n));
        CHECK(std::abs(s / n) < 5.0 * std::sqrt(delta / n));
    }
}

TEST_CASE("increments are reproducible and independent of thread count") {
    const TimeGrid grid = make_uniform_grid(1.0, 5);
    Eigen::Matrix3d corr;
    corr << 1.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.0;
    set_thread_count(1);
    const auto a = sample_correlated_increments(grid, 5000, corr, SeedSpec{9});
    set_thread_count(4);
    const auto b = sample_correlated_increments(grid, 5000, corr, SeedSpec{9});
    set_thread_count(1);
    CHECK(a == b);

    const auto single = sample_correlated_increments(make_uniform_grid(1.0, 1), 1, Eigen::Matrix2d::Identity(), SeedSpec{5});
    const auto again = sample_correlated_increments(make_uniform_grid(1.0, 1), 1, Eigen::Matrix2d::Identity(), SeedSpec{5});
    REQUIRE(single.size() == 2);
    CHECK(single == again);
    const auto other = sample_correlated_increments(grid, 5000, corr, SeedSpec{10});
    CHECK(a != other);
}

TEST_CASE("non-PSD correlation reports the failing leading minor") {
    Eigen::Matrix3d bad;
    bad << 1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0;
    try {
        (void)correlation_factor(bad);
        FAIL("expected a decomposition error");
    } catch (const DecompositionError& e) {
        CHECK(e.leading_minor() == 3);
    }
    Eigen::Matrix2d asym;
    asym << 1.0, 0.2, 0.3, 1.0;
    CHECK_THROWS(correlation_factor(asym));
    Eigen::Matrix2d diag;
    diag << 2.0, 0.0, 0.0, 1.0;
    CHECK_THROWS(correlation_factor(diag));
}

TEST_CASE("cholesky jitter recovers a singular PSD matrix") {
    Eigen::Matrix2d ones = Eigen::Matrix2d::Constant(1.0);
    const Eigen::MatrixXd l = cholesky_with_jitter(ones);
    CHECK((l * l.transpose() - ones).norm() < 1e-6);
}

TEST_CASE("parallel_chunks covers every index once with fixed boundaries") {
    set_thread_count(3);
    std::vector<int> hits(1000, 0);
    std::vector<std::pair<std::size_t, std::size_t>> bounds(chunk_count(1000, 64));
    parallel_chunks(1000, 64, [&](std::size_t c, std::size_t b, std::size_t e) {
        bounds[c] = {b, e};
        for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    set_thread_count(1);
    for (int h : hits) CHECK(h == 1);
    for (std::size_t c = 0; c < bounds.size(); ++c) CHECK(bounds[c].first == c * 64);
}
