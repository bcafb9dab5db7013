#include <doctest.h>

#include <cmath>
#include <random>

#include "fluidest/warp.hpp"
#include "oracles.hpp"

using namespace fluidest;

TEST_CASE("config validation") {
    ScalarField2D f(8, 8);
    VectorField2D w(8, 8);
    CHECK_THROWS_AS(warp_gaussian(f, w, {-0.1, 1.0, 4}), ConfigError);
    CHECK_THROWS_AS(warp_gaussian(f, w, {0.1, 0.0, 4}), ConfigError);
    CHECK_THROWS_AS(warp_gaussian(f, w, {0.1, 1.0, 2}), ConfigError);
    CHECK_THROWS_AS(warp_gaussian(f, VectorField2D(8, 9), {0.1, 1.0, 4}), DimensionError);
    CHECK_THROWS_AS(warp_bilinear(f, VectorField2D(7, 8), WarpDirection::Plus), DimensionError);
}

TEST_CASE("gaussian warp without diffusion is bilinear transport") {
    std::mt19937_64 rng(1);
    auto f = oracle::random_scalar(12, 12, rng);
    CHECK(warp_gaussian(f, VectorField2D(12, 12), {0.0, 1.0, 4}) == f);

    auto shifted = warp_gaussian(f, VectorField2D(12, 12, 1.0, 0.0), {0.0, 1.0, 4});
    for (int y = 0; y < 12; ++y)
        for (int x = 1; x < 12; ++x) CHECK(shifted(x, y) == f(x - 1, y));
}

TEST_CASE("gaussian warp of an impulse matches the dense oracle") {
    ScalarField2D f(16, 16);
    f(8, 8) = 1.0;
    VectorField2D zero(16, 16);
    const auto out = warp_gaussian(f, zero, {0.5, 1.0, 16});
    const auto ref = oracle::dense_gaussian_warp(f, zero, 0.5, 1.0);
    CHECK((out - ref).max_abs() < 1e-10);

    // Far from the border the response is a unit-variance Gaussian.
    double m2 = 0.0, mass = 0.0;
    ScalarField2D big(40, 40);
    big(20, 20) = 1.0;
    const auto blur = warp_gaussian(big, VectorField2D(40, 40), {0.5, 1.0, 8});
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            mass += blur(x, y);
            m2 += blur(x, y) * (x - 20) * (x - 20);
        }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(m2 / mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("property: dense oracle equivalence on random cases") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dd(0.05, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto f = oracle::random_scalar(16, 16, rng, 0.0, 1.0);
        auto w = oracle::random_vector(16, 16, rng, -3.0, 3.0);
        const double D = dd(rng);
        const auto out = warp_gaussian(f, w, {D, 1.0, 100});
        CHECK((out - oracle::dense_gaussian_warp(f, w, D, 1.0)).max_abs() < 1e-10);
    }
}

TEST_CASE("property: kernel taps are normalized") {
    std::mt19937_64 rng(9);
    auto w = oracle::random_vector(20, 17, rng, -4.0, 4.0);
    for (double D : {0.01, 0.3, 2.0})
        for (int y = 0; y < 20; y += 3)
            for (int x = 0; x < 17; x += 4) {
                double s = 0.0;
                for (const auto& t : gaussian_taps(w, {D, 1.0, 4}, x, y)) {
                    CHECK(t.weight >= 0.0);
                    s += t.weight;
                }
                CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
            }
}

TEST_CASE("property: warps stay within the input range") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        auto f = oracle::random_scalar(14, 15, rng, -0.5, 2.0);
        auto w = oracle::random_vector(14, 15, rng, -6.0, 6.0);
        for (const auto& out : {warp_gaussian(f, w, {0.4, 1.0, 4}), warp_gaussian(f, w, {0.0, 1.0, 4}),
                                warp_bilinear(f, w, WarpDirection::Plus), warp_bilinear(f, w, WarpDirection::Minus)})
            for (double v : out.data()) {
                CHECK(v >= -0.5 - 1e-12);
                CHECK(v <= 2.0 + 1e-12);
            }
    }
}

TEST_CASE("property: diffusion semigroup at zero velocity") {
    const int n = 48;
    auto f = ScalarField2D::from_function(n, n, [](double x, double y) {
        return std::exp(-((x - 24.0) * (x - 24.0) + (y - 22.0) * (y - 22.0)) / 40.0);
    });
    VectorField2D zero(n, n);
    const auto once = warp_gaussian(f, zero, {1.0, 2.0, 6});
    const auto twice = warp_gaussian(warp_gaussian(f, zero, {1.0, 1.0, 6}), zero, {1.0, 1.0, 6});
    CHECK(oracle::interior_max_abs(once - twice, 12) < 1e-6);
}

TEST_CASE("bilinear warp examples") {
    std::mt19937_64 rng(17);
    auto f = oracle::random_scalar(10, 10, rng);
    CHECK(warp_bilinear(f, VectorField2D(10, 10), WarpDirection::Plus) == f);

    const auto half = warp_bilinear(f, VectorField2D(10, 10, 0.5, 0.0), WarpDirection::Plus);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 9; ++x) CHECK(half(x, y) == doctest::Approx(0.5 * (f(x, y) + f(x + 1, y))).epsilon(1e-14));

    const auto two = warp_bilinear(f, VectorField2D(10, 10, 2.0, 0.0), WarpDirection::Plus);
    const auto back = warp_bilinear(f, VectorField2D(10, 10, 2.0, 0.0), WarpDirection::Minus);
    for (int y = 0; y < 10; ++y)
        for (int x = 2; x < 8; ++x) {
            CHECK(two(x, y) == f(x + 2, y));
            CHECK(back(x, y) == f(x - 2, y));
        }
    // Samples beyond the grid clamp to the edge.
    CHECK(two(9, 3) == f(9, 3));
}
