#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ckrf/geometry.hpp"

using namespace ckrf;

TEST_CASE("factor construction validates the grid", "[geometry]") {
    CHECK_THROWS_AS(build_factor(8, false), ConfigError);
    const FactorGeometry f = build_factor(32, true);
    CHECK(f.section_norm == f.grid.w);
    CHECK(f.curvature_density == f.grid.lg);
    CHECK(build_factor(32, false).section_norm.empty());
}

TEST_CASE("round metric has R = 2 and exact Gauss-Bonnet mass", "[geometry]") {
    for (int n : {64, 256}) {
        const FactorGeometry f = build_factor(n, false);
        const Vec R = scalar_curvature(f.grid, f.fs_density);
        for (double r : R) CHECK(std::abs(r - 2.0) < 1e-11);
        const double mass = 2.0 * std::numbers::pi * integral_ds(f.grid, ricci_density(f.grid, f.fs_density));
        CHECK(mass == Catch::Approx(4.0 * std::numbers::pi).epsilon(1e-13));
    }
}

TEST_CASE("curvature scales inversely with the density", "[geometry]") {
    const FactorGeometry f = build_factor(64, false);
    Vec q = f.fs_density;
    for (double& x : q) x *= 3.0;
    const Vec Ra = scalar_curvature(f.grid, f.fs_density);
    const Vec Rb = scalar_curvature(f.grid, q);
    for (int j = 0; j < 64; ++j) CHECK(Rb[j] == Catch::Approx(Ra[j] / 3.0).margin(1e-12));
}

TEST_CASE("Gauss-Bonnet is exact for perturbed smooth densities too", "[geometry]") {
    const FactorGeometry f = build_factor(96, false);
    const InitialShape shape{10.0, 0.4};
    Vec q(f.grid.n);
    for (int j = 0; j < f.grid.n; ++j) q[j] = shape.density_at(f.grid.w[j]);
    const double mass = 2.0 * std::numbers::pi * integral_ds(f.grid, ricci_density(f.grid, q));
    CHECK(mass == Catch::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("odd bump leaves the area untouched", "[geometry]") {
    const FactorGeometry f = build_factor(128, false);
    const InitialShape shape{7.3, 1.1};
    Vec q(f.grid.n);
    for (int j = 0; j < f.grid.n; ++j) q[j] = shape.density_at(f.grid.w[j]);
    CHECK(area(f.grid, q) == Catch::Approx(7.3).epsilon(1e-13));
}

TEST_CASE("smooth densities carry pole slopes +1 and -1", "[geometry]") {
    // (log q)_s differentiated as q_s / q: q itself is smooth through the
    // poles, log q is not, and the edge stencil only converges on the former.
    const FactorGeometry f = build_factor(256, false);
    const InitialShape shape{4.0 * std::numbers::pi, 0.05};
    Vec q(f.grid.n);
    for (int j = 0; j < f.grid.n; ++j) q[j] = shape.density_at(f.grid.w[j]);
    Vec slope = d1s(f.grid, q);
    for (int j = 0; j < f.grid.n; ++j) slope[j] /= q[j];
    CHECK(slope.front() == Catch::Approx(1.0).margin(0.05));
    CHECK(slope.back() == Catch::Approx(-1.0).margin(0.05));
}

TEST_CASE("degenerate densities are rejected", "[geometry]") {
    const FactorGeometry f = build_factor(32, false);
    Vec q = f.fs_density;
    q[5] = 0.0;
    CHECK_THROWS_AS(scalar_curvature(f.grid, q), DegenerateMetricError);
}
