#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>

#include "ckrf/cone.hpp"
#include "ckrf/geometry.hpp"

using namespace ckrf;

TEST_CASE("chi matches frozen quadrature oracles", "[cone]") {
    // high-precision reference values for the smoothing integral
    CHECK(chi(1.0, 0.01, 0.5) == Catch::Approx(0.73406036297875823).epsilon(5e-13));
    CHECK(chi(0.3, 0.0025, 0.7) == Catch::Approx(0.38990382678594308).epsilon(5e-13));
    CHECK(chi(0.5, 0.04, 0.3) == Catch::Approx(0.20819491951793751).epsilon(5e-13));
    CHECK(chi(1e-6, 0.01, 0.5) == Catch::Approx(2.4999687510416178e-6).epsilon(5e-13));
    CHECK(chi_du(0.3, 0.0025, 0.7) == Catch::Approx(0.97518019509848142).epsilon(5e-13));
}

TEST_CASE("chi limits, bounds and monotonicity", "[cone]") {
    CHECK(chi(0.0, 0.01, 0.5) == 0.0);
    CHECK(chi(0.7, 0.0, 0.45) == Catch::Approx(std::pow(0.7, 0.45)).epsilon(1e-14));
    for (double u : {0.01, 0.2, 0.55, 0.99}) {
        const double c = chi(u, 0.02, 0.6);
        CHECK(c > 0.0);
        CHECK(c <= std::pow(u, 0.6) + 1e-14);
        CHECK(chi(u + 0.003, 0.02, 0.6) > c);       // increasing in u
        CHECK(chi(u, 0.005, 0.6) > c);              // decreasing in eps^2
        CHECK(chi(u, 0.08, 0.6) < c);
    }
    // beta = 1 degenerates to the identity potential
    for (double e2 : {0.0, 0.01, 1.0}) CHECK(chi(0.42, e2, 1.0) == Catch::Approx(0.42).epsilon(1e-13));
}

TEST_CASE("chi derivative agrees with finite differences", "[cone]") {
    for (double u : {0.05, 0.4, 0.9}) {
        const double h = 1e-6;
        const double fd = (chi(u + h, 0.01, 0.55) - chi(u - h, 0.01, 0.55)) / (2 * h);
        CHECK(chi_du(u, 0.01, 0.55) == Catch::Approx(fd).margin(1e-9));
    }
    CHECK(chi_du(0.0, 0.04, 0.5) == Catch::Approx(0.25 * std::pow(0.04, -0.5)).epsilon(1e-13));
}

TEST_CASE("chi rejects invalid arguments", "[cone]") {
    CHECK_THROWS_AS(chi(-1e-9, 0.01, 0.5), std::domain_error);
    CHECK_THROWS_AS(chi(0.5, -0.01, 0.5), std::domain_error);
    CHECK_THROWS_AS(chi(0.5, 0.01, 1.5), std::domain_error);
    CHECK_THROWS_AS(chi(0.5, 0.01, 0.0), std::domain_error);
    CHECK_THROWS_AS(chi_du(0.0, 0.0, 0.5), std::domain_error);
}

TEST_CASE("regularized potentials live on cone factors only", "[cone]") {
    const FactorGeometry smooth = build_factor(32, false);
    CHECK_THROWS_AS(rho_eps(smooth, 0.1, 0.5), ConfigError);
    CHECK_THROWS_AS(theta_eps_density_closed_form(smooth, 0.1, 0.5), ConfigError);
}

TEST_CASE("rho ladder is monotone in eps and increasing in w", "[cone]") {
    const FactorGeometry f = build_factor(64, true);
    const Vec r1 = rho_eps(f, 0.1, 0.5);
    const Vec r2 = rho_eps(f, 0.05, 0.5);
    const Vec r10 = rho_eps(f, 10.0, 0.5);
    for (int j = 0; j < 64; ++j) {
        CHECK(r2[j] >= r1[j]);   // smaller eps, larger potential
        CHECK(r10[j] < r1[j]);   // heavily smoothed regime is tiny
        if (j > 0) CHECK(r1[j] > r1[j - 1]);
    }
    CHECK(r10[63] < 0.06);
}

TEST_CASE("twist and potential masses are exact for every eps", "[cone]") {
    for (int n : {64, 128}) {
        const FactorGeometry f = build_factor(n, true);
        for (double beta : {0.3, 0.5, 0.9}) {
            for (double eps : {0.5, 0.1, 0.0125}) {
                CHECK(std::abs(integral_ds(f.grid, theta_eps_density(f, eps, beta)) -
                               (1.0 - beta)) < 1e-13);
                CHECK(std::abs(integral_ds(f.grid, ddbar_rho_density(f, eps, beta))) < 1e-13);
            }
        }
    }
}

TEST_CASE("beta -> 1 removes the twist", "[cone]") {
    const FactorGeometry f = build_factor(48, true);
    const Vec th = theta_eps_density(f, 0.1, 1.0);
    for (double x : th) CHECK(x == 0.0);
}

TEST_CASE("stencil densities converge to the closed forms at second order", "[cone]") {
    const double beta = 0.5, eps = 0.5;
    double err_dd[2], err_th[2];
    int idx = 0;
    for (int n : {128, 256}) {
        const FactorGeometry f = build_factor(n, true);
        const Vec a = ddbar_rho_density(f, eps, beta);
        const Vec b = ddbar_rho_density_closed_form(f, eps, beta);
        const Vec c = theta_eps_density(f, eps, beta);
        const Vec d = theta_eps_density_closed_form(f, eps, beta);
        double e1 = 0.0, e2 = 0.0;
        for (int j = 0; j < n; ++j) {
            e1 = std::max(e1, std::abs(a[j] - b[j]));
            e2 = std::max(e2, std::abs(c[j] - d[j]));
        }
        err_dd[idx] = e1;
        err_th[idx] = e2;
        ++idx;
    }
    CHECK(err_dd[1] < 1e-4);
    CHECK(err_th[1] < 1e-4);
    CHECK(err_dd[0] / err_dd[1] == Catch::Approx(4.0).margin(1.0));
    CHECK(err_th[0] / err_th[1] == Catch::Approx(4.0).margin(1.0));
}
