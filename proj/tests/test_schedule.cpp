#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ckrf/scenario.hpp"
#include "ckrf/schedule.hpp"

using namespace ckrf;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("singular time closed form and collapse selection", "[schedule]") {
    CHECK(compute_T({4 * pi}, {-4 * pi}).T == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    const auto cone = compute_T({4 * pi}, {-2 * pi * 1.5});
    CHECK(cone.T == Catch::Approx(std::log(7.0 / 3.0)).epsilon(1e-15));
    const auto prod = compute_T({20 * pi, 4 * pi}, {-2 * pi * 1.5, -4 * pi});
    CHECK(prod.collapsing == 1);
    CHECK(prod.T == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(compute_T({4 * pi}, {1.0}), ConfigError);
    CHECK_THROWS_AS(compute_T({-1.0}, {-4 * pi}), ConfigError);
    CHECK_THROWS_AS(compute_T({}, {}), ConfigError);
}

TEST_CASE("singular time grows with the initial area", "[schedule]") {
    double prev = 0.0;
    for (double a : {2.0, 5.0, 11.0, 40.0}) {
        const double T = compute_T({a * pi}, {-4 * pi}).T;
        CHECK(T > prev);
        prev = T;
    }
}

TEST_CASE("reference density interpolates the schedule exactly", "[schedule]") {
    Scenario sc = make_scenario("product-contraction");
    sc.factors[0].n_nodes = 64;
    sc.factors[1].n_nodes = 64;
    const Setup su = make_setup(sc);
    const ClassSchedule& sched = su.sched;

    for (int i = 0; i < 2; ++i) {
        const Vec q0 = sched.reference_density(i, 0.0);
        for (int j = 0; j < 64; ++j) CHECK(q0[j] == Catch::Approx(sched.factors[i].q0[j]).margin(1e-14));
        for (double t : {0.1, 0.3, 0.6}) {
            const Vec qt = sched.reference_density(i, t);
            CHECK(area(su.geom[i].grid, qt) == Catch::Approx(sched.area_at(i, t)).epsilon(1e-12));
            // qhat_T - e^{t-T} qhat_t = (1 - e^{t-T}) qhat_inf pointwise
            const double emtT = std::exp(t - sched.T);
            for (int j = 0; j < 64; ++j) {
                const double lhs = sched.factors[i].qhat_T[j] - emtT * qt[j];
                const double rhs = (1.0 - emtT) * sched.factors[i].qhat_inf[j];
                CHECK(lhs == Catch::Approx(rhs).margin(1e-13));
            }
        }
    }
    CHECK_THROWS_AS(sched.reference_density(0, sched.T), ConfigError);
    CHECK_THROWS_AS(sched.reference_density(0, -0.1), ConfigError);
}

TEST_CASE("collapsing factor limits to the zero class", "[schedule]") {
    Scenario sc = make_scenario("product-contraction");
    sc.factors[0].n_nodes = 48;
    sc.factors[1].n_nodes = 48;
    const Setup su = make_setup(sc);
    CHECK(su.sched.collapsing == 1);
    CHECK(su.sched.factors[1].areaT == 0.0);
    for (double q : su.sched.factors[1].qhat_T) CHECK(q == 0.0);
    CHECK(su.sched.factors[0].areaT == Catch::Approx(8.5 * pi).epsilon(1e-14));
}

TEST_CASE("background volume solves its defining equation", "[schedule]") {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 64;
    const Setup su = make_setup(sc);
    const ScheduleFactor& f = su.sched.factors[0];
    CHECK(f.bg_residual < 1e-8);
    CHECK(area(su.geom[0].grid, f.bg_Q) == Catch::Approx(f.area0).epsilon(1e-10));
    // the stored right side matches its definition
    for (int j = 0; j < 64; ++j) {
        const double expect =
            f.qhat_inf[j] - (1.0 - sc.beta) * su.geom[0].curvature_density[j];
        CHECK(f.bg_logQ_ss[j] == Catch::Approx(expect).margin(1e-14));
    }
}

TEST_CASE("round collapse background coincides with the initial metric", "[schedule]") {
    Scenario sc = make_scenario("round-collapse");
    sc.factors[0].n_nodes = 64;
    const Setup su = make_setup(sc);
    const ScheduleFactor& f = su.sched.factors[0];
    for (int j = 0; j < 64; ++j) CHECK(f.bg_Q[j] == Catch::Approx(f.q0[j]).margin(1e-11));
}

TEST_CASE("cone coupling bound for the contraction scenario", "[schedule]") {
    Scenario sc = make_scenario("product-contraction");
    sc.factors[0].n_nodes = 128;
    sc.factors[1].n_nodes = 128;
    const Setup su = make_setup(sc);
    // C1 = 2 pi / (8.5 pi), C2 ~ 1, C3 = 1 -> k_max ~ 4.25
    CHECK(su.c1_from_limit_class);
    CHECK(su.C1 == Catch::Approx(2.0 / 8.5).epsilon(1e-12));
    CHECK(su.k_max == Catch::Approx(4.25).epsilon(0.01));
    CHECK(su.k == Catch::Approx(0.5 * su.k_max).epsilon(1e-14));

    sc.k = su.k_max * 1.01;
    CHECK_THROWS_WITH(make_setup(sc), Catch::Matchers::ContainsSubstring("positivity threshold"));
}

TEST_CASE("total collapse with a cone falls back to the initial metric bound", "[schedule]") {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 64;
    const Setup su = make_setup(sc);
    CHECK_FALSE(su.c1_from_limit_class);
    CHECK(su.k_max > 0.0);
    CHECK(std::isfinite(su.k_max));
}

TEST_CASE("scenario validation guards the ladder and the cone angle", "[schedule]") {
    Scenario sc = make_scenario("cone-p1");
    sc.eps_ladder = {0.1, 0.09, 0.08};
    CHECK_THROWS_AS(validate(sc), ConfigError);
    sc = make_scenario("cone-p1");
    sc.beta = 1.0;
    CHECK_THROWS_AS(validate(sc), ConfigError);
    sc = make_scenario("round-collapse");
    sc.t_stop_frac = 1.0;
    CHECK_THROWS_AS(validate(sc), ConfigError);
    CHECK_THROWS_AS(make_scenario("unknown-thing"), ConfigError);
}
