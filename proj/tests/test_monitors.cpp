#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ckrf/bounds.hpp"
#include "ckrf/flow.hpp"
#include "ckrf/monitors.hpp"
#include "ckrf/runner.hpp"

using namespace ckrf;

namespace {

MonitorSample sample_at(const std::string& name, int n, double eps, double t_frac,
                        bool mutate = false) {
    Scenario sc = make_scenario(name);
    for (auto& f : sc.factors) f.n_nodes = n;
    const Setup su = make_setup(sc);
    const FlowContext cx = make_context(su, eps);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = t_frac * su.sched.T;
    const Trajectory traj = run_flow(cx, pol);
    REQUIRE_FALSE(traj.truncated);
    return make_sample(cx, traj.samples.back(), mutate);
}

}  // namespace

TEST_CASE("trace identity holds at second order on the cone scenario", "[monitors]") {
    const double r48 = sample_at("cone-p1", 48, 0.1, 0.25).res_trace_linf;
    const double r96 = sample_at("cone-p1", 96, 0.1, 0.25).res_trace_linf;
    CHECK(r96 < 2e-4);
    CHECK(r48 / r96 == Catch::Approx(4.0).margin(0.8));
}

TEST_CASE("trace identity residual is uniform across the eps ladder", "[monitors]") {
    const double r_big = sample_at("cone-p1", 96, 0.1, 0.25).res_trace_linf;
    const double r_small = sample_at("cone-p1", 96, 0.0125, 0.25).res_trace_linf;
    CHECK(r_small < 4.0 * r_big + 1e-8);
}

TEST_CASE("mutated sign in the trace identity fails at O(1)", "[monitors]") {
    const MonitorSample healthy = sample_at("cone-p1", 48, 0.1, 0.25);
    const MonitorSample mutated = sample_at("cone-p1", 48, 0.1, 0.25, true);
    CHECK(healthy.res_trace_linf < 1e-3);
    CHECK(mutated.res_trace_linf > 0.5);  // ~ 2 e^{t-T}
}

TEST_CASE("exactly round data telescopes the trace identity to roundoff", "[monitors]") {
    const MonitorSample ms = sample_at("round-collapse", 64, 0.1, 0.5);
    CHECK(ms.res_trace_linf < 1e-12);
    CHECK(ms.sup_u == 0.0);  // the limit class vanishes
}

TEST_CASE("v evolution residual shrinks under joint refinement", "[monitors]") {
    double res[2];
    int idx = 0;
    for (int n : {48, 96}) {
        Scenario sc = make_scenario("cone-p1");
        sc.factors[0].n_nodes = n;
        const Setup su = make_setup(sc);
        const FlowContext cx = make_context(su, 0.1);
        RunPolicy pol = standard_policy(su);
        pol.t_stop = 0.3 * su.sched.T;
        const double gap = idx == 0 ? 2e-3 : 1e-3;
        pol.extra_sample_times = {0.2 * su.sched.T, 0.2 * su.sched.T + gap};
        const Trajectory traj = run_flow(cx, pol);
        const MonitorSeries se = make_series(cx, traj);
        res[idx] = -1.0;
        for (std::size_t s = 0; s + 1 < se.samples.size(); ++s)
            if (std::abs(se.samples[s].t - 0.2 * su.sched.T) < 1e-12) res[idx] = se.samples[s].res_v_linf;
        REQUIRE(res[idx] >= 0.0);
        ++idx;
    }
    CHECK(res[1] < 5e-2);
    const double ratio = res[0] / res[1];
    CHECK(ratio > 1.3);
    CHECK(ratio < 6.0);
}

TEST_CASE("twisted flow residual shrinks under joint refinement", "[monitors]") {
    double res[2];
    int idx = 0;
    for (int n : {48, 96}) {
        Scenario sc = make_scenario("cone-p1");
        sc.factors[0].n_nodes = n;
        const Setup su = make_setup(sc);
        const FlowContext cx = make_context(su, 0.1);
        RunPolicy pol = standard_policy(su);
        pol.t_stop = 0.3 * su.sched.T;
        const double gap = idx == 0 ? 2e-3 : 1e-3;
        pol.extra_sample_times = {0.2 * su.sched.T, 0.2 * su.sched.T + gap};
        const Trajectory traj = run_flow(cx, pol);
        const MonitorSeries se = make_series(cx, traj);
        double linf = -1.0, l2 = 0.0;
        for (std::size_t s = 0; s + 1 < se.samples.size(); ++s)
            if (std::abs(se.samples[s].t - 0.2 * su.sched.T) < 1e-12)
                twisted_flow_residual(cx, se.samples[s], se.samples[s + 1], linf, l2);
        REQUIRE(linf >= 0.0);
        res[idx++] = linf;
    }
    CHECK(res[1] < 5e-2);
    CHECK(res[0] / res[1] > 1.3);
    CHECK(res[0] / res[1] < 6.0);
}

TEST_CASE("Harnack quantity stays nonnegative and metrics positive", "[monitors]") {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 64;
    sc.eps_ladder = {0.1, 0.05, 0.025};
    const ScenarioRun run = run_scenario(sc, 1);
    for (const auto& se : run.series) {
        REQUIRE_FALSE(se.truncated);
        for (const auto& s : se.samples) {
            CHECK(s.min_H >= kHarnackFloor);
            CHECK(s.min_q > 0.0);
        }
    }
}

TEST_CASE("pole window agrees with the working grid when eps is resolved", "[monitors]") {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 64;
    sc.eps_ladder = {1.2, 0.8, 0.5};
    const Setup su = make_setup(sc);
    for (double eps : {0.8, 0.5}) {
        const FlowContext cx = make_context(su, eps);
        RunPolicy pol = standard_policy(su);
        pol.t_stop = 0.5 * su.sched.T;
        const Trajectory traj = run_flow(cx, pol);
        const ConePoleFine fine = make_cone_pole_fine(su, eps);
        const MonitorSample coarse = make_sample(cx, traj.samples.back());
        const MonitorSample win = make_sample(cx, traj.samples.back(), false, &fine);
        // eps^2 spans dozens of cells here, so both meshes see the same
        // profile; the residual gap is the depth of the first node.
        const double tol = eps >= 0.8 ? 0.02 : 0.08;
        CHECK(std::abs(win.inf_R_minus_trth - coarse.inf_R_minus_trth) <=
              tol * std::abs(coarse.inf_R_minus_trth));
        CHECK(win.inf_lap == Catch::Approx(coarse.inf_lap).margin(0.01));
    }
}

TEST_CASE("pole window reproduces the continuum infima at t = 0", "[monitors]") {
    const Setup su = make_setup(make_scenario("cone-p1"));
    const Vec flat(su.geom[0].grid.n, 0.0);
    const auto a = make_cone_pole_fine(su, 0.025).eval(0.0, flat);
    const auto b = make_cone_pole_fine(su, 0.0125).eval(0.0, flat);
    REQUIRE(a.ok);
    REQUIRE(b.ok);
    // Quadrature of the closed-form t = 0 profile, evaluated at the depth
    // of the first window node.
    CHECK(a.inf_diff == Catch::Approx(-10.90).epsilon(0.01));
    CHECK(b.inf_diff == Catch::Approx(-13.08).epsilon(0.01));
    CHECK(std::abs(b.inf_diff - a.inf_diff) <= 0.25 * std::abs(b.inf_diff));
}

TEST_CASE("bound report on a small contraction ladder", "[monitors]") {
    Scenario sc = make_scenario("product-contraction");
    for (auto& f : sc.factors) f.n_nodes = 48;
    sc.eps_ladder = {0.1, 0.05, 0.025};
    const ScenarioRun run = run_scenario(sc, 1);
    const BoundReport& rep = run.report;
    REQUIRE(rep.entries.size() >= 10);
    auto entry = [&](const std::string& name) -> const BoundEntry& {
        for (const auto& e : rep.entries)
            if (e.name == name) return e;
        FAIL("missing entry " + name);
        return rep.entries[0];
    };
    CHECK(entry("min_q").pass);
    CHECK(entry("min_H").pass);
    CHECK(entry("sup_lap_v").pass);
    CHECK(entry("eps_cauchy_gap").pass);
    CHECK(entry("twisted_reference_chain").pass);
    CHECK(entry("sup_G").applicable);
    CHECK(std::isfinite(entry("sup_G").value.back()));
    // relative potential bounded below through u >= 0 everywhere
    for (const auto& se : run.series)
        for (const auto& s : se.samples) CHECK(s.sup_u >= 0.0);
    for (const auto& f : rep.fits) CHECK(std::isfinite(f.p));
}

TEST_CASE("Psi and Phi normalizations dominate their fields", "[monitors]") {
    Scenario sc = make_scenario("product-contraction");
    for (auto& f : sc.factors) f.n_nodes = 32;
    sc.t_stop_frac = 0.7;
    const Setup su = make_setup(sc);
    const FlowContext cx = make_context(su, 0.1);
    const Trajectory traj = run_flow(cx, standard_policy(su));
    const MonitorSeries se = make_series(cx, traj);
    for (const auto& s : se.samples) {
        CHECK(se.A > s.sup_v);
        CHECK(se.B >= s.sup_lap - 1e-12);
        CHECK(s.sup_psi >= 0.0);
        CHECK(s.sup_phi_ratio > 0.0);
    }
}

TEST_CASE("blow-up fit recovers synthetic exponents exactly", "[monitors]") {
    const double T = 0.7;
    std::vector<double> ts, r1, r2;
    for (int j = 1; j <= 24; ++j) {
        const double t = T * (1.0 - std::exp2(-j / 2.0));
        ts.push_back(t);
        r1.push_back(3.0 / (T - t));
        r2.push_back(0.5 / ((T - t) * (T - t)));
    }
    const FitResult f1 = fit_blowup_exponent(ts, r1, T);
    CHECK(f1.p == Catch::Approx(1.0).margin(1e-10));
    CHECK(f1.C == Catch::Approx(3.0).margin(1e-8));
    CHECK(f1.rms < 1e-12);
    CHECK(fit_blowup_exponent(ts, r2, T).p == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("degenerate fit windows are rejected", "[monitors]") {
    const double T = 0.7;
    CHECK_THROWS_AS(fit_blowup_exponent({0.1, 0.2, 0.3}, {1.0, 2.0, 3.0}, T), FitError);
    std::vector<double> ts, bad;
    for (int j = 1; j <= 24; ++j) {
        ts.push_back(T * (1.0 - std::exp2(-j / 2.0)));
        bad.push_back(-1.0);
    }
    CHECK_THROWS_AS(fit_blowup_exponent(ts, bad, T), FitError);
}

TEST_CASE("measured collapse extraction validates its samples", "[monitors]") {
    std::vector<double> ts = {0.1, 0.3, 0.5, 0.65};
    std::vector<double> good, bad;
    const double T = std::log(2.0);
    for (double t : ts) {
        good.push_back(8.0 * std::numbers::pi * (std::exp(-t) - std::exp(-T)));
        bad.push_back(1.0 + t);
    }
    CHECK(measure_singular_time(ts, good) == Catch::Approx(T).margin(1e-12));
    CHECK_THROWS_AS(measure_singular_time(ts, bad), FitError);
    CHECK_THROWS_AS(measure_singular_time({0.1}, {1.0}), FitError);
}
