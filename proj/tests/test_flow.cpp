#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ckrf/flow.hpp"
#include "ckrf/monitors.hpp"
#include "ckrf/runner.hpp"

using namespace ckrf;

namespace {

Setup small_setup(const std::string& name, int n) {
    Scenario sc = make_scenario(name);
    for (auto& f : sc.factors) f.n_nodes = n;
    return make_setup(sc);
}

}  // namespace

TEST_CASE("right side at t = 0 matches its definition", "[flow]") {
    const Setup su = small_setup("cone-p1", 32);
    const FlowContext cx = make_context(su, 0.1);
    std::vector<Vec> phi = {Vec(32, 0.0)}, q, rhs;
    Vec scratch;
    REQUIRE(flow_rhs(cx, 0.0, phi, scratch, q, rhs));
    const auto& f = su.sched.factors[0];
    for (int j = 0; j < 32; ++j) {
        const double q_expect = f.q0[j] + su.k * cx.ddbar_rho[j];
        CHECK(q[0][j] == Catch::Approx(q_expect).margin(1e-14));
        const double r_expect = std::log(q_expect / f.bg_Q[j]) + cx.cone_source[j];
        CHECK(rhs[0][j] == Catch::Approx(r_expect).margin(1e-13));
    }
}

TEST_CASE("round data stays spatially constant and tracks the schedule", "[flow]") {
    const Setup su = small_setup("round-collapse", 32);
    const FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = 0.6 * su.sched.T;
    const Trajectory traj = run_flow(cx, pol);
    REQUIRE_FALSE(traj.truncated);
    for (const auto& st : traj.samples) {
        const double a = su.sched.weight(st.t);
        for (int j = 0; j < 32; ++j) {
            CHECK(std::abs(st.phi[0][j] - st.phi[0][0]) < 1e-12);
            CHECK(std::abs(st.q[0][j] - a * su.sched.factors[0].q0[j]) < 1e-12);
        }
    }
}

TEST_CASE("discrete areas follow the class ODE exactly", "[flow]") {
    const Setup su = small_setup("cone-p1", 48);
    const FlowContext cx = make_context(su, 0.05);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = 0.9 * su.sched.T;
    const Trajectory traj = run_flow(cx, pol);
    REQUIRE_FALSE(traj.truncated);
    REQUIRE(traj.samples.size() >= 4);
    for (const auto& st : traj.samples) {
        const double a = area(su.geom[0].grid, st.q[0]);
        CHECK(a == Catch::Approx(su.sched.area_at(0, st.t)).epsilon(1e-11));
    }
    // and the finite-difference rate matches the ODE right side to O(dt^2)
    for (std::size_t s = 0; s + 1 < traj.samples.size(); ++s) {
        const double t1 = traj.samples[s].t, t2 = traj.samples[s + 1].t;
        const double a1 = area(su.geom[0].grid, traj.samples[s].q[0]);
        const double a2 = area(su.geom[0].grid, traj.samples[s + 1].q[0]);
        const double rate = (a2 - a1) / (t2 - t1);
        const double mid = su.sched.area_at(0, 0.5 * (t1 + t2));
        const double expect = -mid + su.sched.factors[0].degree;
        CHECK(rate == Catch::Approx(expect).epsilon(0.01));
    }
}

TEST_CASE("measured singular time matches the schedule", "[flow]") {
    const Setup su = small_setup("round-collapse", 32);
    const FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = 0.95 * su.sched.T;
    const Trajectory traj = run_flow(cx, pol);
    std::vector<double> ts, areas;
    for (const auto& st : traj.samples) {
        ts.push_back(st.t);
        areas.push_back(area(su.geom[0].grid, st.q[0]));
    }
    CHECK(measure_singular_time(ts, areas) == Catch::Approx(std::log(2.0)).margin(1e-9));
}

TEST_CASE("sample ladder accumulates geometrically at T", "[flow]") {
    const Setup su = small_setup("round-collapse", 32);
    RunPolicy pol = standard_policy(su);
    const auto ts = sample_times(su, pol);
    REQUIRE(ts.front() == 0.0);
    CHECK(ts.back() == Catch::Approx(su.scenario.t_stop_frac * su.sched.T));
    int in_window = 0;
    for (double t : ts) {
        const double gap = su.sched.T - t;
        if (gap >= 1e-3 && gap <= 0.1) ++in_window;
    }
    CHECK(in_window >= 8);  // the blow-up fit needs this many
}

TEST_CASE("time step collapse truncates the run instead of throwing", "[flow]") {
    const Setup su = small_setup("round-collapse", 32);
    const FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    pol.dt_floor = 1e3;  // force immediate underflow
    const Trajectory traj = run_flow(cx, pol);
    CHECK(traj.truncated);
    CHECK_FALSE(traj.stop_reason.empty());
    REQUIRE_FALSE(traj.samples.empty());
    CHECK(traj.samples.front().t == 0.0);
}

TEST_CASE("density threshold ends the run cleanly before T", "[flow]") {
    Scenario sc = make_scenario("round-collapse");
    sc.factors[0].n_nodes = 64;
    sc.q_stop_scale = 20.0;  // far above the noise floor: trips mid-run
    const Setup su = make_setup(sc);
    const FlowContext cx = make_context(su, 0.025);
    const Trajectory traj = run_flow(cx, standard_policy(su));
    CHECK(traj.density_stopped);
    CHECK_FALSE(traj.truncated);
    CHECK_FALSE(traj.stop_reason.empty());
    // a(t) 2 w0 (1 - w0) = 20 dw^2 crosses at t ~ 0.4195
    CHECK(traj.samples.back().t == Catch::Approx(0.4195).margin(0.01));
}

TEST_CASE("a nonpositive twisted reference is rejected up front", "[flow]") {
    Setup su = small_setup("cone-p1", 32);
    su.k = 80.0;  // bypass validation: reference must lose positivity
    const FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    CHECK_THROWS_AS(run_flow(cx, pol), DegenerateMetricError);
}

TEST_CASE("metric gaps between consecutive eps shrink along the ladder", "[flow]") {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 64;
    sc.eps_ladder = {0.1, 0.05, 0.025};
    sc.t_stop_frac = 0.6;
    const ScenarioRun run = run_scenario(sc, 1);
    const double T = run.setup.sched.T;
    std::vector<Vec> q_mid;
    for (const auto& se : run.series) {
        for (const auto& s : se.samples)
            if (std::abs(s.t - 0.5 * T) < 1e-12) q_mid.push_back(s.fac[0].q);
    }
    REQUIRE(q_mid.size() == 3);
    double gap[2] = {0.0, 0.0};
    for (int r = 0; r < 2; ++r)
        for (int j = 0; j < 64; ++j)
            if (run.setup.geom[0].grid.w[j] >= 0.2)
                gap[r] = std::max(gap[r], std::abs(q_mid[r][j] - q_mid[r + 1][j]));
    CHECK(gap[1] < gap[0]);
    CHECK(gap[0] > 0.0);
}

TEST_CASE("without a cone the ladder shares one trajectory bitwise", "[flow]") {
    Scenario sc = make_scenario("round-collapse");
    sc.factors[0].n_nodes = 32;
    sc.t_stop_frac = 0.5;
    const ScenarioRun run = run_scenario(sc, 2);
    REQUIRE(run.series.size() == 4);
    for (std::size_t r = 1; r < run.series.size(); ++r) {
        REQUIRE(run.series[r].samples.size() == run.series[0].samples.size());
        for (std::size_t s = 0; s < run.series[r].samples.size(); ++s)
            CHECK(run.series[r].samples[s].fac[0].q == run.series[0].samples[s].fac[0].q);
    }
}
