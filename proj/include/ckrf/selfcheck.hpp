#pragma once

// Built-in invariant suite behind `ckrf check`: chi properties, convention
// locks, identity refinement ratios, determinism -- all on small grids so a
// fresh checkout verifies itself in seconds.  The mutation hook flips the sign
// of the n e^{t-T} term inside the trace identity; a correctly wired pipeline
// must then fail the trace check at O(1).

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ckrf/bounds.hpp"
#include "ckrf/cone.hpp"
#include "ckrf/flow.hpp"
#include "ckrf/monitors.hpp"
#include "ckrf/report.hpp"
#include "ckrf/runner.hpp"
#include "ckrf/scenario.hpp"

namespace ckrf {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace selfcheck {

inline CheckResult check_chi_properties() {
    std::ostringstream os;
    bool ok = true;
    auto expect = [&](bool c, const std::string& what) {
        if (!c) {
            ok = false;
            os << "FAIL " << what << "; ";
        }
    };
    // frozen quadrature oracles
    expect(std::abs(chi(1.0, 0.01, 0.5) - 0.73406036297875823) < 5e-12, "chi(1,0.01,0.5) oracle");
    expect(std::abs(chi(0.3, 0.0025, 0.7) - 0.38990382678594308) < 5e-12,
           "chi(0.3,0.0025,0.7) oracle");
    expect(std::abs(chi_du(0.3, 0.0025, 0.7) - 0.97518019509848142) < 5e-12, "chi_du oracle");
    // exact limits and bounds
    expect(chi(0.0, 0.01, 0.5) == 0.0, "chi(0)=0");
    expect(std::abs(chi(0.7, 0.0, 0.45) - std::pow(0.7, 0.45)) < 1e-13, "chi(u,0)=u^beta");
    for (double u : {0.02, 0.3, 0.9}) {
        expect(chi(u, 0.01, 0.5) >= 0.0 && chi(u, 0.01, 0.5) <= std::pow(u, 0.5) + 1e-13,
               "0 <= chi <= u^beta");
        expect(chi(u + 0.05, 0.01, 0.5) > chi(u, 0.01, 0.5), "chi increasing in u");
        expect(chi(u, 0.0004, 0.5) > chi(u, 0.01, 0.5), "chi decreasing in eps^2");
    }
    // derivative consistency
    {
        const double h = 1e-6, u = 0.37, e2 = 0.01, b = 0.5;
        const double fd = (chi(u + h, e2, b) - chi(u - h, e2, b)) / (2 * h);
        expect(std::abs(fd - chi_du(u, e2, b)) < 1e-9, "chi_du matches finite difference");
    }
    {
        bool threw = false;
        try {
            chi(-0.1, 0.01, 0.5);
        } catch (const std::domain_error&) {
            threw = true;
        }
        expect(threw, "negative u raises domain error");
    }
    return {"chi.properties", ok, ok ? "oracles, bounds, monotonicity, derivative" : os.str()};
}

inline CheckResult check_geometry_conventions() {
    std::ostringstream os;
    bool ok = true;
    const FactorGeometry f = build_factor(96, false);
    const Grid& g = f.grid;
    // round metric: R = 2, Gauss-Bonnet exact by the flux form
    Vec R = scalar_curvature(g, f.fs_density);
    double worst = 0.0;
    for (double r : R) worst = std::max(worst, std::abs(r - 2.0));
    if (worst > 1e-11) {
        ok = false;
        os << "R(FS) deviates by " << worst << "; ";
    }
    const double gb = 2.0 * std::numbers::pi * integral_ds(g, ricci_density(g, f.fs_density));
    if (std::abs(gb - 4.0 * std::numbers::pi) > 1e-10) {
        ok = false;
        os << "Gauss-Bonnet " << gb << "; ";
    }
    // slope asymptotics of a smooth density, via (log q)_s = q_s / q (q is
    // smooth through the poles, log q is not)
    Vec qs(g.n);
    for (int j = 0; j < g.n; ++j) qs[j] = f.fs_density[j] * (1.0 + 0.3 * g.w[j]);
    Vec sl = d1s(g, qs);
    for (int j = 0; j < g.n; ++j) sl[j] /= qs[j];
    if (std::abs(sl.front() - 1.0) > 0.05 || std::abs(sl.back() + 1.0) > 0.05) {
        ok = false;
        os << "pole slopes " << sl.front() << ", " << sl.back() << "; ";
    }
    // scaling law R(c q) = R(q)/c
    Vec q2 = f.fs_density;
    for (double& x : q2) x *= 2.0;
    Vec R2 = scalar_curvature(g, q2);
    for (int j = 0; j < g.n; ++j)
        if (std::abs(R2[j] - 0.5 * R[j]) > 1e-11) {
            ok = false;
            os << "scaling law broken; ";
            break;
        }
    return {"geometry.conventions", ok, ok ? "R=2 round, exact degree, slopes, scaling" : os.str()};
}

inline CheckResult check_schedule_arithmetic() {
    std::ostringstream os;
    bool ok = true;
    auto expect = [&](bool c, const std::string& what) {
        if (!c) {
            ok = false;
            os << "FAIL " << what << "; ";
        }
    };
    {
        Scenario sc = make_scenario("round-collapse");
        sc.factors[0].n_nodes = 64;
        Setup su = make_setup(sc);
        expect(std::abs(su.sched.T - std::log(2.0)) < 1e-14, "T(round-collapse) = ln 2");
        // sigma vanishes identically: background = initial metric exactly
        double dmax = 0.0;
        for (int j = 0; j < 64; ++j)
            dmax = std::max(dmax, std::abs(su.sched.factors[0].bg_Q[j] - su.sched.factors[0].q0[j]));
        expect(dmax < 1e-10, "round background Omega equals q0");
    }
    {
        Scenario sc = make_scenario("cone-p1");
        sc.factors[0].n_nodes = 64;
        Setup su = make_setup(sc);
        expect(std::abs(su.sched.T - std::log(7.0 / 3.0)) < 1e-14, "T(cone-p1) = ln 7/3");
        expect(su.sched.factors[0].bg_residual < 1e-8, "background equation residual");
        const double mass = area(su.geom[0].grid, su.sched.factors[0].bg_Q);
        expect(std::abs(mass - sc.factors[0].area0) < 1e-8, "background mass normalization");
    }
    {
        Scenario sc = make_scenario("product-contraction");
        sc.factors[0].n_nodes = 48;
        sc.factors[1].n_nodes = 48;
        Setup su = make_setup(sc);
        expect(std::abs(su.sched.T - std::log(2.0)) < 1e-14, "T(product) = ln 2");
        expect(su.sched.collapsing == 1, "second factor collapses");
        expect(std::abs(su.sched.factors[0].areaT - 8.5 * std::numbers::pi) < 1e-12,
               "surviving area 8.5 pi");
    }
    return {"schedule.arithmetic", ok, ok ? "T values, collapse index, background solve" : os.str()};
}

inline CheckResult check_cone_densities() {
    std::ostringstream os;
    bool ok = true;
    auto expect = [&](bool c, const std::string& what) {
        if (!c) {
            ok = false;
            os << "FAIL " << what << "; ";
        }
    };
    const double beta = 0.5;
    for (int n : {64, 128}) {
        const FactorGeometry f = build_factor(n, true);
        for (double eps : {0.5, 0.1, 0.0125}) {
            const Vec th = theta_eps_density(f, eps, beta);
            expect(std::abs(integral_ds(f.grid, th) - (1.0 - beta)) < 1e-13,
                   "int theta = (1-beta) exactly");
            const Vec dd = ddbar_rho_density(f, eps, beta);
            expect(std::abs(integral_ds(f.grid, dd)) < 1e-13, "int ddbar rho = 0 exactly");
        }
    }
    // stencil vs closed form, second order at resolved eps
    double diff[2];
    int idx = 0;
    for (int n : {64, 128}) {
        const FactorGeometry f = build_factor(n, true);
        const Vec a = ddbar_rho_density(f, 0.5, beta);
        const Vec b = ddbar_rho_density_closed_form(f, 0.5, beta);
        double d = 0.0;
        for (int j = 0; j < n; ++j) d = std::max(d, std::abs(a[j] - b[j]));
        diff[idx++] = d;
    }
    expect(diff[1] < 2e-4, "stencil ddbar rho near closed form");
    expect(diff[0] / diff[1] > 3.0 && diff[0] / diff[1] < 5.0, "ddbar rho second order");
    return {"cone.densities", ok, ok ? "exact masses, stencil/closed-form agreement" : os.str()};
}

inline double trace_residual_at(int n, double t_frac, bool mutate) {
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = n;
    Setup su = make_setup(sc);
    FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = t_frac * su.sched.T;
    Trajectory traj = run_flow(cx, pol);
    MonitorSample ms = make_sample(cx, traj.samples.back(), mutate);
    return ms.res_trace_linf;
}

inline CheckResult check_trace_identity(bool mutate) {
    std::ostringstream os;
    const double r_coarse = trace_residual_at(48, 0.25, mutate);
    const double r_fine = trace_residual_at(96, 0.25, mutate);
    const double ratio = r_coarse / r_fine;
    const bool small = r_fine < 1e-3;
    const bool second_order = ratio > 3.2 && ratio < 5.0;
    os << "residual " << r_coarse << " -> " << r_fine << " (ratio " << ratio << ")";
    if (!(small && second_order))
        os << " -- trace identity (1-e^{t-T})(R - tr theta) = -Lap v + n e^{t-T} - u violated";
    return {"trace.identity", small && second_order, os.str()};
}

inline CheckResult check_v_identity() {
    std::ostringstream os;
    double res[2];
    int idx = 0;
    for (int n : {48, 96}) {
        Scenario sc = make_scenario("cone-p1");
        sc.factors[0].n_nodes = n;
        Setup su = make_setup(sc);
        FlowContext cx = make_context(su, 0.1);
        RunPolicy pol = standard_policy(su);
        pol.t_stop = 0.3 * su.sched.T;
        const double gap = (idx == 0 ? 2e-3 : 1e-3);
        pol.extra_sample_times = {0.2 * su.sched.T, 0.2 * su.sched.T + gap};
        Trajectory traj = run_flow(cx, pol);
        const MonitorSeries se = make_series(cx, traj);
        for (std::size_t k = 0; k + 1 < se.samples.size(); ++k) {
            if (std::abs(se.samples[k].t - 0.2 * su.sched.T) < 1e-12) {
                res[idx] = se.samples[k].res_v_linf;
                break;
            }
        }
        ++idx;
    }
    const double ratio = res[0] / res[1];
    const bool pass = res[1] < 5e-2 && ratio > 1.3 && ratio < 6.0;
    os << "residual " << res[0] << " -> " << res[1] << " (ratio " << ratio << ")";
    if (!pass) os << " -- evolution identity v' = Lap v - n + u violated";
    return {"v.identity", pass, os.str()};
}

inline CheckResult check_flow_manufactured() {
    // fixed-interval Richardson refinement: RK2 is globally second order
    std::ostringstream os;
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 32;
    Setup su = make_setup(sc);
    FlowContext cx = make_context(su, 0.1);
    const double t0 = 0.05, span = 4e-3;
    auto advance = [&](int nsteps) {
        const double dt = span / nsteps;
        std::vector<Vec> phi = {Vec(32, 0.0)}, q, rhs, stage_q, stage_rhs, phim(1);
        Vec scratch;
        double t = t0;
        for (int s = 0; s < nsteps; ++s) {
            if (!flow_rhs(cx, t, phi, scratch, q, rhs)) throw DegenerateMetricError("mms");
            phim[0].resize(32);
            for (int j = 0; j < 32; ++j) phim[0][j] = phi[0][j] + 0.5 * dt * rhs[0][j];
            if (!flow_rhs(cx, t + 0.5 * dt, phim, scratch, stage_q, stage_rhs))
                throw DegenerateMetricError("mms");
            for (int j = 0; j < 32; ++j) phi[0][j] += dt * stage_rhs[0][j];
            t += dt;
        }
        return phi[0];
    };
    const Vec a = advance(4), b = advance(8), c = advance(16);
    double d1 = 0, d2 = 0;
    for (int j = 0; j < 32; ++j) {
        d1 = std::max(d1, std::abs(a[j] - b[j]));
        d2 = std::max(d2, std::abs(b[j] - c[j]));
    }
    const double ratio = d1 / d2;
    const bool pass = ratio > 3.2 && ratio < 5.0;
    os << "step-halving defect " << d1 << " -> " << d2 << " (ratio " << ratio << ")";
    return {"flow.manufactured", pass, os.str()};
}

inline CheckResult check_flow_stationarity() {
    // exactly round data stays exactly round: phi spatially constant,
    // q = a_t q0 to roundoff
    std::ostringstream os;
    Scenario sc = make_scenario("round-collapse");
    sc.factors[0].n_nodes = 32;
    Setup su = make_setup(sc);
    FlowContext cx = make_context(su, 0.1);
    RunPolicy pol = standard_policy(su);
    pol.t_stop = 0.5 * su.sched.T;
    Trajectory traj = run_flow(cx, pol);
    const FlowState& st = traj.samples.back();
    double spat = 0.0, qdev = 0.0;
    const double a = su.sched.weight(st.t);
    for (int j = 0; j < 32; ++j) {
        spat = std::max(spat, std::abs(st.phi[0][j] - st.phi[0][0]));
        qdev = std::max(qdev, std::abs(st.q[0][j] - a * su.sched.factors[0].q0[j]));
    }
    const bool pass = spat < 1e-12 && qdev < 1e-12;
    os << "spatial drift " << spat << ", reference drift " << qdev;
    return {"flow.stationarity", pass, os.str()};
}

inline CheckResult check_determinism() {
    std::ostringstream os;
    Scenario sc = make_scenario("cone-p1");
    sc.factors[0].n_nodes = 32;
    sc.eps_ladder = {0.1, 0.05, 0.02};
    sc.t_stop_frac = 0.5;
    auto render = [&] {
        const ScenarioRun run = run_scenario(sc, 2);
        std::string all;
        for (const auto& se : run.series) all += monitor_csv_string(run.setup, se);
        return all;
    };
    const std::string a = render(), b = render();
    const bool pass = a == b && !a.empty();
    os << (pass ? "byte-identical CSV across reruns" : "CSV bytes differ between reruns");
    return {"determinism.csv", pass, os.str()};
}

inline CheckResult check_fit_synthetic() {
    std::ostringstream os;
    bool ok = true;
    const double T = 0.7;
    std::vector<double> ts, r1, r2;
    for (int j = 1; j <= 24; ++j) {
        const double t = T * (1.0 - std::exp2(-j / 2.0));
        ts.push_back(t);
        r1.push_back(1.0 / (T - t));
        r2.push_back(1.0 / ((T - t) * (T - t)));
    }
    const FitResult f1 = fit_blowup_exponent(ts, r1, T);
    const FitResult f2 = fit_blowup_exponent(ts, r2, T);
    if (std::abs(f1.p - 1.0) > 1e-9 || std::abs(f2.p - 2.0) > 1e-9) {
        ok = false;
        os << "synthetic exponents " << f1.p << ", " << f2.p << "; ";
    }
    bool threw = false;
    try {
        fit_blowup_exponent({0.1, 0.2}, {1.0, 2.0}, T);
    } catch (const FitError&) {
        threw = true;
    }
    if (!threw) {
        ok = false;
        os << "degenerate window accepted; ";
    }
    return {"fit.synthetic", ok, ok ? "p=1 and p=2 recovered exactly" : os.str()};
}

}  // namespace selfcheck

inline std::vector<CheckResult> run_self_checks(const std::string& filter = "",
                                                bool mutate_trace_sign = false) {
    std::vector<CheckResult> all;
    auto want = [&](const std::string& name) {
        return filter.empty() || name.find(filter) != std::string::npos;
    };
    if (want("chi.properties")) all.push_back(selfcheck::check_chi_properties());
    if (want("geometry.conventions")) all.push_back(selfcheck::check_geometry_conventions());
    if (want("schedule.arithmetic")) all.push_back(selfcheck::check_schedule_arithmetic());
    if (want("cone.densities")) all.push_back(selfcheck::check_cone_densities());
    if (want("trace.identity")) all.push_back(selfcheck::check_trace_identity(mutate_trace_sign));
    if (want("v.identity")) all.push_back(selfcheck::check_v_identity());
    if (want("flow.manufactured")) all.push_back(selfcheck::check_flow_manufactured());
    if (want("flow.stationarity")) all.push_back(selfcheck::check_flow_stationarity());
    if (want("determinism.csv")) all.push_back(selfcheck::check_determinism());
    if (want("fit.synthetic")) all.push_back(selfcheck::check_fit_synthetic());
    return all;
}

}  // namespace ckrf
