#pragma once

// Potential-level parabolic flow.  Per factor i the metric is
//
//   q_i = qhat_{t,i} + [cone] k * ddbar rho_eps + (phi_i)_ss,
//
// and the potentials evolve by the fully decoupled scalar equations
//
//   phi_i' = log(q_i / Q_i) - phi_i + [cone] ( (1-beta) log(u + eps^2) - k rho_eps ).
//
// Time stepping is explicit midpoint RK2 under the diffusive step bound
// dt = c_cfl * min_j ds_j^2 q_j (the linearized operator is q^{-1} d^2/ds^2,
// Gershgorin bound 4 / min(ds^2 q), so c_cfl = 1/4 sits at half the stability
// limit).  A step whose stage metric loses positivity is retried with dt/2, at
// most 20 times; exhaustion or a dt underflow ends the run with a truncation
// flag rather than an exception -- reaching the singularity is an outcome, not
// a failure.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ckrf/base.hpp"
#include "ckrf/cone.hpp"
#include "ckrf/grid.hpp"
#include "ckrf/scenario.hpp"
#include "ckrf/schedule.hpp"

namespace ckrf {

struct FlowContext {
    const Setup* su = nullptr;
    double eps = 0.0;
    // cone-factor caches (empty on cone-free scenarios)
    Vec rho;
    Vec ddbar_rho;    // flux-form stencil of rho
    Vec cone_source;  // (1-beta) log(u + eps^2) - k rho
};

inline FlowContext make_context(const Setup& su, double eps) {
    FlowContext cx;
    cx.su = &su;
    cx.eps = eps;
    if (su.cone_factor >= 0) {
        const auto& geo = su.geom[su.cone_factor];
        const double beta = su.scenario.beta;
        cx.rho = rho_eps(geo, eps, beta);
        cx.ddbar_rho = d2s(geo.grid, cx.rho);
        cx.cone_source = log_section_eps(geo, eps);
        for (int j = 0; j < geo.grid.n; ++j)
            cx.cone_source[j] = (1.0 - beta) * cx.cone_source[j] - su.k * cx.rho[j];
    }
    return cx;
}

struct FlowState {
    double t = 0.0;
    std::vector<Vec> phi;
    std::vector<Vec> phi_dot;  // right side evaluated at (t, phi)
    std::vector<Vec> q;        // metric densities at (t, phi)
};

// Right side of one factor; writes q and rhs, returns false as soon as the
// metric density drops to zero or below (state unusable).
inline bool factor_rhs(const FlowContext& cx, int i, double t, const Vec& phi, Vec& scratch_d2,
                       Vec& q_out, Vec& rhs_out) {
    const Setup& su = *cx.su;
    const auto& fac = su.sched.factors[i];
    const Grid& g = su.geom[i].grid;
    const bool cone_here = (i == su.cone_factor);
    const double a = su.sched.weight(t);

    d2s_into(g, phi, scratch_d2);
    q_out.resize(g.n);
    rhs_out.resize(g.n);
    for (int j = 0; j < g.n; ++j) {
        double q = a * fac.q0[j] + (1.0 - a) * fac.qhat_T[j] + scratch_d2[j];
        if (cone_here) q += su.k * cx.ddbar_rho[j];
        if (!(q > 0.0)) return false;
        q_out[j] = q;
    }
    for (int j = 0; j < g.n; ++j) {
        rhs_out[j] = std::log(q_out[j] / fac.bg_Q[j]) - phi[j];
        if (cone_here) rhs_out[j] += cx.cone_source[j];
    }
    return true;
}

inline bool flow_rhs(const FlowContext& cx, double t, const std::vector<Vec>& phi, Vec& scratch,
                     std::vector<Vec>& q_out, std::vector<Vec>& rhs_out) {
    const std::size_t nf = cx.su->geom.size();
    q_out.resize(nf);
    rhs_out.resize(nf);
    for (std::size_t i = 0; i < nf; ++i)
        if (!factor_rhs(cx, static_cast<int>(i), t, phi[i], scratch, q_out[i], rhs_out[i]))
            return false;
    return true;
}

inline double cfl_dt(const FlowContext& cx, const std::vector<Vec>& q) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Grid& g = cx.su->geom[i].grid;
        for (int j = 0; j < g.n; ++j) m = std::min(m, g.ds[j] * g.ds[j] * q[i][j]);
    }
    return cx.su->scenario.c_cfl * m;
}

struct RunPolicy {
    double t_stop = 0.0;
    int samples_per_octave = 2;
    double dt_floor = 1e-10;
    int max_halvings = 20;
    // Density-threshold stop: end the run (cleanly, not as a truncation) once
    // any factor density falls to q_stop_scale * dw^2.  Collapses with spatial
    // structure outrun the mesh near the degenerating pole; dw^2 is the
    // natural mesh scale for the cutoff, and the scenario calibrates the
    // prefactor.  Zero disables the check; collapses that stay exactly round
    // have no spatial truncation error and do not need it.
    double q_stop_scale = 0.0;
    std::vector<double> extra_sample_times;
};

inline RunPolicy standard_policy(const Setup& su) {
    RunPolicy p;
    p.t_stop = su.scenario.t_stop_frac * su.sched.T;
    p.samples_per_octave = su.scenario.samples_per_octave;
    p.q_stop_scale = su.scenario.q_stop_scale;
    p.extra_sample_times = {0.5 * su.sched.T};
    return p;
}

struct Trajectory {
    std::vector<FlowState> samples;
    bool truncated = false;
    bool density_stopped = false;  // ended by the q_stop_scale policy
    std::string stop_reason;       // set when truncated or density_stopped
    long long steps = 0;
};

inline std::vector<double> sample_times(const Setup& su, const RunPolicy& policy) {
    const double T = su.sched.T;
    std::vector<double> ts = {0.0};
    for (int j = 1;; ++j) {
        const double tj = T * (1.0 - std::exp2(-static_cast<double>(j) / policy.samples_per_octave));
        if (tj >= policy.t_stop * (1.0 - 1e-12)) break;
        ts.push_back(tj);
    }
    for (double t : policy.extra_sample_times)
        if (t > 0.0 && t < policy.t_stop * (1.0 - 1e-12)) ts.push_back(t);
    ts.push_back(policy.t_stop);
    std::sort(ts.begin(), ts.end());
    std::vector<double> out;
    for (double t : ts)
        if (out.empty() || t - out.back() > 1e-12 * T) out.push_back(t);
    return out;
}

inline Trajectory run_flow(const FlowContext& cx, const RunPolicy& policy) {
    const Setup& su = *cx.su;
    if (!(policy.t_stop > 0.0) || policy.t_stop >= su.sched.T)
        throw ConfigError("run_flow: t_stop must lie in (0, T)");
    const std::vector<double> stops = sample_times(su, policy);

    const std::size_t nf = su.geom.size();
    FlowState st;
    st.t = 0.0;
    st.phi.resize(nf);
    for (std::size_t i = 0; i < nf; ++i) st.phi[i].assign(su.geom[i].grid.n, 0.0);

    Vec scratch;
    if (!flow_rhs(cx, 0.0, st.phi, scratch, st.q, st.phi_dot))
        throw DegenerateMetricError("run_flow: initial twisted reference not positive");

    Trajectory traj;
    traj.samples.push_back(st);
    std::size_t next_stop = 1;

    std::vector<Vec> phi_stage(nf), q_stage(nf), rhs_stage(nf), phi_new(nf), q_new(nf),
        rhs_new(nf);

    while (next_stop < stops.size()) {
        const double target = stops[next_stop];
        if (target - st.t <= 1e-15 * su.sched.T) {
            st.t = target;
            traj.samples.push_back(st);
            ++next_stop;
            continue;
        }
        const double gap = target - st.t;
        double dt = std::min(cfl_dt(cx, st.q), gap);
        bool stepped = false;
        for (int h = 0; h <= policy.max_halvings; ++h, dt *= 0.5) {
            // The full closing step is always allowed: when a CFL step lands
            // within dt_floor of a stop, the sliver is an arrival, not a
            // degeneration.  Halved retries stay subject to the floor.
            if (dt < policy.dt_floor && dt < gap) break;
            // midpoint stage reuses the cached right side as k1
            for (std::size_t i = 0; i < nf; ++i) {
                phi_stage[i].resize(st.phi[i].size());
                for (std::size_t j = 0; j < st.phi[i].size(); ++j)
                    phi_stage[i][j] = st.phi[i][j] + 0.5 * dt * st.phi_dot[i][j];
            }
            if (!flow_rhs(cx, st.t + 0.5 * dt, phi_stage, scratch, q_stage, rhs_stage)) continue;
            for (std::size_t i = 0; i < nf; ++i) {
                phi_new[i].resize(st.phi[i].size());
                for (std::size_t j = 0; j < st.phi[i].size(); ++j)
                    phi_new[i][j] = st.phi[i][j] + dt * rhs_stage[i][j];
            }
            // evaluating at the end point both verifies ellipticity and yields
            // the next step's k1
            if (!flow_rhs(cx, st.t + dt, phi_new, scratch, q_new, rhs_new)) continue;
            st.t += dt;
            st.phi.swap(phi_new);
            st.phi_dot.swap(rhs_new);
            st.q.swap(q_new);
            stepped = true;
            ++traj.steps;
            break;
        }
        if (!stepped) {
            traj.truncated = true;
            traj.stop_reason = "metric degenerated before t_stop (singularity reached)";
            break;
        }
        if (std::abs(st.t - target) <= 1e-12 * su.sched.T) {
            st.t = target;
            traj.samples.push_back(st);
            ++next_stop;
        }
        if (policy.q_stop_scale > 0.0) {
            bool hit = false;
            for (std::size_t i = 0; i < nf && !hit; ++i) {
                const double floor_i = policy.q_stop_scale * su.geom[i].grid.dw * su.geom[i].grid.dw;
                for (double qj : st.q[i])
                    if (qj <= floor_i) {
                        hit = true;
                        break;
                    }
            }
            if (hit) {
                traj.density_stopped = true;
                traj.stop_reason = "density reached the mesh noise floor (q_stop_scale * dw^2)";
                if (std::abs(traj.samples.back().t - st.t) > 1e-12 * su.sched.T)
                    traj.samples.push_back(st);
                break;
            }
        }
    }
    return traj;
}

}  // namespace ckrf
