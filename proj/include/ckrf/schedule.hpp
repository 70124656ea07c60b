#pragma once

// Cohomology-level bookkeeping for the normalized flow.
//
// Each factor class evolves by the ODE A_i' = -A_i + d_i with stationary value
// d_i = -4*pi on cone-free factors and d_i = -2*pi(1+beta) on the cone factor,
// so A_i(t) = e^{-t} A_i(0) + (1-e^{-t}) d_i and the first factor to hit zero
// defines the singular time T.  The reference density interpolates the initial
// density towards the round representative of the limit class,
//
//   qhat_t = a_t q_0 + (1 - a_t) qhat_T,   a_t = (e^{-t} - e^{-T})/(1 - e^{-T}),
//
// which satisfies the exact pointwise identity
// qhat_T - e^{t-T} qhat_t = (1 - e^{t-T}) qhat_inf with
// qhat_inf = (-e^{-T} q_0 + qhat_T)/(1 - e^{-T}).
//
// The background volume form Omega solves -Ric(Omega) + (1-beta) iR_h
// = omega_hat_inf per factor, i.e. (log Q)_ss = qhat_inf - (1-beta) r_h, with
// smooth slope asymptotics and total mass A_i(0).  Q is constructed by double
// integration on a refined grid whose nodes contain the working nodes, so no
// interpolation error enters.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "ckrf/base.hpp"
#include "ckrf/geometry.hpp"
#include "ckrf/grid.hpp"

namespace ckrf {

struct SingularTime {
    double T = 0.0;
    int collapsing = -1;  // factor whose area hits zero at T
};

inline SingularTime compute_T(const std::vector<double>& area0,
                              const std::vector<double>& degree) {
    if (area0.empty() || area0.size() != degree.size())
        throw ConfigError("compute_T: mismatched area/degree lists");
    SingularTime st;
    st.T = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < area0.size(); ++i) {
        if (!(area0[i] > 0.0)) throw ConfigError("compute_T: initial areas must be positive");
        if (degree[i] >= 0.0) continue;  // this factor never degenerates
        const double Ti = std::log((area0[i] - degree[i]) / (-degree[i]));
        if (Ti < st.T) {
            st.T = Ti;
            st.collapsing = static_cast<int>(i);
        }
    }
    if (st.collapsing < 0)
        throw ConfigError("compute_T: infinite horizon (no factor class degenerates)");
    return st;
}

struct ScheduleFactor {
    double area0 = 0.0;
    double degree = 0.0;
    double areaT = 0.0;
    InitialShape shape0;
    Vec q0;           // initial density on the working grid
    Vec qhat_T;       // round representative of the limit class (zero if collapsing)
    Vec qhat_inf;     // (-e^{-T} q0 + qhat_T)/(1-e^{-T})
    Vec bg_log_m;     // log( Q / (w(1-w)) ), smooth part of the background density
    Vec bg_Q;         // background volume density, mass-normalized to area0
    Vec bg_logQ_ss;   // exact (log Q)_ss = qhat_inf - (1-beta) r_h on the nodes
    double bg_residual = 0.0;  // defining-equation residual on the refined grid
};

struct ClassSchedule {
    double T = 0.0;
    int collapsing = -1;
    int cone_factor = -1;
    double beta = 1.0;
    std::vector<ScheduleFactor> factors;

    double area_at(int i, double t) const {
        const auto& f = factors[i];
        return std::exp(-t) * f.area0 + (1.0 - std::exp(-t)) * f.degree;
    }

    // a_t, the weight of q0 in the reference density
    double weight(double t) const {
        return (std::exp(-t) - std::exp(-T)) / (1.0 - std::exp(-T));
    }

    Vec reference_density(int i, double t) const {
        if (!(t >= 0.0) || t >= T) throw ConfigError("reference_density: t outside [0, T)");
        const double a = weight(t);
        const auto& f = factors[i];
        Vec q(f.q0.size());
        for (std::size_t j = 0; j < q.size(); ++j)
            q[j] = a * f.q0[j] + (1.0 - a) * f.qhat_T[j];
        return q;
    }
};

// Build the full schedule for a family of factors.  cone_factor = -1 means no
// cone anywhere; beta is only consulted for the cone factor.
inline ClassSchedule make_schedule(const std::vector<FactorGeometry>& geom,
                                   const std::vector<InitialShape>& shapes,
                                   double beta, int cone_factor) {
    if (geom.empty() || geom.size() != shapes.size())
        throw ConfigError("make_schedule: mismatched geometry/shape lists");
    const double pi = std::numbers::pi;

    std::vector<double> area0(geom.size()), degree(geom.size());
    for (std::size_t i = 0; i < geom.size(); ++i) {
        area0[i] = shapes[i].area;
        degree[i] = (static_cast<int>(i) == cone_factor) ? -2.0 * pi * (1.0 + beta) : -4.0 * pi;
    }
    const SingularTime st = compute_T(area0, degree);

    ClassSchedule sched;
    sched.T = st.T;
    sched.collapsing = st.collapsing;
    sched.cone_factor = cone_factor;
    sched.beta = beta;
    sched.factors.resize(geom.size());

    const double emT = std::exp(-sched.T);
    for (std::size_t i = 0; i < geom.size(); ++i) {
        ScheduleFactor& f = sched.factors[i];
        const Grid& g = geom[i].grid;
        f.area0 = area0[i];
        f.degree = degree[i];
        f.shape0 = shapes[i];
        f.areaT = emT * f.area0 + (1.0 - emT) * f.degree;
        if (std::abs(f.areaT) < 1e-12 * f.area0) f.areaT = 0.0;
        if (f.areaT < 0.0) throw ConfigError("make_schedule: negative limit area");

        f.q0.resize(g.n);
        f.qhat_T.assign(g.n, 0.0);
        f.qhat_inf.resize(g.n);
        for (int j = 0; j < g.n; ++j) {
            f.q0[j] = shapes[i].density_at(g.w[j]);
            if (f.areaT > 0.0) f.qhat_T[j] = f.areaT / (2.0 * pi) * g.lg[j];
            f.qhat_inf[j] = (-emT * f.q0[j] + f.qhat_T[j]) / (1.0 - emT);
        }

        const bool cone_here = static_cast<int>(i) == cone_factor;

        // ---- background volume density --------------------------------
        // (log m)_ss = sigma with m = Q/(w(1-w)); sigma/(w(1-w)) extends
        // smoothly to [0,1]:
        //   S(w) = (-emT s0(w) + sT)/(1-emT) - (1-beta)[cone] + 2,
        // where s0 = q0/(w(1-w)) and sT = areaT/(2*pi).
        const double sT = f.areaT / (2.0 * pi);
        auto S_at = [&](double w) {
            const double s0 = f.area0 / (2.0 * pi) *
                              (1.0 + shapes[i].bump * (2.0 * w - 1.0) * w * (1.0 - w));
            double v = (-emT * s0 + sT) / (1.0 - emT) + 2.0;
            if (cone_here) v -= (1.0 - beta);
            return v;
        };

        int refine = std::max(17, (8192 + g.n - 1) / g.n);
        if (refine % 2 == 0) ++refine;
        const Grid fine = Grid::uniform(refine * g.n);
        const int nf = fine.n;
        const double h = fine.dw;

        // slope(w) = (log m)_s = int_0^w S dw', cumulative midpoint
        Vec slope(nf);
        double acc = 0.0;
        for (int j = 0; j < nf; ++j) {
            const double sj = S_at(fine.w[j]);
            slope[j] = acc + 0.5 * h * sj;
            acc += h * sj;
        }
        // class arithmetic: the total of sigma over the cylinder must be the
        // degree balance -2 (slopes go +1 -> -1); equivalently
        // 2*pi*int (qhat_inf - (1-beta) r_h) ds = -4*pi.
        const double tau_total = acc - 2.0;  // int S dw - 2 = int sigma ds
        if (std::abs(2.0 * pi * tau_total + 4.0 * pi) > 1e-6)
            throw ConfigError("make_schedule: class arithmetic violated in background data");

        // log m = int slope ds = int slope/(w(1-w)) dw, cumulative midpoint
        Vec log_m_fine(nf);
        acc = 0.0;
        for (int j = 0; j < nf; ++j) {
            const double gj = slope[j] / fine.lg[j];
            log_m_fine[j] = acc + 0.5 * h * gj;
            acc += h * gj;
        }
        // normalize the mass: 2*pi * int m(w) dw = area0
        double mass = 0.0;
        for (int j = 0; j < nf; ++j) mass += std::exp(log_m_fine[j]);
        mass *= 2.0 * pi * h;
        const double shift = std::log(f.area0 / mass);
        for (int j = 0; j < nf; ++j) log_m_fine[j] += shift;

        // defining-equation residual, measured with the same flux stencil on
        // the refined grid: (log m)_ss - sigma
        {
            Vec d2 = d2s(fine, log_m_fine);
            double worst = 0.0;
            for (int j = 0; j < nf; ++j) {
                const double sigma = S_at(fine.w[j]) * fine.lg[j];
                worst = std::max(worst, std::abs(d2[j] - sigma));
            }
            f.bg_residual = worst;
        }

        f.bg_log_m.resize(g.n);
        f.bg_Q.resize(g.n);
        f.bg_logQ_ss.resize(g.n);
        for (int j = 0; j < g.n; ++j) {
            f.bg_log_m[j] = log_m_fine[refine * j + (refine - 1) / 2];
            f.bg_Q[j] = g.lg[j] * std::exp(f.bg_log_m[j]);
            f.bg_logQ_ss[j] = f.qhat_inf[j];
            if (cone_here) f.bg_logQ_ss[j] -= (1.0 - beta) * geom[i].curvature_density[j];
        }
    }
    return sched;
}

}  // namespace ckrf
