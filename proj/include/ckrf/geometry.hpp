#pragma once

// Model geometry of one P^1 factor and the curvature conventions used
// throughout:
//
//   * a metric is the density q(s) > 0 of omega = q ds ^ dtheta,
//   * i ddbar f has density f_ss,
//   * Ric(omega) has density -(log q)_ss,  R = -(log q)_ss / q,
//   * the round (Fubini-Study) density of area 2*pi is q = w(1-w), with R = 2
//     and integral of Ric equal to 4*pi,
//   * smooth densities obey (log q)_s -> +1 / -1 as s -> -inf / +inf.
//
// Scalar curvature is additive over product factors: R = sum_i R_i(s_i).

#include <cmath>
#include <numbers>

#include "ckrf/base.hpp"
#include "ckrf/grid.hpp"

namespace ckrf {

// Initial density profile: the round metric of the prescribed area, optionally
// perturbed by the odd cubic (2w-1)w(1-w).  The perturbation is odd about
// w = 1/2, so the area is exactly `area` for every bump amplitude; it breaks
// the reflection symmetry that would otherwise make whole scenarios exactly
// round and every discretization residual vanish to roundoff.
struct InitialShape {
    double area = 4.0 * std::numbers::pi;
    double bump = 0.0;

    double density_at(double w) const {
        const double lg = w * (1.0 - w);
        return area / (2.0 * std::numbers::pi) * lg * (1.0 + bump * (2.0 * w - 1.0) * lg);
    }
};

struct FactorGeometry {
    Grid grid;
    Vec fs_density;         // w(1-w): round density of area 2*pi
    bool has_cone = false;
    Vec section_norm;       // u = |s_Y|^2_h = w (cone factors; divisor at w=0)
    Vec curvature_density;  // iR_h density r_h = w(1-w), integral 2*pi
};

inline FactorGeometry build_factor(int n_nodes, bool has_cone) {
    if (n_nodes < 16) throw ConfigError("factor grid too coarse (need n >= 16)");
    FactorGeometry f;
    f.grid = Grid::uniform(n_nodes);
    f.fs_density = f.grid.lg;
    f.has_cone = has_cone;
    if (has_cone) {
        f.section_norm = f.grid.w;
        f.curvature_density = f.grid.lg;
    }
    return f;
}

// Ric density -(log q)_ss.  The pole logarithm is split off analytically:
// log q = log(w(1-w)) + log m with m smooth and positive, and
// (log(w(1-w)))_ss = -2 w(1-w) exactly, so only the smooth part is differenced.
inline Vec ricci_density(const Grid& g, const Vec& q) {
    Vec m(q.size());
    for (int j = 0; j < g.n; ++j) {
        if (!(q[j] > 0.0)) throw DegenerateMetricError("nonpositive metric density in curvature");
        m[j] = std::log(q[j] / g.lg[j]);
    }
    Vec out = d2s(g, m);
    for (int j = 0; j < g.n; ++j) out[j] = 2.0 * g.lg[j] - out[j];
    return out;
}

inline Vec scalar_curvature(const Grid& g, const Vec& q) {
    Vec r = ricci_density(g, q);
    for (int j = 0; j < g.n; ++j) r[j] /= q[j];
    return r;
}

}  // namespace ckrf
