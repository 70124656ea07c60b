#pragma once

// Reduced coordinates for S^1-invariant geometry on P^1.
//
// The cylinder coordinate is s = log|z|^2; everything is stored on the
// compactified variable w = e^s/(1+e^s) in (0,1), whose Jacobian is
// dw/ds = w(1-w).  Nodes sit at half-cell offsets w_j = (j+1/2)/n, so no node
// touches the poles w = 0,1 and the measure ds = dw/(w(1-w)) stays finite on
// every cell.

#include <cmath>
#include <cstddef>
#include <numbers>

#include "ckrf/base.hpp"

namespace ckrf {

struct Grid {
    int n = 0;
    double dw = 0.0;
    Vec w;        // nodes w_j = (j+1/2)/n
    Vec lg;       // w(1-w) at nodes
    Vec lg_face;  // w(1-w) at interior faces (j+1)/n, size n-1
    Vec ds;       // cell width in s: dw / (w_j(1-w_j))

    static Grid uniform(int n_nodes) {
        if (n_nodes < 2) throw ConfigError("grid needs at least 2 nodes");
        Grid g;
        g.n = n_nodes;
        g.dw = 1.0 / n_nodes;
        g.w.resize(n_nodes);
        g.lg.resize(n_nodes);
        g.ds.resize(n_nodes);
        g.lg_face.resize(n_nodes - 1);
        for (int j = 0; j < n_nodes; ++j) {
            g.w[j] = (j + 0.5) * g.dw;
            g.lg[j] = g.w[j] * (1.0 - g.w[j]);
            g.ds[j] = g.dw / g.lg[j];
        }
        for (int j = 0; j + 1 < n_nodes; ++j) {
            const double wf = (j + 1.0) * g.dw;
            g.lg_face[j] = wf * (1.0 - wf);
        }
        return g;
    }
};

// d/ds via the chain rule f_s = w(1-w) f_w; central differences inside,
// 3-point one-sided at the edge nodes (second order throughout).
inline void d1s_into(const Grid& g, const Vec& f, Vec& out) {
    const int n = g.n;
    out.resize(n);
    const double inv2 = 1.0 / (2.0 * g.dw);
    for (int j = 1; j + 1 < n; ++j) out[j] = g.lg[j] * (f[j + 1] - f[j - 1]) * inv2;
    out[0] = g.lg[0] * (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2;
    out[n - 1] = g.lg[n - 1] * (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv2;
}

inline Vec d1s(const Grid& g, const Vec& f) {
    Vec out;
    d1s_into(g, f, out);
    return out;
}

// d^2/ds^2 in flux form: f_ss = w(1-w) * d/dw( w(1-w) f_w ).  Fluxes live on
// faces and vanish identically at the pole faces (w(1-w) = 0 there), so
// integral_ds(d2s(f)) telescopes to zero exactly: discrete degree integrals
// (Gauss-Bonnet, class areas, twist mass) are exact, and the operator stays
// second order up to the edge nodes.
inline void d2s_into(const Grid& g, const Vec& f, Vec& out) {
    const int n = g.n;
    out.resize(n);
    const double inv = 1.0 / g.dw;
    double flux_lo = 0.0;  // zero flux at the w=0 face
    for (int j = 0; j < n; ++j) {
        const double flux_hi = (j + 1 < n) ? g.lg_face[j] * (f[j + 1] - f[j]) * inv : 0.0;
        out[j] = g.lg[j] * (flux_hi - flux_lo) * inv;
        flux_lo = flux_hi;
    }
}

inline Vec d2s(const Grid& g, const Vec& f) {
    Vec out;
    d2s_into(g, f, out);
    return out;
}

// Midpoint quadrature of f ds = (f / w(1-w)) dw.
inline double integral_ds(const Grid& g, const Vec& f) {
    double acc = 0.0;
    for (int j = 0; j < g.n; ++j) acc += f[j] / g.lg[j];
    return acc * g.dw;
}

// Area of the metric omega = q ds ^ dtheta (fiber angle of period 2*pi).
inline double area(const Grid& g, const Vec& q) {
    return 2.0 * std::numbers::pi * integral_ds(g, q);
}

}  // namespace ckrf
