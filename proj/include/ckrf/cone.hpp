#pragma once

// Regularized cone potentials.  For cone angle 2*pi*beta along the divisor
// {w = 0} with section norm u = |s_Y|^2 = w, the smoothing at scale eps is
//
//   chi(u, eps^2) = beta * int_0^u ((r + eps^2)^beta - eps^{2 beta}) / r dr,
//   rho_eps = chi(|s_Y|^2, eps^2),
//
// an increasing, bounded potential with chi(u, 0) = u^beta and
// d chi/du = beta ((u+eps^2)^beta - eps^{2 beta}) / u.  The twist form is
//
//   theta_eps = (1-beta) i ddbar log(u + eps^2) + (1-beta) iR_h.
//
// theta_eps_density and ddbar_rho_density return the flux-form stencil applied
// to the closed-form potentials -- the same operator the flow and the monitor
// identities use, so degree integrals are exact and identity residuals stay
// second order uniformly in eps.  The analytic right sides are kept alongside
// as *_closed_form for cross-checks at resolved eps.

#include <cmath>
#include <stdexcept>

#include "ckrf/base.hpp"
#include "ckrf/geometry.hpp"
#include "ckrf/grid.hpp"

namespace ckrf {

namespace quad {

// Gauss7/Kronrod15 pair on [-1, 1].
inline constexpr double kx[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double kw[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double gw[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
    double resk = kw[7] * f(c);
    double resg = gw[3] * f(c);
    for (int i = 0; i < 7; ++i) {
        const double fv = f(c - hl * kx[i]) + f(c + hl * kx[i]);
        resk += kw[i] * fv;
        if (i % 2 == 1) resg += gw[i / 2] * fv;
    }
    value = resk * hl;
    err = std::abs(resk - resg) * hl;
}

template <class F>
inline double adaptive(const F& f, double a, double b, double rel_tol, int depth = 0) {
    double v, e;
    gk15(f, a, b, v, e);
    if (e <= rel_tol * std::abs(v) || e <= 1e-300 || depth >= 48) return v;
    const double c = 0.5 * (a + b);
    return adaptive(f, a, c, rel_tol, depth + 1) + adaptive(f, c, b, rel_tol, depth + 1);
}

}  // namespace quad

// (r + e)^beta - e^beta without cancellation for r << e.
inline double pow_shift_diff(double r, double e, double beta) {
    if (e == 0.0) return std::pow(r, beta);
    return std::pow(e, beta) * std::expm1(beta * std::log1p(r / e));
}

inline double chi(double u, double eps2, double beta) {
    if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("chi: beta outside (0, 1]");
    if (u < 0.0 || eps2 < 0.0) throw std::domain_error("chi: negative u or eps^2");
    if (u == 0.0) return 0.0;
    if (eps2 == 0.0) return std::pow(u, beta);

    // inner series on [0, r0], r0 <= eps2/10:
    // chi = beta e^beta sum_{k>=1} C(beta,k) (x/e)^k / k, geometric in x/e.
    const double r0 = std::min(u, 0.1 * eps2);
    double series = 0.0;
    {
        const double x = r0 / eps2;
        double coef = beta;  // C(beta, 1)
        double xk = x;
        for (int k = 1; k <= 64; ++k) {
            const double term = coef * xk / k;
            series += term;
            if (std::abs(term) < 1e-17 * std::abs(series)) break;
            coef *= (beta - k) / (k + 1);
            xk *= x;
        }
        series *= std::pow(eps2, beta);
    }
    double tail = 0.0;
    if (u > r0) {
        auto f = [&](double r) { return pow_shift_diff(r, eps2, beta) / r; };
        tail = quad::adaptive(f, r0, u, 1e-12);
    }
    return beta * (series + tail);
}

inline double chi_du(double u, double eps2, double beta) {
    if (!(beta > 0.0) || beta > 1.0) throw std::domain_error("chi_du: beta outside (0, 1]");
    if (u < 0.0 || eps2 < 0.0) throw std::domain_error("chi_du: negative u or eps^2");
    if (u == 0.0) {
        if (eps2 == 0.0) throw std::domain_error("chi_du: singular at u = eps = 0");
        return beta * beta * std::pow(eps2, beta - 1.0);
    }
    return beta * pow_shift_diff(u, eps2, beta) / u;
}

inline Vec rho_eps(const FactorGeometry& geom, double eps, double beta) {
    if (!geom.has_cone) throw ConfigError("rho_eps: factor carries no cone");
    if (!(eps >= 0.0)) throw ConfigError("rho_eps: eps must be nonnegative");
    Vec rho(geom.grid.n);
    for (int j = 0; j < geom.grid.n; ++j)
        rho[j] = chi(geom.section_norm[j], eps * eps, beta);
    return rho;
}

inline Vec log_section_eps(const FactorGeometry& geom, double eps) {
    if (!geom.has_cone) throw ConfigError("log_section_eps: factor carries no cone");
    Vec v(geom.grid.n);
    for (int j = 0; j < geom.grid.n; ++j) v[j] = std::log(geom.section_norm[j] + eps * eps);
    return v;
}

// i ddbar rho_eps density, flux-form stencil route (used by the flow).
inline Vec ddbar_rho_density(const FactorGeometry& geom, double eps, double beta) {
    return d2s(geom.grid, rho_eps(geom, eps, beta));
}

// analytic i ddbar rho_eps density:
// beta^2 w (1-w)^2 (w+eps^2)^{beta-1} - beta w (1-w) ((w+eps^2)^beta - eps^{2 beta})
inline Vec ddbar_rho_density_closed_form(const FactorGeometry& geom, double eps, double beta) {
    if (!geom.has_cone) throw ConfigError("ddbar_rho_density: factor carries no cone");
    const double e2 = eps * eps;
    Vec out(geom.grid.n);
    for (int j = 0; j < geom.grid.n; ++j) {
        const double w = geom.grid.w[j];
        out[j] = beta * beta * w * (1.0 - w) * (1.0 - w) * std::pow(w + e2, beta - 1.0) -
                 beta * w * (1.0 - w) * pow_shift_diff(w, e2, beta);
    }
    return out;
}

// theta_eps density, flux-form stencil route (used by the identities).
inline Vec theta_eps_density(const FactorGeometry& geom, double eps, double beta) {
    Vec out = d2s(geom.grid, log_section_eps(geom, eps));
    for (int j = 0; j < geom.grid.n; ++j)
        out[j] = (1.0 - beta) * (out[j] + geom.curvature_density[j]);
    return out;
}

// analytic theta_eps density via
// (log(w+eps^2))_ss = w(1-w) [ (1-2w)(w+eps^2) - w(1-w) ] / (w+eps^2)^2.
inline Vec theta_eps_density_closed_form(const FactorGeometry& geom, double eps, double beta) {
    if (!geom.has_cone) throw ConfigError("theta_eps_density: factor carries no cone");
    const double e2 = eps * eps;
    Vec out(geom.grid.n);
    for (int j = 0; j < geom.grid.n; ++j) {
        const double w = geom.grid.w[j];
        const double lg = geom.grid.lg[j];
        const double d2 = lg * ((1.0 - 2.0 * w) * (w + e2) - lg) / ((w + e2) * (w + e2));
        out[j] = (1.0 - beta) * (d2 + geom.curvature_density[j]);
    }
    return out;
}

}  // namespace ckrf
