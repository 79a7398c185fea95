#pragma once

// Forward-Euler finite-difference steps for the rescaled heat and
// Ginzburg-Landau equations on the symmetric grid -half..half.
//
// Storage convention: node i lives at index half + i, so values.front() is
// the left boundary and values.back() the right one. "Symmetric" mode steps
// the right half only, uses the one-sided center stencils d2 u_0 =
// 2(u_1 - u_0)/h^2 and du_0 = 0, and mirrors; this keeps even initial data
// even to the last bit. Asymmetric mode updates every interior node with the
// plain three-point stencils.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "config.hpp"

namespace blowup {

struct HeatState {
    std::vector<double> values; // size 2*half+1
    long n = 0;                 // steps taken
};

struct CGLState {
    std::vector<double> re, im; // each size 2*half+1
    long n = 0;
};

// i is the signed node index; pre: -half < i < half.
inline double central_diff(const std::vector<double>& values, double h, int i) {
    const int half = static_cast<int>(values.size() - 1) / 2;
    if (!(i > -half && i < half))
        throw std::out_of_range("central_diff: node index not interior");
    return (values[half + i + 1] - values[half + i - 1]) / (2.0 * h);
}

inline double second_diff(const std::vector<double>& values, double h, int i) {
    const int half = static_cast<int>(values.size() - 1) / 2;
    if (!(i > -half && i < half))
        throw std::out_of_range("second_diff: node index not interior");
    return (values[half + i + 1] - 2.0 * values[half + i] +
            values[half + i - 1]) / (h * h);
}

inline double signed_power(double u, double p) {
    return std::copysign(std::pow(std::abs(u), p), u);
}

inline double sup_norm(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) {
        const double a = std::abs(v);
        if (a > s) s = a;
    }
    return s;
}

inline double sup_norm(const HeatState& st) { return sup_norm(st.values); }

inline double sup_norm(const CGLState& st) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < st.re.size(); ++j) {
        const double m2 = st.re[j] * st.re[j] + st.im[j] * st.im[j];
        if (m2 > s2) s2 = m2;
    }
    return std::sqrt(s2);
}

namespace detail {

inline void check_finite(double sup, const char* what) {
    if (!std::isfinite(sup))
        throw NumericError(std::string(what) +
                           ": non-finite values after step");
}

// One heat step into `out`; boundary values set to psi. Returns sup |out|.
inline double heat_step_into(const std::vector<double>& u,
                             std::vector<double>& out,
                             double h, double tau, double p, double beta,
                             double q, double psi, bool symmetric) {
    const int half = static_cast<int>(u.size() - 1) / 2;
    const int c = half;
    const double ih2 = 1.0 / (h * h);
    const double i2h = 1.0 / (2.0 * h);
    double sup = std::abs(psi);
    auto absq = [&](double g) { return std::pow(std::abs(g), q); };
    if (symmetric) {
        // center: one-sided Laplacian, zero gradient
        {
            const double u0 = u[c];
            double v = u0 + tau * (2.0 * (u[c + 1] - u0) * ih2 +
                                   signed_power(u0, p));
            out[c] = v;
            const double a = std::abs(v);
            if (a > sup) sup = a;
        }
        for (int i = 1; i < half; ++i) {
            const double ui = u[c + i];
            const double lap = (u[c + i + 1] - 2.0 * ui + u[c + i - 1]) * ih2;
            const double grad = (u[c + i + 1] - u[c + i - 1]) * i2h;
            double v = ui + tau * (lap + signed_power(ui, p));
            if (beta != 0.0) v += tau * beta * absq(grad);
            out[c + i] = v;
            out[c - i] = v;
            const double a = std::abs(v);
            if (a > sup) sup = a;
        }
    } else {
        for (int i = -half + 1; i < half; ++i) {
            const double ui = u[c + i];
            const double lap = (u[c + i + 1] - 2.0 * ui + u[c + i - 1]) * ih2;
            const double grad = (u[c + i + 1] - u[c + i - 1]) * i2h;
            double v = ui + tau * (lap + signed_power(ui, p));
            if (beta != 0.0) v += tau * beta * absq(grad);
            out[c + i] = v;
            const double a = std::abs(v);
            if (a > sup) sup = a;
        }
    }
    out[0] = psi;
    out[2 * half] = psi;
    check_finite(sup, "heat_step");
    return sup;
}

// One CGL step into (ov, ow):
//   v' = v + tau [ d2 v - g d2 w + R (v - d w) ]
//   w' = w + tau [ g d2 v + d2 w + R (d v + w) ]
// with R = (v^2 + w^2)^{(p-1)/2}. Returns sup modulus of the output.
inline double cgl_step_into(const std::vector<double>& v,
                            const std::vector<double>& w,
                            std::vector<double>& ov, std::vector<double>& ow,
                            double h, double tau, double p, double gamma,
                            double delta, double psi_v, double psi_w,
                            bool symmetric) {
    const int half = static_cast<int>(v.size() - 1) / 2;
    const int c = half;
    const double ih2 = 1.0 / (h * h);
    const double pm = (p - 1.0) / 2.0;
    double sup2 = psi_v * psi_v + psi_w * psi_w;
    auto update = [&](int i, double lv, double lw) {
        const double vi = v[c + i], wi = w[c + i];
        const double R = std::pow(vi * vi + wi * wi, pm);
        const double nv = vi + tau * (lv - gamma * lw + R * (vi - delta * wi));
        const double nw = wi + tau * (gamma * lv + lw + R * (delta * vi + wi));
        ov[c + i] = nv;
        ow[c + i] = nw;
        const double m2 = nv * nv + nw * nw;
        if (m2 > sup2) sup2 = m2;
    };
    if (symmetric) {
        update(0, 2.0 * (v[c + 1] - v[c]) * ih2, 2.0 * (w[c + 1] - w[c]) * ih2);
        for (int i = 1; i < half; ++i) {
            update(i,
                   (v[c + i + 1] - 2.0 * v[c + i] + v[c + i - 1]) * ih2,
                   (w[c + i + 1] - 2.0 * w[c + i] + w[c + i - 1]) * ih2);
            ov[c - i] = ov[c + i];
            ow[c - i] = ow[c + i];
        }
    } else {
        for (int i = -half + 1; i < half; ++i)
            update(i,
                   (v[c + i + 1] - 2.0 * v[c + i] + v[c + i - 1]) * ih2,
                   (w[c + i + 1] - 2.0 * w[c + i] + w[c + i - 1]) * ih2);
    }
    ov[0] = psi_v;
    ov[2 * half] = psi_v;
    ow[0] = psi_w;
    ow[2 * half] = psi_w;
    const double sup = std::sqrt(sup2);
    check_finite(sup, "cgl_step");
    return sup;
}

} // namespace detail

// Single-state convenience wrappers (the rescaler uses the _into forms to
// recycle buffers).
inline HeatState heat_step(const HeatState& st, const RunConfig& cfg,
                           const DerivedConstants& dc, double psi) {
    HeatState next;
    next.values.resize(st.values.size());
    detail::heat_step_into(st.values, next.values, dc.h, dc.tau, cfg.p,
                           cfg.beta, dc.q_eff, psi, cfg.symmetric);
    next.n = st.n + 1;
    return next;
}

inline CGLState cgl_step(const CGLState& st, const RunConfig& cfg,
                         const DerivedConstants& dc, double psi_v,
                         double psi_w) {
    CGLState next;
    next.re.resize(st.re.size());
    next.im.resize(st.im.size());
    detail::cgl_step_into(st.re, st.im, next.re, next.im, dc.h, dc.tau, cfg.p,
                          cfg.gamma, cfg.delta, psi_v, psi_w, cfg.symmetric);
    next.n = st.n + 1;
    return next;
}

} // namespace blowup
