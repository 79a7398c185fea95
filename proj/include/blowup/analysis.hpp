#pragma once

// Post-processing of a completed multilevel run: blow-up time and rate,
// rescaled-profile comparisons against the closed-form limits, and the
// absorption-coefficient estimate built from the rescale-interval geometry.
//
// Times beyond roughly level 25 cannot be formed as T - t_k by direct
// subtraction (the difference falls below one ulp of T), so every helper
// here works with the factored form
//   T - t_k = lambda^{2(k+1)} * B_k,
//   B_k = sum_{j=k+1}^{K} lambda^{2(j-k-1)} ts_j + lambda^{2(K-k)} ts_K/(1-lambda^2)
// which extends the observed tau*-series past level K by its geometric tail.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "rescaler.hpp"

namespace blowup {

namespace detail {

inline double tail_bracket(const std::vector<double>& ts, double lambda,
                           int k) {
    const int K = static_cast<int>(ts.size()) - 1;
    if (k < 0 || k > K)
        throw std::invalid_argument("tail_bracket: level out of range");
    const double lam2 = lambda * lambda;
    double s = 0.0;
    for (int j = K; j >= k + 1; --j) s = s * lam2 + ts[j];
    s += std::pow(lam2, K - k) * ts[K] / (1.0 - lam2);
    return s;
}

} // namespace detail

// ln(T - t_k) for the tail-extended blow-up time.
inline double log_T_minus_t(const std::vector<double>& tau_stars,
                            double lambda, int k) {
    return 2.0 * (k + 1) * std::log(lambda) +
           std::log(detail::tail_bracket(tau_stars, lambda, k));
}

// lambda^{-2k} (T - t_k); stays O(tau*) for every k.
inline double scaled_T_minus_t(const std::vector<double>& tau_stars,
                               double lambda, int k) {
    const double lam2 = lambda * lambda;
    return lam2 * detail::tail_bracket(tau_stars, lambda, k);
}

inline double tau_star_limit(const RunConfig& cfg) {
    return derive(cfg).tau_star_limit;
}

struct RateSeries {
    std::vector<double> t;           // t_k (partial sums of the series)
    std::vector<double> T_minus_t;
    std::vector<double> log_T_minus_t;
    std::vector<double> log_sup;     // ln of the physical sup at t_k
};

inline RateSeries build_rate_series(const LevelStack& st) {
    RateSeries rs;
    const int K = static_cast<int>(st.tau_stars.size()) - 1;
    const double lambda = st.dc.lambda;
    double t = 0.0, w = 1.0;
    for (int k = 0; k <= K; ++k) {
        t += w * st.tau_stars[k];
        w *= lambda * lambda;
        const double lg = log_T_minus_t(st.tau_stars, lambda, k);
        rs.t.push_back(t);
        rs.T_minus_t.push_back(std::exp(lg));
        rs.log_T_minus_t.push_back(lg);
        rs.log_sup.push_back(k * std::log(st.dc.inv_amp) + std::log(st.dc.M));
    }
    return rs;
}

struct RateFit {
    double slope = 0.0;     // d ln(sup) / d ln(T - t), negative
    double magnitude = 0.0; // -slope; the blow-up rate exponent
    int samples_used = 0;
};

// Least-squares slope over the last half of the series. Requires at least
// 10 usable samples spanning at least three decades of T - t.
inline RateFit blowup_rate_fit(const RateSeries& rs) {
    const int n = static_cast<int>(rs.t.size());
    const int start = n / 2;
    const int m = n - start;
    if (m < 10)
        throw std::invalid_argument("blowup_rate_fit: need >= 10 samples");
    const auto [lo, hi] = std::minmax_element(rs.log_T_minus_t.begin() + start,
                                              rs.log_T_minus_t.end());
    if (*hi - *lo < 3.0 * std::log(10.0))
        throw std::invalid_argument(
            "blowup_rate_fit: series spans fewer than three decades");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = start; i < n; ++i) {
        const double x = rs.log_T_minus_t[i], y = rs.log_sup[i];
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    RateFit fit;
    fit.samples_used = m;
    fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    fit.magnitude = -fit.slope;
    return fit;
}

// Closed-form limit profile in the similarity variable z (crossing contour
// at z = +-lambda maps to alpha M).
inline double predicted_profile_heat(double z, const RunConfig& cfg,
                                     const DerivedConstants& dc) {
    const double c1 = (std::pow(cfg.alpha, 1.0 - cfg.p) - 1.0) /
                      (dc.lambda * dc.lambda);
    return dc.M * std::pow(1.0 + c1 * z * z, -1.0 / (cfg.p - 1.0));
}

// Phase shape relative to the center value; the absolute offset is fitted.
inline double predicted_phase_shape(double z, const RunConfig& cfg,
                                    const DerivedConstants& dc) {
    const double c1 = (std::pow(cfg.alpha, 1.0 - cfg.p) - 1.0) /
                      (dc.lambda * dc.lambda);
    return -cfg.delta / (cfg.p - 1.0) * std::log(1.0 + c1 * z * z);
}

namespace detail {

// Clamped linear interpolation of a profile at fractional node q.
inline double lerp_profile(const std::vector<double>& prof, int half,
                           double q) {
    if (q < -half) q = -half;
    if (q > half) q = half;
    double f = std::floor(q);
    int i0 = static_cast<int>(f);
    if (i0 > half - 1) { i0 = half - 1; f = i0; }
    const double fr = q - f;
    return prof[half + i0] + fr * (prof[half + i0 + 1] - prof[half + i0]);
}

inline double profile_value(const Level& L, bool cgl, double q) {
    const double v = lerp_profile(L.profile, L.half, q);
    if (!cgl) return v;
    const double w = lerp_profile(L.profile_im, L.half, q);
    return std::hypot(v, w);
}

} // namespace detail

// Sup over 2001 uniform z in [-1,1] of |computed - predicted| where computed
// is the (modulus of the) level-k crossing profile sampled at node z*half_k.
inline double profile_error_table(const LevelStack& st, int k) {
    if (k < 1 || k >= static_cast<int>(st.levels.size()) ||
        !st.levels[k].crossed)
        throw std::invalid_argument("profile_error_table: invalid level");
    const Level& L = st.levels[k];
    const bool cgl = st.cfg.equation == EquationKind::CGL;
    double sup = 0.0;
    const int N = 2000;
    for (int j = 0; j <= N; ++j) {
        const double z = -1.0 + 2.0 * j / N;
        const double comp = detail::profile_value(L, cgl, z * L.half);
        const double pred = predicted_profile_heat(z, st.cfg, st.dc);
        sup = std::max(sup, std::abs(comp - pred));
    }
    return sup;
}

// Unwrap phases outward from the center index, then return the mean offset
// against the given shape. Throws on non-finite phases or ambiguous jumps.
inline double fit_phase_offset(const std::vector<double>& phase_raw,
                               const std::vector<double>& shape) {
    const int n = static_cast<int>(phase_raw.size());
    if (n == 0 || shape.size() != phase_raw.size())
        throw std::invalid_argument("fit_phase_offset: size mismatch");
    std::vector<double> ph(phase_raw);
    const int ci = n / 2;
    auto unwrap_from = [&](int from, int step) {
        for (int i = from; i >= 0 && i < n; i += step) {
            double d = ph[i] - ph[i - step];
            while (d > M_PI) { ph[i] -= 2.0 * M_PI; d -= 2.0 * M_PI; }
            while (d <= -M_PI) { ph[i] += 2.0 * M_PI; d += 2.0 * M_PI; }
            if (!std::isfinite(d) || std::abs(d) > 0.99 * M_PI)
                throw std::runtime_error("fit_phase_offset: unwrap failure");
        }
    };
    unwrap_from(ci + 1, +1);
    unwrap_from(ci - 1, -1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += ph[i] - shape[i];
    return acc / n;
}

struct ProfileReport {
    int k = 0;
    std::vector<double> z;
    std::vector<double> computed;        // value (heat) or modulus (CGL)
    std::vector<double> predicted;
    std::vector<double> phase;           // CGL: unwrapped sampled phase
    std::vector<double> phase_predicted; // CGL: theta + shape
    double theta = 0.0;
    double error_sup = 0.0;
    double phase_error_sup = 0.0;
};

inline ProfileReport rescaled_profile(const LevelStack& st, int k,
                                      const std::vector<double>& zs) {
    if (k < 1 || k >= static_cast<int>(st.levels.size()) ||
        !st.levels[k].crossed)
        throw std::invalid_argument("rescaled_profile: invalid level");
    const Level& L = st.levels[k];
    const bool cgl = st.cfg.equation == EquationKind::CGL;
    ProfileReport rep;
    rep.k = k;
    rep.z = zs;
    for (double z : zs) {
        const double q = z * L.half;
        rep.computed.push_back(detail::profile_value(L, cgl, q));
        rep.predicted.push_back(predicted_profile_heat(z, st.cfg, st.dc));
        if (cgl) {
            const double v = detail::lerp_profile(L.profile, L.half, q);
            const double w = detail::lerp_profile(L.profile_im, L.half, q);
            rep.phase.push_back(std::atan2(w, v));
        }
    }
    for (std::size_t i = 0; i < zs.size(); ++i)
        rep.error_sup = std::max(rep.error_sup,
                                 std::abs(rep.computed[i] - rep.predicted[i]));
    if (cgl) {
        std::vector<double> shape;
        for (double z : zs)
            shape.push_back(predicted_phase_shape(z, st.cfg, st.dc));
        rep.theta = fit_phase_offset(rep.phase, shape);
        // re-express the sampled phase in its unwrapped form for output
        std::vector<double> ph(rep.phase);
        const int ci = static_cast<int>(ph.size()) / 2;
        for (int dir : {+1, -1})
            for (int i = ci + dir; i >= 0 && i < static_cast<int>(ph.size());
                 i += dir) {
                double d = ph[i] - ph[i - dir];
                while (d > M_PI) { ph[i] -= 2.0 * M_PI; d -= 2.0 * M_PI; }
                while (d <= -M_PI) { ph[i] += 2.0 * M_PI; d += 2.0 * M_PI; }
            }
        rep.phase = ph;
        for (std::size_t i = 0; i < zs.size(); ++i) {
            rep.phase_predicted.push_back(rep.theta + shape[i]);
            rep.phase_error_sup =
                std::max(rep.phase_error_sup,
                         std::abs(ph[i] - rep.phase_predicted[i]));
        }
    }
    return rep;
}

inline double profile_error(const ProfileReport& rep) { return rep.error_sup; }

struct PhaseDriftReport {
    double measured_step = 0.0;   // mean fitted-offset increment per level
    double predicted_lambda = 0.0; // 2 delta ln(lambda_inv) / (p-1)
    double predicted_alpha = 0.0;  // 2 delta ln(1/alpha) / (p-1)
    std::string best;              // variant with the smaller residual
};

inline PhaseDriftReport measure_phase_drift(const LevelStack& st, int k_lo,
                                            int k_hi) {
    if (st.cfg.equation != EquationKind::CGL)
        throw std::invalid_argument("measure_phase_drift: CGL runs only");
    if (k_lo < 1 || k_hi <= k_lo ||
        k_hi >= static_cast<int>(st.levels.size()))
        throw std::invalid_argument("measure_phase_drift: bad level range");
    std::vector<double> zs;
    for (int j = 0; j <= 400; ++j) zs.push_back(-0.9 + 1.8 * j / 400);
    std::vector<double> theta;
    for (int k = k_lo; k <= k_hi; ++k)
        theta.push_back(rescaled_profile(st, k, zs).theta);
    double acc = 0.0;
    for (std::size_t i = 1; i < theta.size(); ++i) {
        double d = theta[i] - theta[i - 1];
        while (d > M_PI) d -= 2.0 * M_PI;
        while (d <= -M_PI) d += 2.0 * M_PI;
        acc += d;
    }
    PhaseDriftReport rep;
    rep.measured_step = acc / (theta.size() - 1);
    rep.predicted_lambda = 2.0 * st.cfg.delta *
                           std::log(static_cast<double>(st.cfg.lambda_inv)) /
                           (st.cfg.p - 1.0);
    rep.predicted_alpha = 2.0 * st.cfg.delta * std::log(1.0 / st.cfg.alpha) /
                          (st.cfg.p - 1.0);
    rep.best = std::abs(rep.measured_step - rep.predicted_lambda) <=
                       std::abs(rep.measured_step - rep.predicted_alpha)
                   ? "lambda"
                   : "alpha";
    return rep;
}

// zeta_K = (p-1) ( kappa u^{1-p} - lambda^{-2K}(T - t_K) ) with u the level-K
// crossing value at the parent interval node i_plus_{K-1}; its limit is
// M^{1-p} ((p-1) kappa alpha^{1-p} - 1).
inline double zeta_limit(const RunConfig& cfg) {
    const DerivedConstants dc = derive(cfg);
    return std::pow(dc.M, 1.0 - cfg.p) *
           ((cfg.p - 1.0) * dc.kappa * std::pow(cfg.alpha, 1.0 - cfg.p) - 1.0);
}

inline double zeta_estimate(const LevelStack& st, int K) {
    if (K < 1 || K >= static_cast<int>(st.levels.size()) ||
        !st.levels[K].crossed)
        throw std::invalid_argument("zeta_estimate: invalid level");
    const Level& L = st.levels[K];
    const int anchor = st.levels[K - 1].i_plus;
    const bool cgl = st.cfg.equation == EquationKind::CGL;
    const double u = detail::profile_value(L, cgl,
                                           static_cast<double>(anchor));
    const double p = st.cfg.p;
    return (p - 1.0) * (st.dc.kappa * std::pow(u, 1.0 - p) -
                        scaled_T_minus_t(st.tau_stars, st.dc.lambda, K));
}

struct BCoefficientReport {
    double xi_plus_K = 0.0;     // i_plus_{K-1} * h on the level's own grid
    double xi_plus_calib = 0.0;
    double zeta_K = 0.0;
    double zeta_lim = 0.0;
    double b_estimate = 0.0;
    std::optional<double> b_theory;
    bool near_singular = false;
    bool settled = false;       // s_k / xi_+^2 moved < 1% over 10 levels
    double settle_ratio = 0.0;  // relative change actually observed
};

// Estimate b from the interval geometry of `varied` against the zero-drift
// calibration run `calib` (same p, I, K). Requires K >= 15 so the
// settledness monitor has room.
inline BCoefficientReport estimate_b(const LevelStack& varied,
                                     const LevelStack& calib, int K) {
    if (K < 15)
        throw std::invalid_argument("estimate_b: need K >= 15");
    if (K >= static_cast<int>(varied.levels.size()) ||
        K >= static_cast<int>(calib.levels.size()))
        throw std::invalid_argument("estimate_b: K beyond run depth");
    if (!calib.dc.b_theory)
        throw std::invalid_argument("estimate_b: calibration run has no b");
    BCoefficientReport rep;
    rep.xi_plus_K = varied.levels[K - 1].i_plus * varied.dc.h;
    rep.xi_plus_calib = calib.levels[K - 1].i_plus * calib.dc.h;
    const double r = rep.xi_plus_calib / rep.xi_plus_K;
    rep.b_estimate = *calib.dc.b_theory * r * r;
    rep.b_theory = varied.dc.b_theory;
    rep.near_singular = varied.dc.near_singular;
    rep.zeta_K = zeta_estimate(varied, K);
    rep.zeta_lim = zeta_limit(varied.cfg);
    auto ratio = [&](int k) {
        const double xi = varied.levels[k - 1].i_plus * varied.dc.h;
        const double s = -log_T_minus_t(varied.tau_stars, varied.dc.lambda, k);
        return s / (xi * xi);
    };
    const double rK = ratio(K), rPrev = ratio(K - 10);
    rep.settle_ratio = std::abs(rK / rPrev - 1.0);
    rep.settled = rep.settle_ratio < 0.01;
    return rep;
}

struct ConvergenceReport {
    int base_I = 0;
    double t_end = 0.0;
    double E1 = 0.0; // coarse vs finest on coarse nodes
    double E2 = 0.0; // middle vs finest on middle nodes
    double order = 0.0; // log2(E1/E2 - 1)
};

// Triple-grid self-convergence on a single level: evolve I, 2I, 4I to the
// same t_end (half the coarse run's crossing time, rounded to its tau grid)
// and compare on shared nodes.
inline ConvergenceReport convergence_study(RunConfig cfg, int base_I) {
    if (cfg.equation != EquationKind::Heat)
        throw std::invalid_argument("convergence_study: heat runs only");
    ConvergenceReport rep;
    rep.base_I = base_I;

    RunConfig c0 = cfg;
    c0.I = base_I;
    c0.K_max = 0;
    c0.retain_history = false;
    LevelStack probe(c0);
    if (probe.run().blew_up == false)
        throw std::invalid_argument("convergence_study: no crossing");
    const double tau0 = probe.dc.tau;
    const long n_base = static_cast<long>(
        std::floor(probe.tau_stars_raw[0] / 2.0 / tau0));
    if (n_base < 1)
        throw std::invalid_argument(
            "convergence_study: grid too coarse for the comparison window");
    rep.t_end = n_base * tau0;

    std::vector<std::vector<double>> finals;
    for (int mult : {1, 2, 4}) {
        RunConfig ci = cfg;
        ci.I = base_I * mult;
        ci.K_max = 0;
        ci.retain_history = false;
        const DerivedConstants dci = derive(ci);
        std::vector<double> u = default_initial_data(ci);
        std::vector<double> tmp(u.size());
        const long steps = n_base * mult * mult;
        for (long s = 0; s < steps; ++s) {
            const double sup = detail::heat_step_into(
                u, tmp, dci.h, dci.tau, ci.p, ci.beta, dci.q_eff, 0.0,
                ci.symmetric);
            std::swap(u, tmp);
            if (sup >= dci.M)
                throw std::invalid_argument(
                    "convergence_study: crossing inside the window");
        }
        finals.push_back(std::move(u));
    }
    auto sup_diff = [&](const std::vector<double>& coarse, int stride) {
        const int hc = static_cast<int>(coarse.size() - 1) / 2;
        const int hf = static_cast<int>(finals[2].size() - 1) / 2;
        double s = 0.0;
        for (int i = -hc; i <= hc; ++i)
            s = std::max(s, std::abs(coarse[hc + i] -
                                     finals[2][hf + stride * i]));
        return s;
    };
    rep.E1 = sup_diff(finals[0], 4);
    rep.E2 = sup_diff(finals[1], 2);
    if (!(rep.E2 > 0.0) || !(rep.E1 / rep.E2 > 1.0))
        throw std::invalid_argument(
            "convergence_study: error ratio unusable");
    rep.order = std::log2(rep.E1 / rep.E2 - 1.0);
    return rep;
}

} // namespace blowup
