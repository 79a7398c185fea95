#pragma once

// Multilevel self-similar rescaling driver.
//
// Level k solves the same equation on its own grid with the same h and tau;
// its node i sits at physical coordinate lambda^k * i * h. A level runs until
// its sup-norm first reaches M; the crossing instant tau*_k is located by
// linear interpolation inside the crossing step, the interpolated slice is
// the crossing profile, and the next level starts from the amplitude-scaled,
// index-dilated section of that profile over the interval where the profile
// still exceeds alpha*M.
//
// Coarse levels are advanced lazily: a parent is stepped only when its child
// needs a boundary value beyond the parent's current time sheet, and right
// before each such step the parent's overlap band is refreshed from the
// child. Boundary values for level k come from the parent's solution at the
// fixed node i_plus of level k-1 (the contour the child grid was cut from).

#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "config.hpp"
#include "interp.hpp"
#include "stepper.hpp"

namespace blowup {

// Rescale interval collapsed to fewer than one interior node.
struct DegenerateInterval : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Level {
    int k = 0;
    int half = 0;                        // nodes per side
    std::vector<double> prev, cur;       // slices at (n-1)*tau and n*tau
    std::vector<double> prev_im, cur_im; // CGL imaginary parts
    long n = 0;

    bool crossed = false;
    long steps_at_crossing = 0;          // n_k: first step with sup >= M
    double crossing_s = 0.0;             // fraction inside the crossing step
    double tau_star_raw = 0.0;           // (n_k - 1 + s) * tau
    double tau_star = 0.0;               // reported: raw + tau
    int i_plus = 0, i_minus = 0;         // rescale-interval node indices
    std::vector<double> profile, profile_im; // slice at tau_star_raw

    std::vector<std::vector<double>> history, history_im; // optional slices
};

struct BlowupOutcome {
    bool blew_up = false;
    double T_htau = 0.0;   // numerical blow-up time (only when blew_up)
    int K_reached = -1;    // deepest level that crossed
    int stall_level = -1;  // level that exhausted the step cap, if any
};

inline double blowup_time(const std::vector<double>& tau_stars,
                          double lambda) {
    double T = 0.0, w = 1.0;
    for (double ts : tau_stars) {
        T += w * ts;
        w *= lambda * lambda;
    }
    return T;
}

class LevelStack {
public:
    RunConfig cfg;
    DerivedConstants dc;
    std::deque<Level> levels;            // stable references across spawns
    std::vector<double> tau_stars;       // reported series
    std::vector<double> tau_stars_raw;
    std::vector<double> mu;              // mu[k] = sum_{j<=k} lambda^{2j} raw_j
    std::function<void(const Level&)> on_level; // called after each crossing

    explicit LevelStack(RunConfig c) : cfg(std::move(c)), dc(derive(cfg)) {
        Level root;
        root.k = 0;
        root.half = dc.half;
        root.cur = default_initial_data(cfg);
        root.prev = root.cur;
        if (cfg.equation == EquationKind::CGL) {
            root.cur_im.assign(root.cur.size(), 0.0);
            root.prev_im = root.cur_im;
        }
        if (cfg.retain_history) record_history(root);
        levels.push_back(std::move(root));
    }

    bool is_cgl() const { return cfg.equation == EquationKind::CGL; }

    // Advance level k by one step; returns the new sup norm (modulus sup for
    // CGL). Boundary values for k >= 1 are interpolated from the parent,
    // advancing it on demand first.
    double advance_level(int k) {
        Level& L = levels[k];
        double psi_v = 0.0, psi_w = 0.0;
        if (k > 0) {
            const auto psi = boundary_feed(k, (L.n + 1) * dc.tau);
            psi_v = psi.first;
            psi_w = psi.second;
        }
        return step_level(L, psi_v, psi_w);
    }

    // Boundary value for level k at its local time t_child, from the parent
    // solution at node i_plus of level k-1 and parent time
    // tau*_{k-1,raw} + lambda^2 t_child.
    std::pair<double, double> boundary_feed(int k, double t_child) {
        Level& P = levels[k - 1];
        const double lam2 = dc.lambda * dc.lambda;
        const double t_par = P.tau_star_raw + lam2 * t_child;
        demand_advance(k - 1, t_par);
        const double t_lo = (P.n - 1) * dc.tau;
        // demand_advance guarantees coverage up to a 1e-9*tau slack; clamp
        // into the sheet so that slack cannot trip the range check.
        const double t_cl = std::min(std::max(t_par, t_lo), t_lo + dc.tau);
        const double x = P.i_plus * dc.h;
        SpaceTimeSheet sheet{&P.prev, &P.cur, dc.h, t_lo, dc.tau};
        const double v = interp_space_time(sheet, x, t_cl);
        if (!is_cgl()) return {dc.amp * v, 0.0};
        SpaceTimeSheet sheet_im{&P.prev_im, &P.cur_im, dc.h, t_lo, dc.tau};
        const double w = interp_space_time(sheet_im, x, t_cl);
        return {dc.amp * v, dc.amp * w};
    }

    // Overwrite the open overlap band (i_minus, i_plus) of level k with the
    // amplitude-unscaled child values at the coinciding nodes.
    void update_coarse(int k) {
        Level& C = levels[k];
        Level& F = levels[k + 1];
        const int cc = C.half, fc = F.half;
        for (int j = C.i_minus + 1; j <= C.i_plus - 1; ++j) {
            C.cur[cc + j] = dc.inv_amp * F.cur[fc + cfg.lambda_inv * j];
            if (is_cgl())
                C.cur_im[cc + j] =
                    dc.inv_amp * F.cur_im[fc + cfg.lambda_inv * j];
        }
    }

    // Locate tau*_k inside the first step whose sup reached M, build the
    // interpolated crossing profile, and record both time conventions.
    void find_crossing_time(int k) {
        Level& L = levels[k];
        const double M = dc.M;
        double best_s = 2.0;
        bool found = false;
        auto consider = [&](int i) {
            const int idx = L.half + i;
            double s;
            if (is_cgl()) {
                const double mp = std::hypot(L.prev[idx], L.prev_im[idx]);
                const double mc = std::hypot(L.cur[idx], L.cur_im[idx]);
                if (!(mc >= M)) return;
                s = (M - mp) / (mc - mp);
            } else {
                const double up = L.prev[idx], uc = L.cur[idx];
                if (uc >= M) s = (M - up) / (uc - up);
                else if (uc <= -M) s = (-M - up) / (uc - up);
                else return;
            }
            if (s < 0.0) s = 0.0;
            if (s <= 1.0 && s < best_s) {
                best_s = s;
                found = true;
            }
        };
        consider(0);
        for (int i = 1; i <= L.half && best_s > 0.0; ++i) {
            consider(i);
            consider(-i);
        }
        if (!found)
            throw std::logic_error("find_crossing_time: sup below threshold");
        const double s = best_s;
        L.crossed = true;
        L.steps_at_crossing = L.n;
        L.crossing_s = s;
        L.tau_star_raw = (static_cast<double>(L.n) - 1.0 + s) * dc.tau;
        L.tau_star = L.tau_star_raw + dc.tau;
        L.profile.resize(L.cur.size());
        for (std::size_t j = 0; j < L.cur.size(); ++j)
            L.profile[j] = L.prev[j] + s * (L.cur[j] - L.prev[j]);
        if (is_cgl()) {
            L.profile_im.resize(L.cur.size());
            for (std::size_t j = 0; j < L.cur.size(); ++j)
                L.profile_im[j] = L.prev_im[j] + s * (L.cur_im[j] - L.prev_im[j]);
        }
    }

    // Outermost bracket |P[i]| >= alpha M > |P[i+1]| on each side of the
    // crossing profile. Throws DegenerateInterval when fewer than one
    // interior node would remain.
    void find_rescale_interval(int k) {
        Level& L = levels[k];
        const double aM = dc.alpha_M;
        const int c = L.half;
        auto mag = [&](int i) {
            return is_cgl() ? std::hypot(L.profile[c + i], L.profile_im[c + i])
                            : L.profile[c + i];
        };
        int ip = -1;
        for (int i = L.half - 1; i >= 0; --i) {
            if (mag(i) >= aM && mag(i + 1) < aM) { ip = i; break; }
        }
        int im = 1;
        for (int i = -(L.half - 1); i <= 0; ++i) {
            if (mag(i) >= aM && mag(i - 1) < aM) { im = i; break; }
        }
        if (ip < 1 || im > -1)
            throw DegenerateInterval(
                "find_rescale_interval: interval collapsed at level " +
                std::to_string(k));
        L.i_plus = ip;
        L.i_minus = im;
    }

    // Child grid: lambda_inv * i_plus nodes per side, initial data
    // amp * profile(lambda * xi) by exact-node or linear interpolation.
    Level spawn_level(int k) const {
        const Level& P = levels[k];
        if (!P.crossed) throw std::logic_error("spawn_level: no crossing yet");
        if (P.i_minus != -P.i_plus)
            throw std::logic_error(
                "spawn_level: asymmetric rescale interval unsupported");
        Level child;
        child.k = P.k + 1;
        child.half = cfg.lambda_inv * P.i_plus;
        const int cn = 2 * child.half + 1;
        child.cur.resize(cn);
        if (is_cgl()) child.cur_im.resize(cn);
        const int pc = P.half;
        for (int i = -child.half; i <= child.half; ++i) {
            // parent fractional node i/lambda_inv, kept exact on integers
            int j = i >= 0 ? i / cfg.lambda_inv
                           : -(( -i + cfg.lambda_inv - 1) / cfg.lambda_inv);
            int r = i - j * cfg.lambda_inv; // 0 <= r < lambda_inv
            const double fr = static_cast<double>(r) / cfg.lambda_inv;
            auto sample = [&](const std::vector<double>& src) {
                const double a = src[pc + j];
                return r == 0 ? dc.amp * a
                              : dc.amp * (a + fr * (src[pc + j + 1] - a));
            };
            child.cur[child.half + i] = sample(P.profile);
            if (is_cgl())
                child.cur_im[child.half + i] = sample(P.profile_im);
        }
        child.prev = child.cur;
        if (is_cgl()) child.prev_im = child.cur_im;
        if (cfg.retain_history) {
            // history[m] must mean local time m*tau on every level
            child.history.push_back(child.cur);
            if (is_cgl()) child.history_im.push_back(child.cur_im);
        }
        return child;
    }

    // Step the deepest level once (coarser levels follow on demand).
    double advance_hierarchy() {
        return advance_level(static_cast<int>(levels.size()) - 1);
    }

    // Full driver: run levels 0..K_max each to its crossing.
    BlowupOutcome run() {
        BlowupOutcome out;
        for (int k = 0; k <= cfg.K_max; ++k) {
            while (true) {
                if (levels[k].n >= dc.step_cap_eff) {
                    out.blew_up = false;
                    out.K_reached = k - 1;
                    out.stall_level = k;
                    return out;
                }
                if (advance_level(k) >= dc.M) break;
            }
            find_crossing_time(k);
            find_rescale_interval(k);
            for (int j = k; j >= 1; --j) update_coarse(j - 1);
            tau_stars.push_back(levels[k].tau_star);
            tau_stars_raw.push_back(levels[k].tau_star_raw);
            const double lam2k = std::pow(dc.lambda, 2.0 * k);
            mu.push_back((mu.empty() ? 0.0 : mu.back()) +
                         lam2k * levels[k].tau_star_raw);
            if (on_level) on_level(levels[k]);
            if (k < cfg.K_max) levels.push_back(spawn_level(k));
        }
        out.blew_up = true;
        out.K_reached = cfg.K_max;
        out.T_htau = blowup_time(tau_stars, dc.lambda);
        return out;
    }

private:
    void record_history(Level& L) {
        L.history.push_back(L.cur);
        if (is_cgl()) L.history_im.push_back(L.cur_im);
    }

    double step_level(Level& L, double psi_v, double psi_w) {
        double sup;
        if (!is_cgl()) {
            sup = detail::heat_step_into(L.cur, L.prev, dc.h, dc.tau, cfg.p,
                                         cfg.beta, dc.q_eff, psi_v,
                                         cfg.symmetric);
            std::swap(L.prev, L.cur);
        } else {
            sup = detail::cgl_step_into(L.cur, L.cur_im, L.prev, L.prev_im,
                                        dc.h, dc.tau, cfg.p, cfg.gamma,
                                        cfg.delta, psi_v, psi_w,
                                        cfg.symmetric);
            std::swap(L.prev, L.cur);
            std::swap(L.prev_im, L.cur_im);
        }
        ++L.n;
        if (cfg.retain_history) record_history(L);
        return sup;
    }

    // Step level k until its sheet top reaches t (within a tau-relative
    // tolerance), refreshing its overlap band from the child before each
    // step so the annulus diffuses from current interior data.
    void demand_advance(int k, double t) {
        const double eps = 1e-9 * dc.tau;
        long guard = 0;
        while (levels[k].n * dc.tau < t - eps) {
            if (k + 1 < static_cast<int>(levels.size()) && levels[k].crossed)
                update_coarse(k);
            advance_level(k);
            if (++guard > dc.step_cap_eff)
                throw std::logic_error("demand_advance: runaway feed loop");
        }
    }
};

struct RunResult {
    LevelStack stack;
    BlowupOutcome outcome;
};

inline RunResult run(const RunConfig& cfg,
                     std::function<void(const Level&)> on_level = {}) {
    RunResult r{LevelStack(cfg), BlowupOutcome{}};
    r.stack.on_level = std::move(on_level);
    r.outcome = r.stack.run();
    return r;
}

// Evaluate the glued physical-variables solution at (x, t); requires
// retain_history. Finds the level window containing t, then walks outward
// to coarser levels when x falls outside a level's (zoomed) domain.
inline double composite_eval(const LevelStack& st, double x, double t) {
    if (!st.cfg.retain_history)
        throw std::logic_error("composite_eval: run without retain_history");
    if (st.mu.empty() || t < 0.0 || t > st.mu.back())
        throw std::out_of_range("composite_eval: time outside coverage");
    int q = 0;
    while (st.mu[q] < t) ++q;
    const double lam = st.dc.lambda;
    for (int lvl = q; lvl >= 0; --lvl) {
        const Level& L = st.levels[lvl];
        const double scale_t = std::pow(lam, -2.0 * lvl);
        const double t_loc = scale_t * (t - (lvl ? st.mu[lvl - 1] : 0.0));
        const double y = std::pow(lam, -static_cast<double>(lvl)) * x;
        const double qn = y / st.dc.h; // local node coordinate
        if (std::abs(qn) > L.half) continue;
        const long last = static_cast<long>(L.history.size()) - 1;
        double tq = t_loc / st.dc.tau;
        if (tq > static_cast<double>(last) + 1e-9) {
            if (lvl == q)
                throw std::out_of_range("composite_eval: history gap");
            continue;
        }
        long m = static_cast<long>(tq);
        if (m > last - 1) m = last - 1;
        if (m < 0) m = 0;
        const double ft = tq - m;
        int i0 = static_cast<int>(std::floor(qn));
        if (i0 > L.half - 1) i0 = L.half - 1;
        if (i0 < -L.half) i0 = -L.half;
        const double fx = qn - i0;
        auto at = [&](long mm, int ii) { return L.history[mm][L.half + ii]; };
        const double a = at(m, i0) + fx * (at(m, i0 + 1) - at(m, i0));
        const double b = at(m + 1, i0) + fx * (at(m + 1, i0 + 1) - at(m + 1, i0));
        return std::pow(st.dc.inv_amp, lvl) * (a + ft * (b - a));
    }
    throw std::out_of_range("composite_eval: x outside domain");
}

} // namespace blowup
