#pragma once

// Config-file parsing, output bundles, and the run/sweep/converge command
// implementations. The command functions return process exit codes so they
// can be driven either from main() or directly from tests:
//   0  run completed and confirmed blow-up
//   1  usage, config, or output-path errors
//   2  run terminated without confirming blow-up (step cap or collapsed
//      rescale interval)
//   3  numeric overflow or internal failures

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "rescaler.hpp"

namespace blowup {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    double x;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key +
                                    "': not a number: '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key +
                                    "': trailing characters in '" + v + "'");
    return x;
}

inline long parse_long(const std::string& key, const std::string& v) {
    std::size_t pos = 0;
    long x;
    try {
        x = std::stol(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key +
                                    "': not an integer: '" + v + "'");
    }
    if (pos != v.size())
        throw std::invalid_argument("config key '" + key +
                                    "': trailing characters in '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key '" + key +
                                "': not a boolean: '" + v + "'");
}

} // namespace detail

// key = value lines; '#' starts a comment; keys mirror RunConfig fields.
// Required: equation, p, I, K_max. Unknown or duplicate keys are errors.
inline RunConfig parse_config_text(std::istream& in,
                                   const std::string& origin) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                        ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (!seen.insert(key).second)
            throw std::invalid_argument(origin + ": duplicate config key '" +
                                        key + "'");
        if (key == "equation") {
            if (val == "heat") cfg.equation = EquationKind::Heat;
            else if (val == "cgl") cfg.equation = EquationKind::CGL;
            else
                throw std::invalid_argument(
                    "config key 'equation': expected heat or cgl, got '" +
                    val + "'");
        } else if (key == "p") cfg.p = detail::parse_double(key, val);
        else if (key == "beta") cfg.beta = detail::parse_double(key, val);
        else if (key == "q") cfg.q = detail::parse_double(key, val);
        else if (key == "gamma") cfg.gamma = detail::parse_double(key, val);
        else if (key == "delta") cfg.delta = detail::parse_double(key, val);
        else if (key == "lambda_inv")
            cfg.lambda_inv = static_cast<int>(detail::parse_long(key, val));
        else if (key == "alpha") cfg.alpha = detail::parse_double(key, val);
        else if (key == "amplitude")
            cfg.amplitude = detail::parse_double(key, val);
        else if (key == "I")
            cfg.I = static_cast<int>(detail::parse_long(key, val));
        else if (key == "tau_ratio")
            cfg.tau_ratio = detail::parse_double(key, val);
        else if (key == "K_max")
            cfg.K_max = static_cast<int>(detail::parse_long(key, val));
        else if (key == "step_cap") cfg.step_cap = detail::parse_long(key, val);
        else if (key == "symmetric") cfg.symmetric = detail::parse_bool(key, val);
        else if (key == "retain_history")
            cfg.retain_history = detail::parse_bool(key, val);
        else
            throw std::invalid_argument(origin + ": unknown config key '" +
                                        key + "'");
    }
    for (const char* req : {"equation", "p", "I", "K_max"})
        if (!seen.count(req))
            throw std::invalid_argument(origin +
                                        ": missing required config key '" +
                                        std::string(req) + "'");
    validate(cfg);
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open config file: " + path);
    return parse_config_text(in, path);
}

struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::vector<int> k_profiles;
    std::string phase_drift = "lambda"; // or "alpha"
    bool quiet = false;
};

struct SweepOptions {
    std::string config_path;
    std::string out_dir;
    std::string param; // beta | delta | I
    std::vector<std::string> values;
    int jobs = 1;
    bool quiet = false;
};

struct ConvergeOptions {
    std::string config_path;
    std::string out_dir;
    int base_I = 50;
};

namespace detail {

struct SummaryWriter {
    std::string text;
    void kv(const std::string& k, const std::string& v) {
        text += k;
        text += '=';
        text += v;
        text += '\n';
    }
    void kv(const std::string& k, double v) { kv(k, format_double(v)); }
    void kv(const std::string& k, long v) { kv(k, std::to_string(v)); }
    void kv(const std::string& k, int v) { kv(k, std::to_string(v)); }
};

inline std::vector<double> default_profile_z() {
    std::vector<double> zs;
    for (int j = 0; j <= 200; ++j)
        zs.push_back(-0.995 + 1.99 * j / 200.0);
    return zs;
}

} // namespace detail

// Execute one configured run and write its bundle under out_dir. Returns
// the outcome plus an optional stall description; exceptions propagate so
// callers can map them to exit codes.
struct BundleResult {
    BlowupOutcome outcome;
    std::string stall_reason;
    std::optional<double> zeta_K;
    std::optional<double> rate_magnitude;
    std::optional<PhaseDriftReport> drift;
};

inline BundleResult write_run_bundle(LevelStack& stack,
                                     const BlowupOutcome& outcome,
                                     const std::string& stall_reason,
                                     const std::filesystem::path& out,
                                     const RunOptions& opts) {
    const RunConfig& cfg = stack.cfg;
    const DerivedConstants& dc = stack.dc;
    const bool cgl = cfg.equation == EquationKind::CGL;
    BundleResult res;
    res.outcome = outcome;
    res.stall_reason = stall_reason;

    {
        CsvBuilder csv("k,n_k,tau_star,xi_minus,xi_plus");
        for (std::size_t k = 0; k < stack.tau_stars.size(); ++k) {
            const Level& L = stack.levels[k];
            csv.cell(static_cast<int>(k))
                .cell(L.steps_at_crossing)
                .cell(L.tau_star)
                .cell(L.i_minus * dc.h)
                .cell(L.i_plus * dc.h)
                .endrow();
        }
        write_file_atomic(out / "tau_star.csv", csv.str());
    }

    if (!stack.tau_stars.empty()) {
        const RateSeries rs = build_rate_series(stack);
        CsvBuilder csv("t,T_minus_t,sup_norm");
        for (std::size_t i = 0; i < rs.t.size(); ++i)
            csv.cell(rs.t[i])
                .cell(rs.T_minus_t[i])
                .cell(std::exp(rs.log_sup[i]))
                .endrow();
        write_file_atomic(out / "rate.csv", csv.str());
        if (rs.t.size() >= 20) {
            try {
                res.rate_magnitude = blowup_rate_fit(rs).magnitude;
            } catch (const std::invalid_argument&) {
            }
        }
    }

    const int K = outcome.K_reached;
    for (int k : opts.k_profiles) {
        if (k < 1 || k > K) {
            if (!opts.quiet)
                std::fprintf(stderr,
                             "profile for k=%d skipped (valid range 1..%d)\n",
                             k, K);
            continue;
        }
        const ProfileReport rep =
            rescaled_profile(stack, k, detail::default_profile_z());
        CsvBuilder csv(cgl ? "z,computed,predicted,phase,phase_predicted"
                           : "z,computed,predicted");
        for (std::size_t i = 0; i < rep.z.size(); ++i) {
            csv.cell(rep.z[i]).cell(rep.computed[i]).cell(rep.predicted[i]);
            if (cgl) csv.cell(rep.phase[i]).cell(rep.phase_predicted[i]);
            csv.endrow();
        }
        write_file_atomic(out / ("profile_" + std::to_string(k) + ".csv"),
                          csv.str());
    }

    detail::SummaryWriter sm;
    sm.kv("equation", cgl ? "cgl" : "heat");
    sm.kv("p", cfg.p);
    sm.kv("beta", cfg.beta);
    sm.kv("q_eff", dc.q_eff);
    sm.kv("gamma", cfg.gamma);
    sm.kv("delta", cfg.delta);
    sm.kv("lambda_inv", cfg.lambda_inv);
    sm.kv("alpha", cfg.alpha);
    sm.kv("amplitude", cfg.amplitude);
    sm.kv("I", cfg.I);
    sm.kv("tau_ratio", cfg.tau_ratio);
    sm.kv("K_max", cfg.K_max);
    sm.kv("step_cap_eff", dc.step_cap_eff);
    sm.kv("symmetric", cfg.symmetric ? "true" : "false");
    sm.kv("h", dc.h);
    sm.kv("tau", dc.tau);
    sm.kv("M", dc.M);
    sm.kv("tau_star_limit", dc.tau_star_limit);
    sm.kv("outcome", outcome.blew_up ? "blowup" : "no-blowup");
    sm.kv("K_reached", K);
    if (!outcome.blew_up) {
        sm.kv("stall_level", outcome.stall_level);
        sm.kv("stall_reason", stall_reason.empty() ? "step cap" : stall_reason);
    }
    if (outcome.blew_up) {
        sm.kv("T_htau", outcome.T_htau);
        double ts_max = 0.0;
        for (double ts : stack.tau_stars) ts_max = std::max(ts_max, ts);
        const double lam2 = dc.lambda * dc.lambda;
        sm.kv("tail_bound",
              std::pow(lam2, K + 1) * ts_max / (1.0 - lam2));
    }
    if (res.rate_magnitude) sm.kv("rate_magnitude", *res.rate_magnitude);
    if (K >= 1) {
        try {
            res.zeta_K = zeta_estimate(stack, K);
            sm.kv("zeta_K", *res.zeta_K);
            sm.kv("zeta_limit", zeta_limit(cfg));
        } catch (const std::exception&) {
        }
    }
    if (dc.b_theory) sm.kv("b_theory", *dc.b_theory);
    if (cgl) {
        sm.kv("near_singular", dc.near_singular ? "true" : "false");
        if (K >= 5) {
            try {
                res.drift = measure_phase_drift(stack, std::max(1, K - 15), K);
                sm.kv("phase_drift_measured", res.drift->measured_step);
                sm.kv("phase_drift_variant", opts.phase_drift);
                sm.kv("phase_drift_predicted",
                      opts.phase_drift == "alpha" ? res.drift->predicted_alpha
                                                  : res.drift->predicted_lambda);
                sm.kv("phase_drift_best_fit", res.drift->best);
            } catch (const std::exception&) {
            }
        }
    }
    write_file_atomic(out / "summary.txt", sm.text);
    return res;
}

// Run a config and write its bundle; returns the exit code. If `result` is
// non-null the bundle diagnostics are copied out (used by sweep).
inline int run_to_bundle(const RunConfig& cfg, const std::string& out_dir,
                         const RunOptions& opts, BundleResult* result) {
    namespace fs = std::filesystem;
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        std::fprintf(stderr, "cannot create output directory %s: %s\n",
                     out_dir.c_str(), ec.message().c_str());
        return 1;
    }
    LevelStack stack(cfg);
    if (!opts.quiet)
        stack.on_level = [](const Level& L) {
            std::fprintf(stderr,
                         "level %d: n_k=%ld tau*=%.10g half=%d i+=%d\n", L.k,
                         L.steps_at_crossing, L.tau_star, L.half, L.i_plus);
            std::fflush(stderr);
        };
    BlowupOutcome outcome;
    std::string stall;
    int code = 0;
    try {
        outcome = stack.run();
        if (!outcome.blew_up) {
            stall = "step cap exhausted";
            code = 2;
        }
    } catch (const DegenerateInterval& e) {
        outcome.blew_up = false;
        outcome.K_reached = static_cast<int>(stack.tau_stars.size()) - 1;
        outcome.stall_level = outcome.K_reached + 1;
        stall = e.what();
        code = 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    }
    BundleResult res = write_run_bundle(stack, outcome, stall, out, opts);
    if (result) *result = std::move(res);
    return code;
}

inline int cmd_run(const RunOptions& opts) {
    try {
        const RunConfig cfg = parse_config_file(opts.config_path);
        return run_to_bundle(cfg, opts.out_dir, opts, nullptr);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

inline int cmd_converge(const ConvergeOptions& opts) {
    try {
        const RunConfig cfg = parse_config_file(opts.config_path);
        const ConvergenceReport rep = convergence_study(cfg, opts.base_I);
        CsvBuilder csv("base_I,t_end,E1,E2,order");
        csv.cell(rep.base_I)
            .cell(rep.t_end)
            .cell(rep.E1)
            .cell(rep.E2)
            .cell(rep.order)
            .endrow();
        std::filesystem::path out(opts.out_dir);
        write_file_atomic(out / "converge.csv", csv.str());
        std::printf("order=%.6g (E1=%.6g, E2=%.6g, t_end=%.6g)\n", rep.order,
                    rep.E1, rep.E2, rep.t_end);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

namespace detail {

struct SweepPoint {
    std::string label;       // subdirectory name
    RunConfig cfg;
    bool is_calibration = false;
    // results
    int code = -1;
    std::string error;
    std::optional<double> xi_plus; // level K-1 interval edge
    int K_usable = -1;
};

} // namespace detail

// Vary one parameter over the given values. Every point (plus the zero-
// coefficient calibration run it needs) gets its own bundle subdirectory;
// b_sweep.csv is assembled afterwards in the order the values were given.
inline int cmd_sweep(const SweepOptions& opts) {
    using detail::SweepPoint;
    RunConfig base;
    try {
        base = parse_config_file(opts.config_path);
        if (opts.param != "beta" && opts.param != "delta" && opts.param != "I")
            throw std::invalid_argument("sweep --param must be beta, delta, or I");
        if (opts.values.empty())
            throw std::invalid_argument("sweep needs at least one --values entry");
        if (opts.param == "beta" && base.equation != EquationKind::Heat)
            throw std::invalid_argument("beta sweeps require a heat config");
        if (opts.param == "delta" && base.equation != EquationKind::CGL)
            throw std::invalid_argument("delta sweeps require a cgl config");
        if (opts.jobs < 1)
            throw std::invalid_argument("--jobs must be >= 1");
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    std::vector<SweepPoint> points;
    std::map<int, std::size_t> calib_index; // by grid size I
    auto ensure_calibration = [&](const RunConfig& like) {
        auto it = calib_index.find(like.I);
        if (it != calib_index.end()) return it->second;
        SweepPoint cp;
        cp.cfg = like;
        cp.cfg.beta = 0.0;
        cp.cfg.gamma = 0.0;
        cp.cfg.delta = 0.0;
        cp.is_calibration = true;
        cp.label = calib_index.empty()
                       ? "calibration"
                       : "calibration_I_" + std::to_string(like.I);
        points.push_back(std::move(cp));
        calib_index[like.I] = points.size() - 1;
        return points.size() - 1;
    };

    std::vector<std::size_t> point_order;   // indices of the swept points
    std::vector<std::size_t> point_calib;   // matching calibration indices
    try {
        for (const std::string& v : opts.values) {
            SweepPoint sp;
            sp.cfg = base;
            if (opts.param == "beta")
                sp.cfg.beta = detail::parse_double("beta", v);
            else if (opts.param == "delta")
                sp.cfg.delta = detail::parse_double("delta", v);
            else
                sp.cfg.I = static_cast<int>(detail::parse_long("I", v));
            validate(sp.cfg);
            sp.label = opts.param + "_" + v;
            const std::size_t ci = ensure_calibration(sp.cfg);
            points.push_back(std::move(sp));
            point_order.push_back(points.size() - 1);
            point_calib.push_back(ci);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    namespace fs = std::filesystem;
    const fs::path out(opts.out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) {
        std::fprintf(stderr, "cannot create output directory %s: %s\n",
                     opts.out_dir.c_str(), ec.message().c_str());
        return 1;
    }

    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            SweepPoint& sp = points[i];
            RunOptions ro;
            ro.quiet = true;
            try {
                LevelStack stack(sp.cfg);
                BlowupOutcome outcome;
                std::string stall;
                sp.code = 0;
                try {
                    outcome = stack.run();
                    if (!outcome.blew_up) {
                        stall = "step cap exhausted";
                        sp.code = 2;
                    }
                } catch (const DegenerateInterval& e) {
                    outcome.blew_up = false;
                    outcome.K_reached =
                        static_cast<int>(stack.tau_stars.size()) - 1;
                    stall = e.what();
                    sp.code = 2;
                }
                write_run_bundle(stack, outcome, stall, out / sp.label, ro);
                sp.K_usable = outcome.K_reached;
                if (sp.K_usable >= 1)
                    sp.xi_plus =
                        stack.levels[sp.K_usable - 1].i_plus * stack.dc.h;
            } catch (const std::exception& e) {
                sp.code = 3;
                sp.error = e.what();
                write_file_atomic(out / sp.label / "error.txt",
                                  std::string(e.what()) + "\n");
            }
        }
    };
    {
        const int n_threads =
            std::min<std::size_t>(opts.jobs, points.size());
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    CsvBuilder csv("param,xi_plus_K,b_estimate,b_theory");
    for (std::size_t j = 0; j < point_order.size(); ++j) {
        const SweepPoint& sp = points[point_order[j]];
        const SweepPoint& cp = points[point_calib[j]];
        csv.cell(opts.values[j]);
        if (sp.xi_plus) csv.cell(*sp.xi_plus);
        else csv.cell(std::string());
        const DerivedConstants dcv = derive(sp.cfg);
        const DerivedConstants dcc = derive(cp.cfg);
        const int K = std::min(sp.K_usable, cp.K_usable);
        if (sp.xi_plus && cp.xi_plus && K >= 1 && dcc.b_theory) {
            const double r = *cp.xi_plus / *sp.xi_plus;
            csv.cell(*dcc.b_theory * r * r);
        } else {
            csv.cell(std::string());
        }
        if (dcv.b_theory) csv.cell(*dcv.b_theory);
        else csv.cell(std::string());
        csv.endrow();
    }
    write_file_atomic(out / "b_sweep.csv", csv.str());
    for (const SweepPoint& sp : points)
        if (!sp.error.empty())
            std::fprintf(stderr, "sweep point %s failed: %s\n",
                         sp.label.c_str(), sp.error.c_str());
    return 0;
}

} // namespace blowup
