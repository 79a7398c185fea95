#pragma once

// Run configuration, derived constants, and the exact amplitude scaling
// shared by every other header.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup {

enum class EquationKind { Heat, CGL };

// Raised when a time step produces non-finite values. The multilevel driver
// rescales long before the solution can overflow, so reaching this is a
// defect in the caller's schedule, not an expected runtime outcome.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    EquationKind equation = EquationKind::Heat;
    double p = 0.0;            // nonlinearity power, > 1
    double beta = 0.0;         // gradient-term coefficient (Heat only)
    double q = 0.0;            // gradient exponent; 0 means default 2p/(p+1)
    double gamma = 0.0;        // CGL only
    double delta = 0.0;        // CGL only
    int lambda_inv = 2;        // 1/lambda, integer >= 2
    double alpha = 0.4;        // rescale-interval threshold fraction
    double amplitude = 1.2;    // A in u0 = A(1 + cos(pi x))
    int I = 0;                 // grid-resolution label; h = 2/I on (-1,1)
    double tau_ratio = 0.25;   // tau = tau_ratio * h^2
    int K_max = -1;            // number of rescalings
    long step_cap = 0;         // per-level step budget; 0 = automatic
    bool symmetric = true;     // mirror-and-center-stencil stepping
    bool retain_history = false; // keep every slice (composite evaluation)
};

struct DerivedConstants {
    double h = 0.0;
    double tau = 0.0;
    int half = 0;              // nodes per side; grid is -half..half
    double lambda = 0.0;
    double amp = 0.0;          // lambda^{2/(p-1)}
    double inv_amp = 0.0;      // lambda^{-2/(p-1)}
    double M = 0.0;            // rescale threshold, 2A lambda^{-2/(p-1)}
    double alpha_M = 0.0;
    double kappa = 0.0;        // (p-1)^{-1/(p-1)}
    double q_eff = 0.0;        // gradient exponent actually used
    double tau_star_limit = 0.0; // M^{1-p} (p-1)^{-1} (lambda^{-2} - 1)
    long step_cap_eff = 0;
    std::optional<double> b_theory; // (p-1)^2 / (4(p - d^2 - gd(p+1))) if > 0
    std::optional<double> mu_cgl;   // -2 g b (1+d^2) / (p-1)^2
    bool near_singular = false;     // b denominator in (0, 0.1 p]
};

inline double threshold_M(const RunConfig& cfg) {
    const double lambda = 1.0 / cfg.lambda_inv;
    return 2.0 * cfg.amplitude * std::pow(lambda, -2.0 / (cfg.p - 1.0));
}

inline void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (!(cfg.p > 1.0)) fail("p must be > 1");
    if (cfg.lambda_inv < 2) fail("lambda_inv must be an integer >= 2");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) fail("alpha must lie in (0,1)");
    if (!(cfg.amplitude > 0.0)) fail("amplitude must be > 0");
    if (cfg.I < 2) fail("I must be >= 2");
    if (cfg.I % 2 != 0) fail("I must be even (grid has I/2 nodes per side)");
    if (!(cfg.tau_ratio > 0.0 && cfg.tau_ratio <= 0.5))
        fail("tau_ratio must lie in (0, 1/2]");
    if (cfg.K_max < 0) fail("K_max must be >= 0");
    if (cfg.step_cap < 0) fail("step_cap must be >= 0");
    if (cfg.q != 0.0 && !(cfg.q >= 1.0 && cfg.q < 2.0))
        fail("q must lie in [1,2)");
    if (cfg.equation == EquationKind::Heat) {
        if (cfg.gamma != 0.0 || cfg.delta != 0.0)
            fail("gamma/delta apply to the CGL equation only");
    } else {
        if (cfg.beta != 0.0) fail("beta applies to the heat equation only");
    }
}

inline DerivedConstants derive(const RunConfig& cfg) {
    validate(cfg);
    DerivedConstants dc;
    dc.h = 2.0 / cfg.I;
    dc.tau = cfg.tau_ratio * dc.h * dc.h;
    dc.half = cfg.I / 2;
    dc.lambda = 1.0 / cfg.lambda_inv;
    dc.amp = std::pow(dc.lambda, 2.0 / (cfg.p - 1.0));
    dc.inv_amp = 1.0 / dc.amp;
    dc.M = threshold_M(cfg);
    dc.alpha_M = cfg.alpha * dc.M;
    dc.kappa = std::pow(cfg.p - 1.0, -1.0 / (cfg.p - 1.0));
    dc.q_eff = cfg.q != 0.0 ? cfg.q : 2.0 * cfg.p / (cfg.p + 1.0);
    dc.tau_star_limit = std::pow(dc.M, 1.0 - cfg.p) / (cfg.p - 1.0) *
                        (1.0 / (dc.lambda * dc.lambda) - 1.0);
    dc.step_cap_eff = cfg.step_cap > 0
        ? cfg.step_cap
        : std::max<long>(1000000L,
              10L * static_cast<long>(std::ceil(dc.tau_star_limit / dc.tau)));
    if (cfg.equation == EquationKind::CGL) {
        const double denom = cfg.p - cfg.delta * cfg.delta -
                             cfg.gamma * cfg.delta * (cfg.p + 1.0);
        if (denom > 0.0) {
            const double b = (cfg.p - 1.0) * (cfg.p - 1.0) / (4.0 * denom);
            dc.b_theory = b;
            dc.mu_cgl = -2.0 * cfg.gamma * b * (1.0 + cfg.delta * cfg.delta) /
                        ((cfg.p - 1.0) * (cfg.p - 1.0));
            dc.near_singular = denom <= 0.1 * cfg.p;
        } else {
            dc.near_singular = true;
        }
    } else if (cfg.beta == 0.0) {
        dc.b_theory = (cfg.p - 1.0) * (cfg.p - 1.0) / (4.0 * cfg.p);
    }
    return dc;
}

// u0(x_i) = A (1 + cos(pi x_i)) with the endpoints clamped to exactly 0 and
// the negative side mirrored bit-for-bit. For CGL this is the real part; the
// imaginary part starts at zero.
inline std::vector<double> default_initial_data(const RunConfig& cfg) {
    const DerivedConstants dc = derive(cfg);
    std::vector<double> u(2 * dc.half + 1, 0.0);
    for (int i = 0; i <= dc.half; ++i) {
        const double x = i * dc.h;
        const double v = cfg.amplitude * (1.0 + std::cos(M_PI * x));
        u[dc.half + i] = v;
        u[dc.half - i] = v;
    }
    u.front() = 0.0;
    u.back() = 0.0;
    return u;
}

// Amplitude part of the zoom u -> lambda^{2/(p-1)} u(lambda x, lambda^2 t);
// the spatial dilation is realized by grid re-indexing in the rescaler.
inline std::vector<double> rescale_state(std::vector<double> state,
                                         double lambda, double p) {
    const double a = std::pow(lambda, 2.0 / (p - 1.0));
    for (double& v : state) v *= a;
    return state;
}

} // namespace blowup
