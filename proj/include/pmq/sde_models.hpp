#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmq/errors.hpp"

namespace pmq {

struct Schedule {
    double horizon = 1.0;            // T in years
    int steps = 12;                  // K
    std::vector<int> codewords;      // N per dimension, constant through time
    /// Optional per-step override, indexed [step 1..K][dim]; empty keeps the
    /// constant counts above.
    std::vector<std::vector<int>> codewords_per_step;

    double dt() const { return horizon / steps; }

    int codewords_at(int step, int dim) const {
        if (codewords_per_step.empty()) return codewords[dim];
        return codewords_per_step[step - 1][dim];
    }

    void validate(int dim) const {
        if (!(horizon > 0.0)) throw config_error("Schedule: horizon must be positive");
        if (steps < 1) throw config_error("Schedule: need at least one step");
        if (static_cast<int>(codewords.size()) != dim)
            throw config_error("Schedule: one codeword count per dimension required");
        for (int n : codewords)
            if (n < 1) throw config_error("Schedule: codeword counts must be >= 1");
        if (!codewords_per_step.empty()) {
            if (static_cast<int>(codewords_per_step.size()) != steps)
                throw config_error("Schedule: per-step counts need one entry per step");
            for (const auto& row : codewords_per_step) {
                if (static_cast<int>(row.size()) != dim)
                    throw config_error("Schedule: per-step counts need one entry per dimension");
                for (int n : row)
                    if (n < 1) throw config_error("Schedule: codeword counts must be >= 1");
            }
        }
    }
};

/// Coefficient provider for a d-dimensional diffusion
/// dX = a(X) dt + diag(b(X)) dW with correlated Brownian drivers.
///
/// A dimension whose drift and diffusion depend only on its own coordinate
/// carries a ScalarCoeffs block with the derivatives the weak-order-2.0
/// update needs; such dimensions are the WO2-capable ones.
struct SdeModel {
    struct ScalarCoeffs {
        std::function<double(double)> a, da, d2a;
        std::function<double(double)> b, db, d2b;
    };

    int dim = 1;
    std::string id;
    std::vector<double> x0;
    std::vector<std::function<double(const std::vector<double>&)>> drift;
    std::vector<std::function<double(const std::vector<double>&)>> diffusion;
    std::vector<std::optional<ScalarCoeffs>> autonomous; // per dimension
    std::vector<std::vector<double>> correlation;        // dim x dim
    std::vector<double> lower_bound;                     // state-space floor per dim
    std::string params_fingerprint;

    bool wo2_capable(int n) const {
        return n >= 0 && n < dim && autonomous[n].has_value();
    }

    double corr(int i, int j) const { return correlation[i][j]; }
};

/// Euler update coefficients for dimension n at joint codeword x:
/// the conditional law is N(c, m^2) with c = x_n + a_n(x) dt, m = b_n(x) sqrt(dt).
/// m may come out zero (degenerate diffusion); the mixture layer treats that
/// component as a point mass at c.
inline std::pair<double, double> euler_coeffs(const SdeModel& model,
                                              const std::vector<double>& x, int n,
                                              double dt) {
    const double c = x[n] + model.drift[n](x) * dt;
    const double m = model.diffusion[n](x) * std::sqrt(dt);
    return {c, m};
}

struct Wo2Coeffs {
    double mbar;
    double cbar;
    double lambda;
};

/// Simplified weak-order 2.0 update coefficients for an autonomous dimension:
/// the conditional law is mbar * chi2(1, lambda) + cbar.
inline Wo2Coeffs wo2_coeffs(const SdeModel& model, double x, int n, double dt) {
    if (!model.wo2_capable(n))
        throw config_error("wo2_coeffs: dimension " + std::to_string(n) +
                           " is not autonomous");
    const auto& sc = *model.autonomous[n];
    const double a = sc.a(x), da = sc.da(x), d2a = sc.d2a(x);
    const double b = sc.b(x), db = sc.db(x), d2b = sc.d2b(x);
    const double bb1 = b * db;
    if (bb1 == 0.0)
        throw unsupported_coefficient_error("wo2_coeffs: b * b' vanishes (additive noise)");
    const double mbar = 0.5 * bb1 * dt;
    const double num = b + 0.5 * (da * b + a * db + 0.5 * d2b * b * b) * dt;
    const double lambda = (num / (bb1 * std::sqrt(dt))) * (num / (bb1 * std::sqrt(dt)));
    const double cbar = x + (a - 0.5 * bb1) * dt +
                        0.5 * (a * da + 0.5 * d2a * b * b) * dt * dt -
                        num * num / (2.0 * bb1);
    return {mbar, cbar, lambda};
}

namespace detail {

inline std::string fingerprint(const std::string& id, const std::vector<double>& vals) {
    std::ostringstream os;
    os.precision(17);
    os << id;
    for (double v : vals) os << ';' << v;
    return os.str();
}

inline std::vector<std::vector<double>> corr2(double rho) {
    return {{1.0, rho}, {rho, 1.0}};
}

inline void require(bool ok, const char* msg) {
    if (!ok) throw parameter_domain_error(msg);
}

} // namespace detail

/// One-dimensional geometric Brownian motion dS = r S dt + sigma S dW.
inline SdeModel gbm1d(double x0, double r, double sigma) {
    detail::require(x0 > 0.0 && sigma > 0.0, "gbm1d: x0 and sigma must be positive");
    SdeModel m;
    m.dim = 1;
    m.id = "gbm1d";
    m.x0 = {x0};
    m.drift = {[r](const std::vector<double>& x) { return r * x[0]; }};
    m.diffusion = {[sigma](const std::vector<double>& x) { return sigma * x[0]; }};
    SdeModel::ScalarCoeffs sc;
    sc.a = [r](double x) { return r * x; };
    sc.da = [r](double) { return r; };
    sc.d2a = [](double) { return 0.0; };
    sc.b = [sigma](double x) { return sigma * x; };
    sc.db = [sigma](double) { return sigma; };
    sc.d2b = [](double) { return 0.0; };
    m.autonomous = {sc};
    m.correlation = {{1.0}};
    m.lower_bound = {0.0};
    m.params_fingerprint = detail::fingerprint(m.id, {x0, r, sigma});
    return m;
}

/// Two correlated GBM assets.
inline SdeModel gbm2d(double x01, double x02, double r, double sigma1, double sigma2,
                      double rho) {
    detail::require(x01 > 0.0 && x02 > 0.0, "gbm2d: spots must be positive");
    detail::require(sigma1 > 0.0 && sigma2 > 0.0, "gbm2d: vols must be positive");
    detail::require(rho > -1.0 && rho < 1.0, "gbm2d: rho must lie in (-1,1)");
    SdeModel m;
    m.dim = 2;
    m.id = "gbm2d";
    m.x0 = {x01, x02};
    m.drift = {[r](const std::vector<double>& x) { return r * x[0]; },
               [r](const std::vector<double>& x) { return r * x[1]; }};
    m.diffusion = {[sigma1](const std::vector<double>& x) { return sigma1 * x[0]; },
                   [sigma2](const std::vector<double>& x) { return sigma2 * x[1]; }};
    auto scalar = [r](double sigma) {
        SdeModel::ScalarCoeffs sc;
        sc.a = [r](double x) { return r * x; };
        sc.da = [r](double) { return r; };
        sc.d2a = [](double) { return 0.0; };
        sc.b = [sigma](double x) { return sigma * x; };
        sc.db = [sigma](double) { return sigma; };
        sc.d2b = [](double) { return 0.0; };
        return sc;
    };
    m.autonomous = {scalar(sigma1), scalar(sigma2)};
    m.correlation = detail::corr2(rho);
    m.lower_bound = {0.0, 0.0};
    m.params_fingerprint = detail::fingerprint(m.id, {x01, x02, r, sigma1, sigma2, rho});
    return m;
}

/// Heston model: dS = r S dt + sqrt(V) S dW1, dV = kappa (theta - V) dt
/// + sigma sqrt(V) dW2, d<W1,W2> = rho dt.
inline SdeModel heston(double s0, double v0, double kappa, double theta, double sigma,
                       double r, double rho) {
    detail::require(s0 > 0.0, "heston: s0 must be positive");
    detail::require(v0 > 0.0, "heston: v0 must be positive");
    detail::require(kappa > 0.0 && theta > 0.0 && sigma > 0.0,
                    "heston: kappa, theta, sigma must be positive");
    detail::require(rho > -1.0 && rho < 1.0, "heston: rho must lie in (-1,1)");
    SdeModel m;
    m.dim = 2;
    m.id = "heston";
    m.x0 = {s0, v0};
    m.drift = {[r](const std::vector<double>& x) { return r * x[0]; },
               [kappa, theta](const std::vector<double>& x) {
                   return kappa * (theta - x[1]);
               }};
    m.diffusion = {[](const std::vector<double>& x) {
                       return std::sqrt(std::max(x[1], 0.0)) * x[0];
                   },
                   [sigma](const std::vector<double>& x) {
                       return sigma * std::sqrt(std::max(x[1], 0.0));
                   }};
    SdeModel::ScalarCoeffs var;
    var.a = [kappa, theta](double v) { return kappa * (theta - v); };
    var.da = [kappa](double) { return -kappa; };
    var.d2a = [](double) { return 0.0; };
    var.b = [sigma](double v) { return sigma * std::sqrt(v); };
    var.db = [sigma](double v) { return 0.5 * sigma / std::sqrt(v); };
    var.d2b = [sigma](double v) { return -0.25 * sigma / (v * std::sqrt(v)); };
    m.autonomous = {std::nullopt, var};
    m.correlation = detail::corr2(rho);
    m.lower_bound = {0.0, 0.0};
    m.params_fingerprint =
        detail::fingerprint(m.id, {s0, v0, kappa, theta, sigma, r, rho});
    return m;
}

/// SABR model on a forward: dF = Y F^beta dW1, dY = nu Y dW2,
/// d<W1,W2> = rho dt. The first coordinate is the (driftless) forward.
inline SdeModel sabr(double f0, double y0, double beta, double nu, double rho) {
    detail::require(f0 > 0.0 && y0 > 0.0, "sabr: f0 and y0 must be positive");
    detail::require(beta >= 0.0 && beta <= 1.0, "sabr: beta must lie in [0,1]");
    detail::require(nu > 0.0, "sabr: nu must be positive");
    detail::require(rho > -1.0 && rho < 1.0, "sabr: rho must lie in (-1,1)");
    SdeModel m;
    m.dim = 2;
    m.id = "sabr";
    m.x0 = {f0, y0};
    m.drift = {[](const std::vector<double>&) { return 0.0; },
               [](const std::vector<double>&) { return 0.0; }};
    m.diffusion = {[beta](const std::vector<double>& x) {
                       return x[1] * std::pow(std::max(x[0], 0.0), beta);
                   },
                   [nu](const std::vector<double>& x) { return nu * x[1]; }};
    SdeModel::ScalarCoeffs vol;
    vol.a = [](double) { return 0.0; };
    vol.da = [](double) { return 0.0; };
    vol.d2a = [](double) { return 0.0; };
    vol.b = [nu](double y) { return nu * y; };
    vol.db = [nu](double) { return nu; };
    vol.d2b = [](double) { return 0.0; };
    m.autonomous = {std::nullopt, vol};
    m.correlation = detail::corr2(rho);
    m.lower_bound = {0.0, 0.0};
    m.params_fingerprint = detail::fingerprint(m.id, {f0, y0, beta, nu, rho});
    return m;
}

} // namespace pmq
