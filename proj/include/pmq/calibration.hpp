#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmq/black.hpp"
#include "pmq/errors.hpp"
#include "pmq/grid_builder.hpp"
#include "pmq/nelder_mead.hpp"
#include "pmq/pricing.hpp"
#include "pmq/sde_models.hpp"

namespace pmq {

struct Quote {
    double maturity = 1.0;   // years
    double strike = 100.0;
    OptionKind kind = OptionKind::european_put;
    double market_vol = 0.2; // Black implied vol
    double volume = 1.0;
};

struct QuoteSet {
    std::vector<Quote> quotes;
    double spot = 100.0;
    double rate = 0.0; // flat discount curve

    double max_maturity() const {
        double t = 0.0;
        for (const auto& q : quotes) t = std::max(t, q.maturity);
        return t;
    }
    void validate() const {
        if (quotes.empty()) throw config_error("QuoteSet: no quotes");
        for (const auto& q : quotes)
            if (!(q.maturity > 0.0 && q.strike > 0.0 && q.market_vol > 0.0))
                throw config_error("QuoteSet: maturities, strikes and vols must be positive");
    }
};

/// Parse a quote file: a header line, then rows
/// `maturity_years,strike,kind,market_implied_vol,volume`.
/// Rows with zero volume are dropped, as are strikes further than
/// `moneyness_filter` from the at-the-money forward of their maturity.
inline QuoteSet load_quotes(std::istream& in, double spot, double rate,
                            double moneyness_filter = 0.30) {
    QuoteSet qs;
    qs.spot = spot;
    qs.rate = rate;
    std::string line;
    if (!std::getline(in, line))
        throw config_error("quote file: missing header line");
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> cells;
        while (std::getline(ls, tok, ',')) cells.push_back(tok);
        if (cells.size() != 5)
            throw config_error("quote file row " + std::to_string(row) +
                               ": expected 5 comma-separated fields");
        Quote q;
        try {
            q.maturity = std::stod(cells[0]);
            q.strike = std::stod(cells[1]);
            q.market_vol = std::stod(cells[3]);
            q.volume = std::stod(cells[4]);
        } catch (const std::exception&) {
            throw config_error("quote file row " + std::to_string(row) +
                               ": malformed numeric field");
        }
        if (cells[2] == "european-put")
            q.kind = OptionKind::european_put;
        else if (cells[2] == "european-call")
            q.kind = OptionKind::european_call;
        else if (cells[2] == "bermudan-put" || cells[2] == "american-put")
            q.kind = OptionKind::bermudan_put;
        else
            throw config_error("quote file row " + std::to_string(row) +
                               ": unknown option kind '" + cells[2] + "'");
        if (!(q.volume > 0.0)) continue;
        const double fwd = spot * std::exp(rate * q.maturity);
        if (std::fabs(q.strike / fwd - 1.0) > moneyness_filter) continue;
        qs.quotes.push_back(q);
    }
    qs.validate();
    return qs;
}

inline QuoteSet load_quotes_file(const std::string& path, double spot, double rate,
                                 double moneyness_filter = 0.30) {
    std::ifstream in(path);
    if (!in) throw config_error("quote file: cannot open " + path);
    return load_quotes(in, spot, rate, moneyness_filter);
}

struct SabrParams {
    double y0 = 0.4;
    double beta = 0.9;
    double nu = 0.4;
    double rho = -0.3;
};

struct RsveSettings {
    std::vector<int> codewords = {20, 10};
    int steps_override = 0; // 0: max(4, ceil(12 T_max))
    std::vector<Scheme> schemes = {Scheme::euler, Scheme::euler};
    OptimizerConfig optimizer;
    int threads = 1;

    int steps_for(double t_max) const {
        if (steps_override > 0) return steps_override;
        return std::max(4, static_cast<int>(std::ceil(12.0 * t_max)));
    }
};

struct RsveDiagnostics {
    int evaluations = 0;
    int hessian_fallbacks = 0;
    int empty_region_merges = 0;
    int inversion_penalties = 0;
    int failed_builds = 0;
};

inline constexpr double rsve_failure_sentinel = 1e10;

namespace detail {

struct RsveBreakdown {
    double objective = 0.0;
    std::vector<double> residuals;
    std::vector<double> model_vols;
};

inline RsveBreakdown rsve_eval(const SabrParams& p, const QuoteSet& quotes,
                               const RsveSettings& settings, RsveDiagnostics* diag) {
    quotes.validate();
    const double t_max = quotes.max_maturity();
    const int steps = settings.steps_for(t_max);
    const double forward0 = quotes.spot * std::exp(quotes.rate * t_max);

    auto model = sabr(forward0, p.y0, p.beta, p.nu, p.rho);
    Schedule sched{t_max, steps, settings.codewords};
    BuildOptions opts;
    opts.optimizer = settings.optimizer;
    opts.threads = settings.threads;
    opts.with_transitions = false;
    for (const auto& q : quotes.quotes)
        if (q.kind == OptionKind::bermudan_put) opts.with_transitions = true;

    auto seq = pmq_build(model, sched, settings.schemes, opts);
    if (diag) {
        diag->hessian_fallbacks += seq.total_hessian_fallbacks();
        diag->empty_region_merges += seq.total_empty_region_merges();
    }

    RsveBreakdown out;
    const double dt = sched.dt();
    std::vector<std::optional<double>> vols(quotes.quotes.size());
    for (std::size_t l = 0; l < quotes.quotes.size(); ++l) {
        const auto& q = quotes.quotes[l];
        OptionSpec spec;
        spec.kind = q.kind;
        spec.strike = q.strike;
        spec.rate = quotes.rate;
        spec.forward_underlying = true;
        spec.maturity_step =
            std::clamp(static_cast<int>(std::lround(q.maturity / dt)), 1, steps);
        if (q.kind == OptionKind::bermudan_put) {
            spec.monitor_steps.resize(spec.maturity_step);
            for (int k = 0; k < spec.maturity_step; ++k) spec.monitor_steps[k] = k + 1;
        }
        const double t_l = spec.maturity_step * dt;
        const double price = price_option(seq, spec);
        const double fwd_l = quotes.spot * std::exp(quotes.rate * t_l);
        const double df_l = std::exp(-quotes.rate * t_l);
        try {
            const bool call = q.kind == OptionKind::european_call;
            vols[l] = implied_vol(price, fwd_l, q.strike, t_l, df_l, call);
        } catch (const no_solution_error&) {
            vols[l] = std::nullopt; // penalized below
            if (diag) ++diag->inversion_penalties;
        }
    }

    double max_res = 0.0;
    out.residuals.resize(quotes.quotes.size());
    out.model_vols.resize(quotes.quotes.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t l = 0; l < quotes.quotes.size(); ++l) {
        if (!vols[l]) continue;
        const auto& q = quotes.quotes[l];
        out.model_vols[l] = *vols[l];
        out.residuals[l] = (*vols[l] - q.market_vol) / q.market_vol;
        max_res = std::max(max_res, std::fabs(out.residuals[l]));
    }
    // Quotes whose price cannot be inverted contribute a documented penalty
    // of ten times the largest successful residual (at least 1).
    const double penalty = 10.0 * std::max(max_res, 1.0);
    for (std::size_t l = 0; l < quotes.quotes.size(); ++l)
        if (!vols[l]) out.residuals[l] = penalty;
    for (double r : out.residuals) out.objective += r * r;
    return out;
}

} // namespace detail

/// Relative squared volatility error of a SABR parameter set against a quote
/// set: one grid build out to the furthest maturity, every quote priced and
/// inverted off that grid. Build failures return a large finite sentinel so
/// an optimizer never sees an exception.
inline double rsve(const SabrParams& p, const QuoteSet& quotes,
                   const RsveSettings& settings, RsveDiagnostics* diag = nullptr) {
    if (diag) ++diag->evaluations;
    try {
        return detail::rsve_eval(p, quotes, settings, diag).objective;
    } catch (const error&) {
        if (diag) ++diag->failed_builds;
        return rsve_failure_sentinel;
    }
}

struct CalibResult {
    SabrParams params;
    double objective = 0.0;
    int evaluations = 0;
    bool budget_exhausted = false;
    std::vector<double> trace;       // best objective after each evaluation
    std::vector<double> residuals;   // per quote, at the optimum
    RsveDiagnostics diagnostics;
};

namespace detail {

// Box constraints via smooth transforms: logit for beta and (rho+1)/2, log
// for nu and y0. The first coordinate is the at-the-money backbone level
// y0 * F^(beta-1) rather than y0 itself: beta and y0 trade off along that
// backbone, and straightening the valley is what lets the least-squares
// stage converge to the exact solution.
inline std::vector<double> sabr_to_unconstrained(const SabrParams& p, double fref) {
    auto logit = [](double x) { return std::log(x / (1.0 - x)); };
    return {std::log(p.y0) + (p.beta - 1.0) * std::log(fref),
            logit(std::clamp(p.beta, 1e-9, 1.0 - 1e-9)), std::log(p.nu),
            logit(std::clamp(0.5 * (p.rho + 1.0), 1e-9, 1.0 - 1e-9))};
}

inline SabrParams sabr_from_unconstrained(const std::vector<double>& t, double fref) {
    auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    SabrParams p;
    p.beta = sigmoid(t[1]);
    p.y0 = std::exp(t[0] + (1.0 - p.beta) * std::log(fref));
    p.nu = std::exp(t[2]);
    p.rho = 2.0 * sigmoid(t[3]) - 1.0;
    return p;
}

} // namespace detail

/// Residual vector in the transformed parameter space; failures surface as
/// std::nullopt so the caller can reject the trial point.
inline std::optional<std::vector<double>> rsve_residuals_at(
    const std::vector<double>& t, double fref, const QuoteSet& quotes,
    const RsveSettings& settings, RsveDiagnostics* diag) {
    if (diag) ++diag->evaluations;
    try {
        return detail::rsve_eval(detail::sabr_from_unconstrained(t, fref), quotes,
                                 settings, diag)
            .residuals;
    } catch (const error&) {
        if (diag) ++diag->failed_builds;
        return std::nullopt;
    }
}

namespace detail {

/// Levenberg-Marquardt polish on the least-squares structure of the RSVE.
/// The Nelder-Mead stage lands near the flat beta/y0 valley; this stage
/// follows the valley down to the zero-residual solution, which plain
/// simplex iterations cannot reach in any reasonable budget.
inline void lm_polish(const QuoteSet& quotes, const RsveSettings& settings,
                      double fref, RsveDiagnostics* diag, std::vector<double>& t,
                      double& f, int max_evals, double stop_below,
                      std::vector<double>& trace) {
    const std::size_t n = t.size();
    int used = 0;
    auto eval = [&](const std::vector<double>& x)
        -> std::optional<std::vector<double>> {
        ++used;
        auto r = rsve_residuals_at(x, fref, quotes, settings, diag);
        double value = std::numeric_limits<double>::infinity();
        if (r) {
            value = 0.0;
            for (double v : *r) value += v * v;
        }
        trace.push_back(trace.empty() ? value : std::min(value, trace.back()));
        return r;
    };
    auto res = eval(t);
    if (!res) return;
    auto sum_sq = [](const std::vector<double>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    };
    f = sum_sq(*res);
    double lambda = 1e-3;
    const double h = 1e-6;
    while (used + static_cast<int>(n) + 1 <= max_evals && f > stop_below) {
        // Forward-difference Jacobian.
        const std::size_t m = res->size();
        std::vector<std::vector<double>> jac(m, std::vector<double>(n));
        bool ok = true;
        for (std::size_t j = 0; j < n && ok; ++j) {
            auto tj = t;
            tj[j] += h;
            auto rj = eval(tj);
            if (!rj || rj->size() != m) {
                ok = false;
                break;
            }
            for (std::size_t i = 0; i < m; ++i)
                jac[i][j] = ((*rj)[i] - (*res)[i]) / h;
        }
        if (!ok) break;
        std::vector<std::vector<double>> jtj(n, std::vector<double>(n, 0.0));
        std::vector<double> jtr(n, 0.0);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a; b < n; ++b) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += jac[i][a] * jac[i][b];
                jtj[a][b] = jtj[b][a] = s;
            }
            for (std::size_t i = 0; i < m; ++i) jtr[a] += jac[i][a] * (*res)[i];
        }
        bool improved = false;
        for (int attempt = 0; attempt < 8 && used < max_evals; ++attempt) {
            auto a = jtj;
            for (std::size_t d = 0; d < n; ++d)
                a[d][d] += lambda * std::max(jtj[d][d], 1e-12);
            // Cholesky solve of (JtJ + lambda D) delta = Jtr.
            std::vector<std::vector<double>> chol(n, std::vector<double>(n, 0.0));
            bool spd = true;
            for (std::size_t c = 0; c < n && spd; ++c) {
                double dval = a[c][c];
                for (std::size_t kk = 0; kk < c; ++kk) dval -= chol[c][kk] * chol[c][kk];
                if (!(dval > 0.0)) {
                    spd = false;
                    break;
                }
                chol[c][c] = std::sqrt(dval);
                for (std::size_t rI = c + 1; rI < n; ++rI) {
                    double v = a[rI][c];
                    for (std::size_t kk = 0; kk < c; ++kk)
                        v -= chol[rI][kk] * chol[c][kk];
                    chol[rI][c] = v / chol[c][c];
                }
            }
            if (!spd) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> delta = jtr;
            for (std::size_t c = 0; c < n; ++c) {
                for (std::size_t kk = 0; kk < c; ++kk)
                    delta[c] -= chol[c][kk] * delta[kk];
                delta[c] /= chol[c][c];
            }
            for (std::size_t c = n; c-- > 0;) {
                for (std::size_t kk = c + 1; kk < n; ++kk)
                    delta[c] -= chol[kk][c] * delta[kk];
                delta[c] /= chol[c][c];
            }
            auto trial = t;
            for (std::size_t c = 0; c < n; ++c) trial[c] -= delta[c];
            auto rt = eval(trial);
            if (rt) {
                const double ft = sum_sq(*rt);
                if (ft < f) {
                    t = std::move(trial);
                    res = std::move(rt);
                    f = ft;
                    lambda = std::max(1e-12, lambda / 3.0);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
}

} // namespace detail

/// Derivative-free SABR calibration by restarted Nelder-Mead on transformed
/// parameters. A collapsed simplex restarts from the best point with a
/// fresh, smaller simplex, which lets the search track the beta/y0 valley of
/// the SABR objective. The budget counts objective evaluations across all
/// restarts; the result carries the best parameters seen and the fallback
/// diagnostics.
inline CalibResult calibrate(const QuoteSet& quotes, const SabrParams& init,
                             int max_evals, const RsveSettings& settings,
                             double stop_below = 1e-14) {
    quotes.validate();
    if (max_evals < 1) throw config_error("calibrate: need a positive budget");
    CalibResult result;
    const double fref = quotes.spot * std::exp(quotes.rate * quotes.max_maturity());
    auto objective = [&](const std::vector<double>& t) {
        return rsve(detail::sabr_from_unconstrained(t, fref), quotes, settings,
                    &result.diagnostics);
    };

    std::vector<double> best_x = detail::sabr_to_unconstrained(init, fref);
    double best_f = std::numeric_limits<double>::infinity();
    int used = 0;
    double step = 0.15;
    while (used < max_evals) {
        // Simplex stage localizes the valley ...
        const int nm_budget = std::min(max_evals - used, 150);
        auto nm = nelder_mead(objective, best_x, step, nm_budget, 1e-16, 1e-11);
        used += nm.evaluations;
        for (double f : nm.trace)
            result.trace.push_back(result.trace.empty()
                                       ? f
                                       : std::min(f, result.trace.back()));
        if (nm.value < best_f) {
            best_f = nm.value;
            best_x = nm.x;
        }
        if (best_f < stop_below || used >= max_evals) break;
        // ... and the Gauss-Newton stage follows it down to the residual floor.
        const int before = result.diagnostics.evaluations;
        double f = best_f;
        detail::lm_polish(quotes, settings, fref, &result.diagnostics, best_x, f,
                          max_evals - used, stop_below, result.trace);
        used += result.diagnostics.evaluations - before;
        best_f = std::min(best_f, f);
        if (best_f < stop_below || used >= max_evals) break;
        step = std::max(0.02, 0.5 * step); // restart tighter around the best point
    }
    const bool exhausted = used >= max_evals;
    result.params = detail::sabr_from_unconstrained(best_x, fref);
    result.objective = best_f;
    result.evaluations = used;
    result.budget_exhausted = exhausted;
    try {
        result.residuals =
            detail::rsve_eval(result.params, quotes, settings, nullptr).residuals;
    } catch (const error&) {
        result.residuals.clear();
    }
    return result;
}

} // namespace pmq
