#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pmq/dist1d.hpp"
#include "pmq/errors.hpp"
#include "pmq/grid1d.hpp"
#include "pmq/tridiagonal.hpp"

namespace pmq {

struct OptimizerConfig {
    int nr_max_iters = 25;
    int lloyd_max_iters = 200;
    /// Convergence threshold on the sup-norm of the distortion gradient,
    /// relative to max(1, initial gradient sup-norm).
    double grad_tol = 1e-9;
    /// Newton runs only while the Hessian's reciprocal 1-norm condition
    /// estimate stays at or above this bound.
    double cond_threshold = 1e-12;
    /// History length for Anderson mixing of the Lloyd fixed point.
    int anderson_depth = 5;
    double anderson_ridge = 1e-10;

    void validate() const {
        if (nr_max_iters <= 0 || lloyd_max_iters <= 0 || grad_tol <= 0.0 ||
            anderson_depth <= 0 || !(cond_threshold > 0.0 && cond_threshold < 1.0))
            throw config_error("OptimizerConfig: fields must be positive, cond_threshold in (0,1)");
    }
};

/// Per-optimization diagnostics; the grid builder aggregates these across
/// steps so robustness sweeps can count Newton->Lloyd fallbacks.
struct OptimizeReport {
    int newton_iters = 0;
    int lloyd_iters = 0;
    int hessian_fallbacks = 0;
    int rejected_steps = 0;
    int empty_region_merges = 0;
    bool converged = false;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

struct EdgeStats {
    std::vector<double> boundary; // N+1
    std::vector<double> cdf;      // N+1
    std::vector<double> lpe1;     // N+1
};

inline EdgeStats edge_stats(const Grid1D& g, const Dist1D& dist) {
    EdgeStats s;
    s.boundary = region_boundaries(g);
    const std::size_t m = s.boundary.size();
    s.cdf.resize(m);
    s.lpe1.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double b = s.boundary[i];
        if (b == -std::numeric_limits<double>::infinity()) {
            s.cdf[i] = 0.0;
            s.lpe1[i] = 0.0;
        } else if (b == std::numeric_limits<double>::infinity()) {
            s.cdf[i] = 1.0;
            s.lpe1[i] = dist.mean();
        } else {
            s.cdf[i] = dist.cdf(b);
            s.lpe1[i] = dist.lpe1(b);
        }
    }
    return s;
}

inline std::vector<double> gradient_from_stats(const Grid1D& g, const EdgeStats& s) {
    const std::size_t n = g.size();
    std::vector<double> grad(n);
    for (std::size_t i = 0; i < n; ++i)
        grad[i] = 2.0 * g.codewords[i] * (s.cdf[i + 1] - s.cdf[i]) -
                  2.0 * (s.lpe1[i + 1] - s.lpe1[i]);
    return grad;
}

inline double sup_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline bool strictly_increasing_in_support(const std::vector<double>& x, Interval sup) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) return false;
        if (i > 0 && !(x[i - 1] < x[i])) return false;
        if (std::isfinite(sup.lo) && !(x[i] > sup.lo)) return false;
        if (std::isfinite(sup.hi) && !(x[i] < sup.hi)) return false;
    }
    return true;
}

} // namespace detail

/// Distortion D(Gamma) = sum_i int_{R^i} (x - x^i)^2 f(x) dx evaluated with
/// the closed form in terms of F, M^1 and M^2 at the region edges.
inline double distortion(const Grid1D& g, const Dist1D& dist) {
    const auto b = region_boundaries(g);
    const std::size_t n = g.size();
    std::vector<double> m0(n + 1), m1(n + 1), m2(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        if (b[i] == -std::numeric_limits<double>::infinity()) {
            m0[i] = m1[i] = m2[i] = 0.0;
        } else {
            m0[i] = dist.cdf(b[i]);
            m1[i] = dist.lpe1(b[i]);
            m2[i] = dist.lpe2(b[i]);
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = g.codewords[i];
        total += m2[i + 1] - m2[i] - 2.0 * xi * (m1[i + 1] - m1[i]) +
                 xi * xi * (m0[i + 1] - m0[i]);
    }
    return total;
}

inline std::vector<double> distortion_gradient(const Grid1D& g, const Dist1D& dist) {
    return detail::gradient_from_stats(g, detail::edge_stats(g, dist));
}

/// Tridiagonal Hessian of the distortion. Boundary density terms appear only
/// at interior (moving) edges; clipped or infinite outer edges are fixed and
/// contribute nothing beyond the mass term.
inline Tridiagonal distortion_hessian(const Grid1D& g, const Dist1D& dist) {
    const auto b = region_boundaries(g);
    const std::size_t n = g.size();
    std::vector<double> f(n + 1, 0.0), cdf(n + 1);
    for (std::size_t i = 1; i < n; ++i) f[i] = dist.pdf(b[i]);
    for (std::size_t i = 0; i <= n; ++i) {
        if (b[i] == -std::numeric_limits<double>::infinity())
            cdf[i] = 0.0;
        else if (b[i] == std::numeric_limits<double>::infinity())
            cdf[i] = 1.0;
        else
            cdf[i] = dist.cdf(b[i]);
    }
    Tridiagonal h;
    h.diag.resize(n);
    h.lower.assign(n > 1 ? n - 1 : 0, 0.0);
    h.upper.assign(n > 1 ? n - 1 : 0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = 2.0 * (cdf[i + 1] - cdf[i]);
        if (i + 1 < n) {
            const double t = 0.5 * f[i + 1] * (g.codewords[i] - g.codewords[i + 1]);
            diag += t;
            h.upper[i] = t;
        }
        if (i > 0) {
            const double t = 0.5 * f[i] * (g.codewords[i - 1] - g.codewords[i]);
            diag += t;
            h.lower[i - 1] = t;
        }
        h.diag[i] = diag;
    }
    return h;
}

/// One Lloyd fixed-point sweep: each codeword moves to the probability mass
/// centroid of its region. Throws when a region carries no mass.
inline Grid1D lloyd_step(const Grid1D& g, const Dist1D& dist) {
    const auto s = detail::edge_stats(g, dist);
    Grid1D out = g;
    out.weights.clear();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double mass = s.cdf[i + 1] - s.cdf[i];
        if (!(mass >= 1e-300))
            throw empty_region_error("lloyd_step: region " + std::to_string(i) +
                                     " has no probability mass");
        double c = (s.lpe1[i + 1] - s.lpe1[i]) / mass;
        // The true centroid lies inside its region; cancellation noise in the
        // partial-expectation difference must not push it out.
        if (std::isfinite(s.boundary[i])) c = std::max(c, s.boundary[i]);
        if (std::isfinite(s.boundary[i + 1])) c = std::min(c, s.boundary[i + 1]);
        out.codewords[i] = c;
    }
    return out;
}

/// One Newton-Raphson sweep on the distortion. Throws singular_hessian_error
/// when the Hessian condition monitor trips and step_rejected_error when the
/// proposal breaks codeword ordering or leaves the support.
inline Grid1D newton_step(const Grid1D& g, const Dist1D& dist,
                          double cond_threshold = 1e-12) {
    validate_grid(g);
    const auto stats = detail::edge_stats(g, dist);
    const auto grad = detail::gradient_from_stats(g, stats);
    const Tridiagonal h = distortion_hessian(g, dist);
    const double rc = tridiagonal_rcond(h);
    if (!(rc >= cond_threshold))
        throw singular_hessian_error("newton_step: reciprocal condition " +
                                     std::to_string(rc));
    auto lu = TridiagonalLU::factor(h);
    if (!lu) throw singular_hessian_error("newton_step: factorization failed");
    std::vector<double> delta = grad;
    lu->solve_in_place(delta);
    Grid1D out = g;
    out.weights.clear();
    for (std::size_t i = 0; i < g.size(); ++i) out.codewords[i] -= delta[i];
    if (!detail::strictly_increasing_in_support(out.codewords, g.support))
        throw step_rejected_error("newton_step: proposal not an ordered in-support grid");
    return out;
}

/// Anderson mixing over a history of (x, g(x)) fixed-point pairs. With a
/// single pair this is the plain fixed-point step; a rank-deficient residual
/// system also falls back to the plain step.
inline Grid1D anderson_accelerate(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& history,
    int depth, double ridge = 1e-10) {
    if (history.empty()) throw config_error("anderson_accelerate: empty history");
    if (depth < 1) throw config_error("anderson_accelerate: depth must be >= 1");
    const std::size_t n = history.back().first.size();
    const std::size_t used = std::min<std::size_t>(depth, history.size());
    const std::size_t first = history.size() - used;
    Grid1D out;
    out.codewords = history.back().second;
    if (used == 1) return out;

    const std::size_t k = used - 1; // residual difference columns
    std::vector<std::vector<double>> dr(k, std::vector<double>(n));
    std::vector<std::vector<double>> dg(k, std::vector<double>(n));
    std::vector<double> r_cur(n);
    auto residual = [&](std::size_t idx, std::size_t j) {
        return history[idx].second[j] - history[idx].first[j];
    };
    for (std::size_t j = 0; j < n; ++j) r_cur[j] = residual(history.size() - 1, j);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < n; ++j) {
            dr[c][j] = residual(first + c + 1, j) - residual(first + c, j);
            dg[c][j] = history[first + c + 1].second[j] - history[first + c].second[j];
        }

    // Normal equations with a relative ridge; Cholesky failure signals rank
    // deficiency and yields the plain step.
    std::vector<std::vector<double>> m(k, std::vector<double>(k, 0.0));
    std::vector<double> rhs(k, 0.0);
    double trace = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a; b < k; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += dr[a][j] * dr[b][j];
            m[a][b] = m[b][a] = dot;
        }
        trace += m[a][a];
        for (std::size_t j = 0; j < n; ++j) rhs[a] += dr[a][j] * r_cur[j];
    }
    const double reg = ridge * std::max(trace / static_cast<double>(k), 1e-300);
    for (std::size_t a = 0; a < k; ++a) m[a][a] += reg;

    std::vector<std::vector<double>> chol(k, std::vector<double>(k, 0.0));
    bool ok = true;
    for (std::size_t a = 0; a < k && ok; ++a) {
        double d = m[a][a];
        for (std::size_t c = 0; c < a; ++c) d -= chol[a][c] * chol[a][c];
        if (!(d > 0.0)) {
            ok = false;
            break;
        }
        chol[a][a] = std::sqrt(d);
        for (std::size_t b = a + 1; b < k; ++b) {
            double v = m[b][a];
            for (std::size_t c = 0; c < a; ++c) v -= chol[b][c] * chol[a][c];
            chol[b][a] = v / chol[a][a];
        }
    }
    if (!ok) return out;
    std::vector<double> gamma = rhs;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t c = 0; c < a; ++c) gamma[a] -= chol[a][c] * gamma[c];
        gamma[a] /= chol[a][a];
    }
    for (std::size_t a = k; a-- > 0;) {
        for (std::size_t c = a + 1; c < k; ++c) gamma[a] -= chol[c][a] * gamma[c];
        gamma[a] /= chol[a][a];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < n; ++j) out.codewords[j] -= gamma[c] * dg[c][j];
    return out;
}

/// Quantile starting grid: codewords at levels i/(N+1) of the target law,
/// restricted to the grid support, found by bisection on the cdf.
inline Grid1D quantile_init_grid(const Dist1D& dist, std::size_t n, Interval support) {
    if (n == 0) throw config_error("quantile_init_grid: need at least one codeword");
    const Interval ds = dist.support();
    double lo = std::max(support.lo, ds.lo);
    double hi = std::min(support.hi, ds.hi);
    const double f_lo = std::isfinite(lo) ? dist.cdf(lo) : 0.0;
    const double f_hi = std::isfinite(hi) ? dist.cdf(hi) : 1.0;

    // Finite bracket that covers the quantile range.
    double blo = std::isfinite(lo) ? lo : 0.0;
    double bhi = std::isfinite(hi) ? hi : 1.0;
    if (!std::isfinite(lo)) {
        blo = std::isfinite(hi) ? hi - 1.0 : -1.0;
        double step = 1.0;
        while (dist.cdf(blo) > f_lo + 1e-14 && step < 1e300) {
            blo -= step;
            step *= 2.0;
        }
    }
    if (!std::isfinite(hi)) {
        bhi = std::isfinite(lo) ? lo + 1.0 : 1.0;
        double step = 1.0;
        while (dist.cdf(bhi) < f_hi - 1e-14 && step < 1e300) {
            bhi += step;
            step *= 2.0;
        }
    }

    Grid1D g;
    g.support = support;
    g.codewords.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = f_lo + (f_hi - f_lo) * static_cast<double>(i + 1) /
                                    static_cast<double>(n + 1);
        double a = blo, b = bhi;
        for (int it = 0; it < 200 && (b - a) > 0.0; ++it) {
            const double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b) break;
            if (dist.cdf(mid) < u)
                a = mid;
            else
                b = mid;
        }
        g.codewords[i] = 0.5 * (a + b);
    }
    // Ties can appear when a quantile level falls in a mass gap; nudge them
    // apart to keep the grid strictly increasing and inside the support.
    const double scale = std::max(std::fabs(bhi - blo), 1.0);
    if (std::isfinite(support.lo) && !(g.codewords[0] > support.lo))
        g.codewords[0] = support.lo + 1e-12 * scale;
    for (std::size_t i = 1; i < n; ++i)
        if (!(g.codewords[i] > g.codewords[i - 1]))
            g.codewords[i] = g.codewords[i - 1] + 1e-12 * scale;
    if (std::isfinite(support.hi))
        for (std::size_t i = n; i-- > 0;)
            if (g.codewords[i] >= support.hi)
                g.codewords[i] = support.hi - static_cast<double>(n - i) * 1e-12 * scale;
    return g;
}

/// Hybrid optimizer: Newton-Raphson while the Hessian stays well conditioned
/// and the iteration budget lasts, then Anderson-accelerated Lloyd. Weights
/// are populated from cdf differences over the mass boundaries (all of the
/// law's mass is assigned, including mass beyond a clipped support edge).
inline Grid1D optimize_grid(const Grid1D& init, const Dist1D& dist,
                            const OptimizerConfig& cfg = {},
                            OptimizeReport* report = nullptr) {
    cfg.validate();
    validate_grid(init);
    for (double x : init.codewords)
        if (!init.support.contains(x) || !dist.support().contains(x))
            throw invalid_init_error("optimize_grid: init codeword outside support");

    OptimizeReport rep;
    Grid1D g = init;
    g.weights.clear();

    auto grad_norm = [&](const Grid1D& grid) {
        return detail::sup_norm(distortion_gradient(grid, dist));
    };
    const double g0 = grad_norm(g);
    const double tol = cfg.grad_tol * std::max(1.0, g0);

    bool fell_back = false;
    double gn = g0;
    for (int l = 0; l < cfg.nr_max_iters; ++l) {
        if (gn < tol) break;
        try {
            g = newton_step(g, dist, cfg.cond_threshold);
            ++rep.newton_iters;
        } catch (const singular_hessian_error&) {
            ++rep.hessian_fallbacks;
            fell_back = true;
            break;
        } catch (const step_rejected_error&) {
            ++rep.rejected_steps;
            ++rep.hessian_fallbacks;
            fell_back = true;
            break;
        }
        gn = grad_norm(g);
    }
    rep.converged = gn < tol;

    if (!rep.converged || fell_back) {
        // Anderson-accelerated Lloyd completes the quantization.
        std::vector<std::pair<std::vector<double>, std::vector<double>>> history;
        for (int l = 0; l < cfg.lloyd_max_iters; ++l) {
            const auto s = detail::edge_stats(g, dist);
            gn = detail::sup_norm(detail::gradient_from_stats(g, s));
            if (gn < tol) {
                rep.converged = true;
                break;
            }
            bool merged = false;
            if (g.size() > 1) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double mass = s.cdf[i + 1] - s.cdf[i];
                    // Below ~1e-13 the mass is cancellation noise and the
                    // centroid ratio is meaningless; merge rather than let a
                    // garbage centroid break the codeword ordering.
                    if (!(mass >= 1e-13)) {
                        // Empty region: pull the codeword to the midpoint
                        // toward its nearest neighbour and restart the fixed
                        // point from the merged grid.
                        std::size_t nb;
                        if (i == 0)
                            nb = 1;
                        else if (i + 1 == g.size())
                            nb = i - 1;
                        else
                            nb = (g.codewords[i] - g.codewords[i - 1] <=
                                  g.codewords[i + 1] - g.codewords[i])
                                     ? i - 1
                                     : i + 1;
                        g.codewords[i] = 0.5 * (g.codewords[i] + g.codewords[nb]);
                        ++rep.empty_region_merges;
                        merged = true;
                    }
                }
            }
            ++rep.lloyd_iters;
            if (merged) {
                history.clear();
                continue;
            }
            std::vector<double> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) {
                double c = (s.lpe1[i + 1] - s.lpe1[i]) / (s.cdf[i + 1] - s.cdf[i]);
                // Keep noise-polluted centroids of low-mass regions inside
                // their region (see lloyd_step).
                if (std::isfinite(s.boundary[i])) c = std::max(c, s.boundary[i]);
                if (std::isfinite(s.boundary[i + 1])) c = std::min(c, s.boundary[i + 1]);
                gx[i] = c;
            }
            // Centroids of adjacent low-mass regions can tie in floating
            // point (e.g. several codewords inside a boundary atom); nudge
            // them apart so the fixed point stays an ordered grid.
            bool repaired = false;
            const double span =
                std::max(1.0, std::fabs(gx.back()) + std::fabs(gx.front()));
            for (std::size_t i = 1; i < gx.size(); ++i)
                if (!(gx[i] > gx[i - 1])) {
                    gx[i] = gx[i - 1] + 1e-12 * span;
                    repaired = true;
                }
            if (repaired) {
                ++rep.empty_region_merges;
                history.clear();
                g.codewords = std::move(gx);
                continue;
            }
            history.emplace_back(g.codewords, gx);
            if (history.size() > static_cast<std::size_t>(cfg.anderson_depth) + 1)
                history.erase(history.begin());
            Grid1D next = anderson_accelerate(history, cfg.anderson_depth,
                                              cfg.anderson_ridge);
            if (!detail::strictly_increasing_in_support(next.codewords, g.support))
                next.codewords = std::move(gx); // safeguarded plain Lloyd step
            g.codewords = std::move(next.codewords);
        }
        if (!rep.converged) gn = grad_norm(g);
    }

    // Populate weights over the mass boundaries.
    const auto mb = detail::mass_boundaries(g);
    g.weights.resize(g.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double hi = (i + 1 == g.size()) ? 1.0 : dist.cdf(mb[i + 1]);
        g.weights[i] = std::max(0.0, hi - prev);
        prev = hi;
    }
    rep.grad_norm = gn;
    if (report) *report = rep;
    return g;
}

} // namespace pmq
