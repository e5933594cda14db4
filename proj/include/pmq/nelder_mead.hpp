#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "pmq/errors.hpp"

namespace pmq {

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool budget_exhausted = false;
    std::vector<double> trace; // best objective after each evaluation
};

/// Standard Nelder-Mead simplex search (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2) with an evaluation budget. Returns the best
/// point seen; a stalled simplex (size below x_tol) stops early.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    std::vector<double> x0, double initial_step,
                                    int max_evals, double f_tol = 1e-12,
                                    double x_tol = 1e-10) {
    if (x0.empty()) throw config_error("nelder_mead: empty start point");
    const std::size_t n = x0.size();
    NelderMeadResult res;

    std::vector<std::vector<double>> pts;
    std::vector<double> vals;
    auto eval = [&](const std::vector<double>& x) {
        const double v = f(x);
        ++res.evaluations;
        if (res.trace.empty() || v < res.trace.back())
            res.trace.push_back(v);
        else
            res.trace.push_back(res.trace.back());
        return v;
    };

    pts.push_back(x0);
    vals.push_back(eval(x0));
    if (res.evaluations >= max_evals) {
        res.x = pts[0];
        res.value = vals[0];
        res.budget_exhausted = true;
        return res;
    }
    for (std::size_t i = 0; i < n && res.evaluations < max_evals; ++i) {
        auto p = x0;
        p[i] += initial_step != 0.0 ? initial_step : 0.1;
        pts.push_back(p);
        vals.push_back(eval(p));
    }
    while (pts.size() < n + 1) { // budget ran out while seeding
        pts.push_back(pts[0]);
        vals.push_back(vals[0]);
    }

    auto order = [&]() {
        std::vector<std::size_t> idx(pts.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> p2(pts.size());
        std::vector<double> v2(pts.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            p2[i] = pts[idx[i]];
            v2[i] = vals[idx[i]];
        }
        pts = std::move(p2);
        vals = std::move(v2);
    };

    order();
    while (res.evaluations < max_evals) {
        // Termination on simplex collapse.
        double spread = 0.0, width = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            spread = std::max(spread, std::fabs(vals[i] - vals[0]));
            for (std::size_t j = 0; j < n; ++j)
                width = std::max(width, std::fabs(pts[i][j] - pts[0][j]));
        }
        if (spread < f_tol && width < x_tol) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / n;

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j)
                p[j] = centroid[j] + t * (pts[n][j] - centroid[j]);
            return p;
        };

        const auto refl = blend(-1.0);
        const double fr = eval(refl);
        if (fr < vals[0]) {
            if (res.evaluations >= max_evals) {
                pts[n] = refl;
                vals[n] = fr;
                order();
                break;
            }
            const auto exp_p = blend(-2.0);
            const double fe = eval(exp_p);
            if (fe < fr) {
                pts[n] = exp_p;
                vals[n] = fe;
            } else {
                pts[n] = refl;
                vals[n] = fr;
            }
        } else if (fr < vals[n - 1]) {
            pts[n] = refl;
            vals[n] = fr;
        } else {
            if (res.evaluations >= max_evals) break;
            const bool outside = fr < vals[n];
            const auto con = blend(outside ? -0.5 : 0.5);
            const double fc = eval(con);
            if (fc < std::min(fr, vals[n])) {
                pts[n] = con;
                vals[n] = fc;
            } else {
                // Shrink toward the best vertex.
                for (std::size_t i = 1; i <= n && res.evaluations < max_evals; ++i) {
                    for (std::size_t j = 0; j < n; ++j)
                        pts[i][j] = pts[0][j] + 0.5 * (pts[i][j] - pts[0][j]);
                    vals[i] = eval(pts[i]);
                }
            }
        }
        order();
    }
    order();
    res.budget_exhausted = res.evaluations >= max_evals;
    res.x = pts[0];
    res.value = vals[0];
    return res;
}

} // namespace pmq
