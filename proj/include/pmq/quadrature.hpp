#pragma once

#include <cmath>
#include <functional>

#include "pmq/errors.hpp"

namespace pmq {

namespace detail {

struct LobattoState {
    const std::function<double(double)>* f;
    double tol_per_unit; // absolute tolerance allocated per unit length
    double err_accum = 0.0;
};

// Gander-Gautschi adaptive Lobatto step: 4-point Lobatto rule against its
// 7-point Kronrod extension on [a, b].
inline double lobatto_step(LobattoState& st, double a, double b, double fa, double fb,
                           int depth) {
    static const double alpha = std::sqrt(2.0 / 3.0);
    static const double beta = 1.0 / std::sqrt(5.0);
    const double h = 0.5 * (b - a);
    const double m = 0.5 * (a + b);
    const double mll = m - alpha * h;
    const double ml = m - beta * h;
    const double mr = m + beta * h;
    const double mrr = m + alpha * h;
    const auto& f = *st.f;
    const double fmll = f(mll), fml = f(ml), fm = f(m), fmr = f(mr), fmrr = f(mrr);
    const double i2 = h / 6.0 * (fa + fb + 5.0 * (fml + fmr));
    const double i1 = h / 1470.0 *
                      (77.0 * (fa + fb) + 432.0 * (fmll + fmrr) + 625.0 * (fml + fmr) +
                       672.0 * fm);
    const double err = std::fabs(i1 - i2);
    if (err <= st.tol_per_unit * (b - a) || depth <= 0 || mll <= a || b <= mrr) {
        if (depth <= 0) st.err_accum += err;
        return i1;
    }
    return lobatto_step(st, a, mll, fa, fmll, depth - 1) +
           lobatto_step(st, mll, ml, fmll, fml, depth - 1) +
           lobatto_step(st, ml, m, fml, fm, depth - 1) +
           lobatto_step(st, m, mr, fm, fmr, depth - 1) +
           lobatto_step(st, mr, mrr, fmr, fmrr, depth - 1) +
           lobatto_step(st, mrr, b, fmrr, fb, depth - 1);
}

} // namespace detail

/// Adaptive Gauss-Lobatto quadrature with an absolute target. Throws a
/// quadrature_error carrying the achieved bound when refinement bottoms out
/// before reaching the target.
inline double adaptive_lobatto(const std::function<double(double)>& f, double a,
                               double b, double abs_tol, int max_depth = 40) {
    if (a == b) return 0.0;
    detail::LobattoState st;
    st.f = &f;
    st.tol_per_unit = abs_tol / std::fabs(b - a);
    const double result = detail::lobatto_step(st, a, b, f(a), f(b), max_depth);
    if (st.err_accum > abs_tol)
        throw quadrature_error("adaptive_lobatto: target accuracy not reached",
                               st.err_accum);
    return result;
}

} // namespace pmq
