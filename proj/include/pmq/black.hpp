#pragma once

#include <algorithm>
#include <cmath>

#include "pmq/errors.hpp"
#include "pmq/normal.hpp"

namespace pmq {

/// Black-76 price on a forward F with discount factor df.
inline double black_price(double F, double K, double T, double vol, double df,
                          bool call = true) {
    if (!(F > 0.0) || !(K > 0.0)) throw parameter_domain_error("black_price: F, K > 0");
    if (T <= 0.0 || vol <= 0.0) {
        const double intrinsic = call ? std::max(F - K, 0.0) : std::max(K - F, 0.0);
        return df * intrinsic;
    }
    const double sd = vol * std::sqrt(T);
    const double d1 = std::log(F / K) / sd + 0.5 * sd;
    const double d2 = d1 - sd;
    if (call) return df * (F * norm_cdf(d1) - K * norm_cdf(d2));
    return df * (K * norm_cdf(-d2) - F * norm_cdf(-d1));
}

inline double black_vega(double F, double K, double T, double vol, double df) {
    if (T <= 0.0 || vol <= 0.0) return 0.0;
    const double sd = vol * std::sqrt(T);
    const double d1 = std::log(F / K) / sd + 0.5 * sd;
    return df * F * norm_pdf(d1) * std::sqrt(T);
}

/// Implied Black volatility by safeguarded Newton iteration with a bisection
/// bracket; converges to 1e-10 in vol. Prices at the intrinsic bound return
/// the lower bracket, prices outside the no-arbitrage band throw.
inline double implied_vol(double price, double F, double K, double T, double df,
                          bool call = true) {
    if (!(T > 0.0)) throw parameter_domain_error("implied_vol: T > 0 required");
    const double intrinsic = df * (call ? std::max(F - K, 0.0) : std::max(K - F, 0.0));
    const double upper = df * (call ? F : K);
    if (price < intrinsic - 1e-14 || price >= upper)
        throw no_solution_error("implied_vol: price outside no-arbitrage bounds");
    double lo = 1e-9, hi = 10.0;
    if (price <= black_price(F, K, T, lo, df, call)) return lo;
    while (black_price(F, K, T, hi, df, call) < price) {
        hi *= 2.0;
        if (hi > 1e4) throw no_solution_error("implied_vol: no bracket");
    }
    double vol = std::clamp(std::sqrt(2.0 * M_PI / T) * price / (df * F), lo, hi);
    for (int it = 0; it < 100; ++it) {
        const double diff = black_price(F, K, T, vol, df, call) - price;
        if (diff > 0.0)
            hi = vol;
        else
            lo = vol;
        const double vega = black_vega(F, K, T, vol, df);
        double next = vol - diff / vega;
        if (!(vega > 1e-30) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
        if (std::fabs(next - vol) < 1e-10) return next;
        vol = next;
    }
    return vol;
}

} // namespace pmq
