#pragma once

#include <cmath>

#include "pmq/normal.hpp"

namespace pmq {

/// Distribution function of the non-central chi-square with one degree of
/// freedom: P((Z + sqrt(lambda))^2 <= x). Uses the exact two-Phi identity.
inline double ncx2_cdf_1dof(double x, double lambda) {
    if (!(x > 0.0)) return 0.0;
    const double r = std::sqrt(x);
    const double s = std::sqrt(lambda);
    return norm_cdf(r - s) - norm_cdf(-r - s);
}

/// Density of the non-central chi-square with one degree of freedom.
/// Diverges like 1/sqrt(x) at the origin; zero for x <= 0.
inline double ncx2_pdf_1dof(double x, double lambda) {
    if (!(x > 0.0)) return 0.0;
    const double r = std::sqrt(x);
    const double s = std::sqrt(lambda);
    return (norm_pdf(r - s) + norm_pdf(r + s)) / (2.0 * r);
}

/// First lower partial expectation E[Y 1{Y < x}] for Y ~ chi2(1, lambda).
/// Closed form from integrating (z + sqrt(lambda))^2 against the normal
/// density between the two roots; tends to 1 + lambda as x -> inf.
inline double ncx2_lpe1_1dof(double x, double lambda) {
    if (!(x > 0.0)) return 0.0;
    if (std::isinf(x)) return 1.0 + lambda;
    const double r = std::sqrt(x);
    const double s = std::sqrt(lambda);
    const double f = norm_cdf(r - s) - norm_cdf(-r - s);
    return (1.0 + lambda) * f - (r + s) * norm_pdf(r - s) - (r - s) * norm_pdf(r + s);
}

/// Second lower partial expectation E[Y^2 1{Y < x}] for Y ~ chi2(1, lambda).
/// Tends to 3 + 6 lambda + lambda^2 as x -> inf.
inline double ncx2_lpe2_1dof(double x, double lambda) {
    if (!(x > 0.0)) return 0.0;
    if (std::isinf(x)) return 3.0 + 6.0 * lambda + lambda * lambda;
    const double r = std::sqrt(x);
    const double s = std::sqrt(lambda);
    const double a = -r - s;
    const double b = r - s;
    const double moment = 3.0 + 6.0 * lambda + lambda * lambda;
    auto poly = [s, lambda](double z) {
        return ((z + 4.0 * s) * z + 3.0 + 6.0 * lambda) * z + 8.0 * s + 4.0 * s * lambda;
    };
    return moment * (norm_cdf(b) - norm_cdf(a)) -
           (norm_pdf(b) * poly(b) - norm_pdf(a) * poly(a));
}

} // namespace pmq
