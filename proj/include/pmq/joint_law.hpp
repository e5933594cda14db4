#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "pmq/bivariate_normal.hpp"
#include "pmq/errors.hpp"
#include "pmq/noncentral_chisq.hpp"
#include "pmq/normal.hpp"

namespace pmq {

enum class JointVariant { euler_euler, euler_wo2 };

/// Joint law of one product-grid update step in two dimensions. Dimension 1
/// always carries an Euler (Gaussian) update; dimension 2 carries either an
/// Euler update or a weak-order-2.0 update (affine non-central chi-square)
/// driven by a Gaussian correlated with dimension 1's driver.
struct JointLaw2D {
    struct Component {
        double cx = 0.0, mx = 1.0; // dim-1 Euler location/scale
        // dim 2: Euler (cy, my) or WO2 (cbar, mbar, lambda)
        double cy = 0.0, my = 1.0;
        double lambda = 0.0;
        double p = 1.0;
    };

    JointVariant variant = JointVariant::euler_euler;
    double rho = 0.0;
    std::vector<Component> components;

    void validate() const {
        if (!(rho > -1.0 && rho < 1.0))
            throw config_error("JointLaw2D: rho must lie in (-1, 1)");
        double sum = 0.0;
        for (const auto& c : components) {
            if (c.p < 0.0) throw config_error("JointLaw2D: negative weight");
            if (variant == JointVariant::euler_wo2 && !(c.my > 0.0))
                throw unsupported_coefficient_error("JointLaw2D: mbar must be positive");
            sum += c.p;
        }
        if (std::fabs(sum - 1.0) > 1e-8)
            throw config_error("JointLaw2D: weights sum to " + std::to_string(sum));
    }
};

namespace detail {

inline double standardized(double x, double c, double m) {
    if (std::isinf(x)) return x;
    if (m > 0.0) return (x - c) / m;
    // Point mass at c: the standardized argument collapses to a sign.
    if (x >= c) return std::numeric_limits<double>::infinity();
    return -std::numeric_limits<double>::infinity();
}

/// P(U1 <= x, U2 <= y) for one component.
inline double joint_component_cdf(const JointLaw2D::Component& c, JointVariant variant,
                                  double rho, double x, double y) {
    const double zx = standardized(x, c.cx, c.mx);
    if (variant == JointVariant::euler_euler) {
        const double zy = standardized(y, c.cy, c.my);
        return bvn_cdf(zx, zy, rho); // infinite arguments handled exactly
    }
    // Euler-WO2: U2 = mbar (Z2 + sqrt(lambda))^2 + cbar with corr(Z1,Z2)=rho.
    if (zx == -std::numeric_limits<double>::infinity()) return 0.0;
    double q;
    if (y == std::numeric_limits<double>::infinity())
        q = std::numeric_limits<double>::infinity();
    else
        q = (y - c.cy) / c.my;
    if (!(q > 0.0)) return 0.0;
    if (std::isinf(q)) return std::isinf(zx) ? 1.0 : norm_cdf(zx);
    const double root = std::sqrt(q);
    const double shift = std::sqrt(c.lambda);
    if (std::isinf(zx)) return norm_cdf(root - shift) - norm_cdf(-root - shift);
    return bvn_cdf(zx, -shift + root, rho) - bvn_cdf(zx, -shift - root, rho);
}

} // namespace detail

/// Mixture joint distribution function F(x, y) of the two-dimensional update.
inline double joint_cdf_2d(const JointLaw2D& law, double x, double y) {
    double sum = 0.0;
    for (const auto& c : law.components)
        sum += c.p * detail::joint_component_cdf(c, law.variant, law.rho, x, y);
    return sum;
}

} // namespace pmq
