#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "pmq/errors.hpp"
#include "pmq/noncentral_chisq.hpp"
#include "pmq/normal.hpp"

namespace pmq {

struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool contains(double x) const { return x >= lo && x <= hi; }
};

/// One-dimensional law exposed through the functions the quantizer needs:
/// distribution function, density, and the first two lower partial
/// expectations M^p(x) = E[X^p 1{X < x}].
class Dist1D {
public:
    virtual ~Dist1D() = default;
    virtual double cdf(double x) const = 0;
    virtual double pdf(double x) const = 0;
    virtual double lpe1(double x) const = 0;
    virtual double lpe2(double x) const = 0;
    virtual double mean() const = 0;
    virtual Interval support() const = 0;
};

/// One Gaussian component of a per-codeword update mixture. A zero scale is
/// allowed and denotes a point mass at the location (degenerate diffusion).
struct GaussComponent {
    double c = 0.0; // location
    double m = 1.0; // scale, >= 0
    double p = 1.0; // weight
};

namespace detail {

inline void normalize_weights(std::vector<double*> weights, const char* what) {
    double sum = 0.0;
    for (double* w : weights) {
        if (*w < 0.0) throw config_error(std::string(what) + ": negative component weight");
        sum += *w;
    }
    if (std::fabs(sum - 1.0) > 1e-8)
        throw config_error(std::string(what) + ": component weights sum to " +
                           std::to_string(sum));
    if (sum != 1.0 && sum > 0.0)
        for (double* w : weights) *w /= sum;
}

} // namespace detail

class GaussianMixture1D final : public Dist1D {
public:
    explicit GaussianMixture1D(std::vector<GaussComponent> comps)
        : comps_(std::move(comps)) {
        if (comps_.empty()) throw config_error("GaussianMixture1D: no components");
        std::vector<double*> ws;
        ws.reserve(comps_.size());
        for (auto& c : comps_) {
            if (c.m < 0.0) throw config_error("GaussianMixture1D: negative scale");
            ws.push_back(&c.p);
        }
        detail::normalize_weights(std::move(ws), "GaussianMixture1D");
        mean_ = 0.0;
        for (const auto& c : comps_) mean_ += c.p * c.c;
    }

    double cdf(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_) {
            if (c.m > 0.0)
                sum += c.p * norm_cdf((x - c.c) / c.m);
            else if (x >= c.c)
                sum += c.p;
        }
        return sum;
    }

    double pdf(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_)
            if (c.m > 0.0) sum += c.p / c.m * norm_pdf((x - c.c) / c.m);
        return sum;
    }

    double lpe1(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_) {
            if (c.m > 0.0) {
                const double z = (x - c.c) / c.m;
                sum += c.p * (-c.m * norm_pdf(z) + c.c * norm_cdf(z));
            } else if (x > c.c) {
                sum += c.p * c.c;
            }
        }
        return sum;
    }

    double lpe2(double x) const override {
        if (x == -std::numeric_limits<double>::infinity()) return 0.0;
        if (x == std::numeric_limits<double>::infinity()) {
            double sum = 0.0;
            for (const auto& c : comps_) sum += c.p * (c.c * c.c + c.m * c.m);
            return sum;
        }
        double sum = 0.0;
        for (const auto& c : comps_) {
            if (c.m > 0.0) {
                const double z = (x - c.c) / c.m;
                sum += c.p * ((c.c * c.c + c.m * c.m) * norm_cdf(z) -
                              c.m * (2.0 * c.c + c.m * z) * norm_pdf(z));
            } else if (x > c.c) {
                sum += c.p * c.c * c.c;
            }
        }
        return sum;
    }

    double mean() const override { return mean_; }
    Interval support() const override { return {}; }

    const std::vector<GaussComponent>& components() const { return comps_; }

private:
    std::vector<GaussComponent> comps_;
    double mean_ = 0.0;
};

/// Gaussian mixture absorbed at the origin: the law of max(X, 0) when X has
/// the raw mixture law. Mass below zero collapses to an atom at 0, which is
/// how an Euler update of a non-negative process meets its boundary. The
/// support's lower edge sits infinitesimally below zero so the atom stays
/// interior to every region computation.
class ZeroAbsorbedGaussianMixture1D final : public Dist1D {
public:
    explicit ZeroAbsorbedGaussianMixture1D(std::vector<GaussComponent> comps)
        : raw_(std::move(comps)) {
        m1_at_zero_ = raw_.lpe1(0.0);
        m2_at_zero_ = raw_.lpe2(0.0);
    }

    double cdf(double x) const override { return x < 0.0 ? 0.0 : raw_.cdf(x); }
    double pdf(double x) const override { return x > 0.0 ? raw_.pdf(x) : 0.0; }
    double lpe1(double x) const override {
        return x <= 0.0 ? 0.0 : raw_.lpe1(x) - m1_at_zero_;
    }
    double lpe2(double x) const override {
        return x <= 0.0 ? 0.0 : raw_.lpe2(x) - m2_at_zero_;
    }
    double mean() const override { return raw_.mean() - m1_at_zero_; }
    Interval support() const override {
        return {-1e-300, std::numeric_limits<double>::infinity()};
    }

    const std::vector<GaussComponent>& components() const { return raw_.components(); }
    double atom_weight() const { return raw_.cdf(0.0); }

private:
    GaussianMixture1D raw_;
    double m1_at_zero_ = 0.0;
    double m2_at_zero_ = 0.0;
};

/// One component of a simplified weak-order 2.0 update mixture: the update
/// is mbar * (Z + sqrt(lambda))^2 + cbar, an affine transform of a 1-dof
/// non-central chi-square.
struct Wo2Component {
    double mbar = 1.0;   // scale, > 0
    double cbar = 0.0;   // shift
    double lambda = 0.0; // non-centrality, >= 0
    double p = 1.0;      // weight
};

class Wo2Mixture1D final : public Dist1D {
public:
    explicit Wo2Mixture1D(std::vector<Wo2Component> comps) : comps_(std::move(comps)) {
        if (comps_.empty()) throw config_error("Wo2Mixture1D: no components");
        std::vector<double*> ws;
        ws.reserve(comps_.size());
        lo_ = std::numeric_limits<double>::infinity();
        for (auto& c : comps_) {
            if (!(c.mbar > 0.0))
                throw unsupported_coefficient_error("Wo2Mixture1D: mbar must be positive");
            if (c.lambda < 0.0)
                throw unsupported_coefficient_error("Wo2Mixture1D: negative lambda");
            lo_ = std::min(lo_, c.cbar);
            ws.push_back(&c.p);
        }
        detail::normalize_weights(std::move(ws), "Wo2Mixture1D");
        mean_ = 0.0;
        for (const auto& c : comps_) mean_ += c.p * (c.mbar * (1.0 + c.lambda) + c.cbar);
    }

    double cdf(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_)
            sum += c.p * ncx2_cdf_1dof((x - c.cbar) / c.mbar, c.lambda);
        return sum;
    }

    double pdf(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_)
            sum += c.p / c.mbar * ncx2_pdf_1dof((x - c.cbar) / c.mbar, c.lambda);
        return sum;
    }

    double lpe1(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_) {
            const double q = (x - c.cbar) / c.mbar;
            sum += c.p * (c.mbar * ncx2_lpe1_1dof(q, c.lambda) +
                          c.cbar * ncx2_cdf_1dof(q, c.lambda));
        }
        return sum;
    }

    double lpe2(double x) const override {
        double sum = 0.0;
        for (const auto& c : comps_) {
            const double q = (x - c.cbar) / c.mbar;
            sum += c.p * (c.mbar * c.mbar * ncx2_lpe2_1dof(q, c.lambda) +
                          2.0 * c.mbar * c.cbar * ncx2_lpe1_1dof(q, c.lambda) +
                          c.cbar * c.cbar * ncx2_cdf_1dof(q, c.lambda));
        }
        return sum;
    }

    double mean() const override { return mean_; }
    Interval support() const override {
        return {lo_, std::numeric_limits<double>::infinity()};
    }

    const std::vector<Wo2Component>& components() const { return comps_; }

private:
    std::vector<Wo2Component> comps_;
    double mean_ = 0.0;
    double lo_ = -std::numeric_limits<double>::infinity();
};

} // namespace pmq
