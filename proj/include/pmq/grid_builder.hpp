#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pmq/dist1d.hpp"
#include "pmq/errors.hpp"
#include "pmq/grid1d.hpp"
#include "pmq/joint_law.hpp"
#include "pmq/quantizer.hpp"
#include "pmq/sde_models.hpp"

namespace pmq {

enum class Scheme { euler, wo2 };

inline const char* scheme_name(Scheme s) {
    return s == Scheme::euler ? "euler" : "wo2";
}

/// One time slice of a product quantization grid: the per-dimension marginal
/// quantizers, the joint weight tensor over the product codewords (flattened
/// with dimension 0 major) and the transition matrix from the previous step's
/// product codewords (rows) to this step's (columns).
struct ProductGridStep {
    int index = 0;
    std::vector<Grid1D> marginals;
    std::vector<double> joint;
    std::vector<double> transition; // empty at step 0
    std::vector<OptimizeReport> reports;
    std::vector<double> distortions;

    std::size_t joint_size() const {
        std::size_t n = 1;
        for (const auto& g : marginals) n *= g.size();
        return n;
    }

    /// Codeword coordinates for flat joint index i.
    std::vector<double> codeword(std::size_t i) const {
        std::vector<double> x(marginals.size());
        for (std::size_t n = marginals.size(); n-- > 0;) {
            const std::size_t sz = marginals[n].size();
            x[n] = marginals[n].codewords[i % sz];
            i /= sz;
        }
        return x;
    }

    /// Marginal sums of the joint tensor along all other axes.
    std::vector<double> joint_marginal(std::size_t dim) const {
        std::vector<double> out(marginals[dim].size(), 0.0);
        const std::size_t total = joint_size();
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t rest = i;
            std::size_t idx = 0;
            for (std::size_t n = marginals.size(); n-- > 0;) {
                const std::size_t sz = marginals[n].size();
                if (n == dim) idx = rest % sz;
                rest /= sz;
            }
            out[idx] += joint[i];
        }
        return out;
    }
};

struct GridSequence {
    std::string model_id;
    std::string model_fingerprint;
    Schedule schedule;
    std::vector<Scheme> schemes;
    std::vector<ProductGridStep> steps; // 0..K

    int total_hessian_fallbacks() const {
        int n = 0;
        for (const auto& s : steps)
            for (const auto& r : s.reports) n += r.hessian_fallbacks;
        return n;
    }
    int total_empty_region_merges() const {
        int n = 0;
        for (const auto& s : steps)
            for (const auto& r : s.reports) n += r.empty_region_merges;
        return n;
    }
};

struct BuildOptions {
    OptimizerConfig optimizer;
    bool with_transitions = true;
    int threads = 1;
};

namespace detail {

inline void parallel_rows(std::size_t rows, int threads,
                          const std::function<void(std::size_t, std::size_t)>& work) {
    if (threads <= 1 || rows < 2) {
        work(0, rows);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(threads, rows);
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const std::size_t chunk = (rows + nt - 1) / nt;
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t lo = t * chunk;
        const std::size_t hi = std::min(rows, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(work, lo, hi);
    }
    for (auto& th : pool) th.join();
}

} // namespace detail

/// Per-component conditional law of one product-grid step: dimension-wise
/// parameters evaluated at every previous joint codeword, plus the previous
/// joint weights. This is the mixture the next grids quantize and the
/// conditional law behind transition rows.
struct StepLaw {
    struct DimParams {
        double c = 0.0;      // location (Euler) or cbar (WO2)
        double m = 0.0;      // scale (Euler, may be 0) or mbar (WO2)
        double lambda = 0.0; // WO2 non-centrality
    };
    int dim = 1;
    std::vector<Scheme> schemes;
    double rho = 0.0; // correlation between dims 0 and 1 when dim == 2
    bool identity_correlation = true;
    std::vector<std::vector<DimParams>> comps; // [component][dim]
    std::vector<double> weights;               // previous joint weights

    std::size_t size() const { return comps.size(); }
};

/// Evaluate the Euler/WO2 per-dimension coefficients at every joint codeword
/// of the previous step.
inline StepLaw assemble_step_law(const SdeModel& model, const ProductGridStep& prev,
                                 const std::vector<Scheme>& schemes, double dt) {
    if (model.dim != static_cast<int>(prev.marginals.size()))
        throw config_error("assemble_step_law: dimension mismatch");
    StepLaw law;
    law.dim = model.dim;
    law.schemes = schemes;
    law.identity_correlation = true;
    for (int i = 0; i < model.dim; ++i)
        for (int j = i + 1; j < model.dim; ++j)
            if (model.corr(i, j) != 0.0) law.identity_correlation = false;
    if (model.dim == 2) law.rho = model.corr(0, 1);
    if (model.dim > 2 && !law.identity_correlation)
        throw config_error("assemble_step_law: correlated joint laws supported up to d=2");
    for (int n = 0; n < model.dim; ++n) {
        if (schemes[n] == Scheme::wo2 && !model.wo2_capable(n))
            throw config_error("assemble_step_law: WO2 scheme on a non-autonomous dimension");
        if (schemes[n] == Scheme::wo2 && model.dim == 2 && n == 0)
            throw config_error("assemble_step_law: dimension 1 must use the Euler scheme");
    }

    const std::size_t total = prev.joint_size();
    law.comps.resize(total, std::vector<StepLaw::DimParams>(model.dim));
    law.weights = prev.joint;
    for (std::size_t i = 0; i < total; ++i) {
        const auto x = prev.codeword(i);
        for (int n = 0; n < model.dim; ++n) {
            StepLaw::DimParams& p = law.comps[i][n];
            if (schemes[n] == Scheme::euler) {
                auto [c, m] = euler_coeffs(model, x, n, dt);
                p.c = c;
                p.m = m;
            } else {
                const auto w = wo2_coeffs(model, x[n], n, dt);
                if (!(w.mbar > 0.0))
                    throw unsupported_coefficient_error(
                        "assemble_step_law: non-positive mbar");
                p.c = w.cbar;
                p.m = w.mbar;
                p.lambda = w.lambda;
            }
        }
    }
    return law;
}

/// Marginal mixture of dimension n implied by a step law. For a dimension
/// whose coefficients depend only on its own coordinate the components are
/// aggregated over that coordinate, which keeps the marginal chain of an
/// autonomous process independent of the other dimensions.
inline std::unique_ptr<Dist1D> marginal_update_dist(const SdeModel& model,
                                                    const ProductGridStep& prev,
                                                    int n, Scheme scheme, double dt) {
    const bool aggregate = model.dim == 1 || model.wo2_capable(n);
    if (scheme == Scheme::wo2 && !model.wo2_capable(n))
        throw config_error("marginal_update_dist: WO2 scheme on a non-autonomous dimension");

    // An Euler update of a process bounded below at zero is absorbed at the
    // boundary: mass that the Gaussian update puts below zero becomes an atom
    // at the origin rather than being ignored.
    auto make_euler = [&](std::vector<GaussComponent> comps) -> std::unique_ptr<Dist1D> {
        if (model.lower_bound[n] == 0.0)
            return std::make_unique<ZeroAbsorbedGaussianMixture1D>(std::move(comps));
        return std::make_unique<GaussianMixture1D>(std::move(comps));
    };

    if (aggregate) {
        const auto& grid = prev.marginals[n];
        const std::vector<double>& w =
            grid.weights.empty() ? prev.joint_marginal(n) : grid.weights;
        if (scheme == Scheme::euler) {
            std::vector<GaussComponent> comps;
            comps.reserve(grid.size());
            for (std::size_t i = 0; i < grid.size(); ++i) {
                if (!(w[i] > 0.0)) continue;
                std::vector<double> x(model.dim, 0.0);
                x[n] = grid.codewords[i];
                auto [c, m] = euler_coeffs(model, x, n, dt);
                comps.push_back({c, m, w[i]});
            }
            return make_euler(std::move(comps));
        }
        std::vector<Wo2Component> comps;
        comps.reserve(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (!(w[i] > 0.0)) continue;
            const auto c = wo2_coeffs(model, grid.codewords[i], n, dt);
            comps.push_back({c.mbar, c.cbar, c.lambda, w[i]});
        }
        return std::make_unique<Wo2Mixture1D>(std::move(comps));
    }

    // Non-autonomous dimension: enumerate all previous joint codewords.
    const std::size_t total = prev.joint_size();
    std::vector<GaussComponent> comps;
    comps.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        if (!(prev.joint[i] > 0.0)) continue;
        const auto x = prev.codeword(i);
        auto [c, m] = euler_coeffs(model, x, n, dt);
        comps.push_back({c, m, prev.joint[i]});
    }
    return make_euler(std::move(comps));
}

namespace detail {

inline double euler_edge_cdf(const StepLaw::DimParams& p, double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    if (p.m > 0.0) return norm_cdf((x - p.c) / p.m);
    return x >= p.c ? 1.0 : 0.0;
}

inline double wo2_edge_cdf(const StepLaw::DimParams& p, double x) {
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    return ncx2_cdf_1dof((x - p.c) / p.m, p.lambda);
}

inline double edge_cdf(Scheme scheme, const StepLaw::DimParams& p, double x) {
    return scheme == Scheme::euler ? euler_edge_cdf(p, x) : wo2_edge_cdf(p, x);
}

/// Rectangle probabilities of component `comp` over the product cells of the
/// next step. Writes joint_size(next) values into `row`.
inline void component_rectangles(const StepLaw& law, std::size_t comp,
                                 const std::vector<std::vector<double>>& bounds,
                                 double* row) {
    const auto& cp = law.comps[comp];
    if (law.dim == 1) {
        const auto& b = bounds[0];
        const std::size_t n = b.size() - 1;
        double prev = edge_cdf(law.schemes[0], cp[0], b[0]);
        for (std::size_t j = 0; j < n; ++j) {
            const double cur = edge_cdf(law.schemes[0], cp[0], b[j + 1]);
            row[j] = cur - prev;
            prev = cur;
        }
        return;
    }
    if (law.dim == 2 && !law.identity_correlation) {
        // Corner-cached bivariate evaluation.
        JointLaw2D::Component jc;
        jc.cx = cp[0].c;
        jc.mx = cp[0].m;
        jc.cy = cp[1].c;
        jc.my = cp[1].m;
        jc.lambda = cp[1].lambda;
        jc.p = 1.0;
        const JointVariant variant = law.schemes[1] == Scheme::wo2
                                         ? JointVariant::euler_wo2
                                         : JointVariant::euler_euler;
        const auto& bx = bounds[0];
        const auto& by = bounds[1];
        const std::size_t n0 = bx.size() - 1;
        const std::size_t n1 = by.size() - 1;
        std::vector<double> corners((n0 + 1) * (n1 + 1));
        for (std::size_t r = 0; r <= n0; ++r)
            for (std::size_t s = 0; s <= n1; ++s)
                corners[r * (n1 + 1) + s] =
                    joint_component_cdf(jc, variant, law.rho, bx[r], by[s]);
        for (std::size_t r = 0; r < n0; ++r)
            for (std::size_t s = 0; s < n1; ++s)
                row[r * n1 + s] = corners[(r + 1) * (n1 + 1) + s + 1] -
                                  corners[r * (n1 + 1) + s + 1] -
                                  corners[(r + 1) * (n1 + 1) + s] +
                                  corners[r * (n1 + 1) + s];
        return;
    }
    // Independent drivers: product of per-dimension interval probabilities.
    std::size_t total = 1;
    std::vector<std::vector<double>> probs(law.dim);
    for (int n = 0; n < law.dim; ++n) {
        const auto& b = bounds[n];
        probs[n].resize(b.size() - 1);
        double prev = edge_cdf(law.schemes[n], cp[n], b[0]);
        for (std::size_t j = 0; j + 1 < b.size(); ++j) {
            const double cur = edge_cdf(law.schemes[n], cp[n], b[j + 1]);
            probs[n][j] = cur - prev;
            prev = cur;
        }
        total *= probs[n].size();
    }
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        double p = 1.0;
        for (int n = law.dim; n-- > 0;) {
            const std::size_t sz = probs[n].size();
            p *= probs[n][rest % sz];
            rest /= sz;
        }
        row[i] = p;
    }
}

} // namespace detail

/// Transition matrix between consecutive product grids: row i holds the
/// conditional probabilities of landing in each next-step product cell given
/// the previous joint codeword i. Rows are clipped at zero and renormalized,
/// so they are exactly stochastic.
inline std::vector<double> transition_matrix(const StepLaw& law,
                                             const std::vector<Grid1D>& next_marginals,
                                             int threads = 1) {
    std::vector<std::vector<double>> bounds(next_marginals.size());
    for (std::size_t n = 0; n < next_marginals.size(); ++n)
        bounds[n] = detail::mass_boundaries(next_marginals[n]);
    std::size_t cols = 1;
    for (const auto& g : next_marginals) cols *= g.size();
    const std::size_t rows = law.size();
    std::vector<double> t(rows * cols);
    detail::parallel_rows(rows, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* row = t.data() + i * cols;
            detail::component_rectangles(law, i, bounds, row);
            double sum = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
                if (row[j] < 0.0) row[j] = 0.0;
                sum += row[j];
            }
            if (sum > 0.0 && sum != 1.0)
                for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
        }
    });
    return t;
}

/// Joint weights of the next step: law of total probability over the
/// previous joint weights and the transition rows.
inline std::vector<double> propagate_joint_weights(const std::vector<double>& prev_joint,
                                                   const std::vector<double>& transition,
                                                   std::size_t cols) {
    std::vector<double> out(cols, 0.0);
    for (std::size_t i = 0; i < prev_joint.size(); ++i) {
        const double w = prev_joint[i];
        if (!(w > 0.0)) continue;
        const double* row = transition.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] += w * row[j];
    }
    return out;
}

/// Product Markovian quantization: marginal grids per dimension via the
/// hybrid optimizer, then joint weights and transition matrices over the
/// product cells. In one dimension this is exactly recursive marginal
/// quantization.
inline GridSequence pmq_build(const SdeModel& model, const Schedule& schedule,
                              const std::vector<Scheme>& schemes,
                              const BuildOptions& options = {}) {
    schedule.validate(model.dim);
    if (static_cast<int>(schemes.size()) != model.dim)
        throw config_error("pmq_build: one scheme per dimension required");
    options.optimizer.validate();
    const double dt = schedule.dt();

    GridSequence seq;
    seq.model_id = model.id;
    seq.model_fingerprint = model.params_fingerprint;
    seq.schedule = schedule;
    seq.schemes = schemes;
    seq.steps.resize(schedule.steps + 1);

    ProductGridStep& s0 = seq.steps[0];
    s0.index = 0;
    s0.marginals.resize(model.dim);
    for (int n = 0; n < model.dim; ++n) {
        s0.marginals[n].codewords = {model.x0[n]};
        s0.marginals[n].weights = {1.0};
        s0.marginals[n].support = {model.lower_bound[n],
                                   std::numeric_limits<double>::infinity()};
    }
    s0.joint = {1.0};

    for (int k = 0; k < schedule.steps; ++k) {
        const ProductGridStep& prev = seq.steps[k];
        ProductGridStep& cur = seq.steps[k + 1];
        cur.index = k + 1;
        cur.marginals.resize(model.dim);
        cur.reports.resize(model.dim);
        cur.distortions.resize(model.dim);

        for (int n = 0; n < model.dim; ++n) {
            auto dist = marginal_update_dist(model, prev, n, schemes[n], dt);
            // The Euler update law carries the state-space boundary itself
            // (absorption at zero). A WO2 support edge below the state-space
            // floor is clipped so codewords stay inside the model's domain.
            Interval support = dist->support();
            if (schemes[n] == Scheme::wo2)
                support.lo = std::max(model.lower_bound[n], support.lo);
            const std::size_t want =
                static_cast<std::size_t>(schedule.codewords_at(k + 1, n));
            Grid1D init;
            bool warm = k > 0 && prev.marginals[n].size() == want;
            if (warm) {
                init = prev.marginals[n];
                init.weights.clear();
                init.support = support;
                warm = detail::strictly_increasing_in_support(init.codewords, support);
            }
            if (!warm) init = quantile_init_grid(*dist, want, support);
            cur.marginals[n] =
                optimize_grid(init, *dist, options.optimizer, &cur.reports[n]);
            cur.distortions[n] = distortion(cur.marginals[n], *dist);
        }

        const StepLaw law = assemble_step_law(model, prev, schemes, dt);
        std::vector<double> trans =
            transition_matrix(law, cur.marginals, options.threads);
        cur.joint = propagate_joint_weights(prev.joint, trans, cur.joint_size());
        if (options.with_transitions) cur.transition = std::move(trans);
    }
    return seq;
}

/// One-dimensional recursive marginal quantization.
inline GridSequence rmq_1d(const SdeModel& model, const Schedule& schedule,
                           Scheme scheme, const BuildOptions& options = {}) {
    if (model.dim != 1) throw config_error("rmq_1d: model must be one-dimensional");
    return pmq_build(model, schedule, {scheme}, options);
}

} // namespace pmq
