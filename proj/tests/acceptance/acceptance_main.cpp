// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Every tolerance is pinned here; nothing is calibrated at run time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pmq/black.hpp"
#include "pmq/calibration.hpp"
#include "pmq/grid_builder.hpp"
#include "pmq/heston_cf.hpp"
#include "pmq/monte_carlo.hpp"
#include "pmq/pricing.hpp"
#include "pmq/quantizer.hpp"
#include "pmq/sde_models.hpp"

using namespace pmq;

namespace {

constexpr int kThreads = 2;

struct Outcome {
    bool pass = true;
    std::string detail;
};

using CriterionFn = std::function<Outcome()>;

struct Shared {
    // Heston benchmark setup.
    const HestonParams hp{100.0, 0.09, 2.0, 0.09, 0.6, -0.3, 0.05};
    SdeModel heston_model = heston(100.0, 0.09, 2.0, 0.09, 0.6, 0.05, -0.3);
    Schedule heston_sched{1.0, 12, {30, 15}};
    GridSequence heston_ee, heston_wo2;

    // SABR benchmark setup (forward grid).
    const double sabr_rate = 0.10;
    SdeModel sabr_model = sabr(100.0 * std::exp(0.10), 0.4, 0.9, 0.4, -0.3);
    Schedule sabr_sched{1.0, 12, {60, 30}};
    GridSequence sabr_grids;

    void build() {
        BuildOptions opts;
        opts.threads = kThreads;
        heston_ee = pmq_build(heston_model, heston_sched, {Scheme::euler, Scheme::euler}, opts);
        heston_wo2 = pmq_build(heston_model, heston_sched, {Scheme::euler, Scheme::wo2}, opts);
        sabr_grids = pmq_build(sabr_model, sabr_sched, {Scheme::euler, Scheme::wo2}, opts);
    }
};

std::vector<int> all_steps(int k) {
    std::vector<int> v(k);
    for (int i = 0; i < k; ++i) v[i] = i + 1;
    return v;
}

GaussianMixture1D random_mixture(std::mt19937_64& rng, int max_comps = 8) {
    std::uniform_int_distribution<int> nc(1, max_comps);
    std::uniform_real_distribution<double> uc(-3.0, 3.0);
    std::uniform_real_distribution<double> um(0.1, 1.2);
    std::uniform_real_distribution<double> up(0.1, 1.0);
    const int n = nc(rng);
    std::vector<GaussComponent> comps(n);
    double total = 0.0;
    for (auto& c : comps) {
        c.c = uc(rng);
        c.m = um(rng);
        c.p = up(rng);
        total += c.p;
    }
    for (auto& c : comps) c.p /= total;
    return GaussianMixture1D(std::move(comps));
}

// Overlapping mixtures keep the distortion effectively single-basin, so the
// Newton limit and the Lloyd limit describe the same optimum; widely split
// components would let Newton legitimately settle on a different stationary
// point than the descent method.
GaussianMixture1D overlapping_mixture(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nc(1, 8);
    std::uniform_real_distribution<double> uc(-1.5, 1.5);
    std::uniform_real_distribution<double> um(0.4, 1.2);
    std::uniform_real_distribution<double> up(0.1, 1.0);
    const int n = nc(rng);
    std::vector<GaussComponent> comps(n);
    double total = 0.0;
    for (auto& c : comps) {
        c.c = uc(rng);
        c.m = um(rng);
        c.p = up(rng);
        total += c.p;
    }
    for (auto& c : comps) c.p /= total;
    return GaussianMixture1D(std::move(comps));
}

Grid1D random_grid(std::mt19937_64& rng, int max_n = 32) {
    std::uniform_int_distribution<int> nn(1, max_n);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    Grid1D g;
    g.codewords.resize(nn(rng));
    for (auto& x : g.codewords) x = ux(rng);
    std::sort(g.codewords.begin(), g.codewords.end());
    for (std::size_t i = 1; i < g.codewords.size(); ++i)
        if (g.codewords[i] - g.codewords[i - 1] < 1e-2)
            g.codewords[i] = g.codewords[i - 1] + 1e-2;
    return g;
}

// ---------------------------------------------------------------- criterion 1
Outcome criterion_two_point_normal() {
    GaussianMixture1D n01({{0.0, 1.0, 1.0}});
    auto init = quantile_init_grid(n01, 2, {});
    OptimizeReport rep;
    auto g = optimize_grid(init, n01, {}, &rep);
    const double want = 0.7978845608;
    Outcome out;
    std::ostringstream d;
    d << "codewords " << g.codewords[0] << ", " << g.codewords[1] << "; weights "
      << g.weights[0] << ", " << g.weights[1];
    out.detail = d.str();
    out.pass = std::fabs(g.codewords[0] + want) < 1e-6 &&
               std::fabs(g.codewords[1] - want) < 1e-6 &&
               std::fabs(g.weights[0] - 0.5) < 1e-9 &&
               std::fabs(g.weights[1] - 0.5) < 1e-9;
    return out;
}

// ---------------------------------------------------------------- criterion 2
Outcome criterion_gradient_hessian_fd() {
    std::mt19937_64 rng(112233);
    double worst_grad = 0.0, worst_hess = 0.0;
    for (int it = 0; it < 100; ++it) {
        auto mix = random_mixture(rng);
        auto g = random_grid(rng);
        const auto grad = distortion_gradient(g, mix);
        double scale = 1.0;
        for (double v : grad) scale = std::max(scale, std::fabs(v));
        const double h = 1e-6;
        for (std::size_t i = 0; i < g.size(); ++i) {
            Grid1D up = g, dn = g;
            up.codewords[i] += h;
            dn.codewords[i] -= h;
            const double fd = (distortion(up, mix) - distortion(dn, mix)) / (2.0 * h);
            worst_grad = std::max(worst_grad, std::fabs(grad[i] - fd) / scale);
        }
        const auto hess = distortion_hessian(g, mix);
        double hscale = 1.0;
        for (double v : hess.diag) hscale = std::max(hscale, std::fabs(v));
        for (std::size_t j = 0; j < g.size(); ++j) {
            Grid1D up = g, dn = g;
            up.codewords[j] += h;
            dn.codewords[j] -= h;
            const auto gu = distortion_gradient(up, mix);
            const auto gd = distortion_gradient(dn, mix);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double fd = (gu[i] - gd[i]) / (2.0 * h);
                double hij = 0.0;
                if (i == j)
                    hij = hess.diag[i];
                else if (i + 1 == j)
                    hij = hess.upper[i];
                else if (j + 1 == i)
                    hij = hess.lower[j];
                worst_hess = std::max(worst_hess, std::fabs(hij - fd) / hscale);
            }
        }
    }
    Outcome out;
    std::ostringstream d;
    d << "worst gradient rel err " << worst_grad << " (tol 1e-5), worst hessian "
      << worst_hess << " (tol 1e-4) on 100 instances";
    out.detail = d.str();
    out.pass = worst_grad < 1e-5 && worst_hess < 1e-4;
    return out;
}

// ---------------------------------------------------------------- criterion 3
Outcome criterion_lloyd_monotone_agreement() {
    std::mt19937_64 rng(445566);
    bool monotone = true;
    double worst_gap = 0.0;
    int compared = 0;
    for (int it = 0; it < 20; ++it) {
        auto mix = overlapping_mixture(rng);
        auto g = quantile_init_grid(mix, 8, {});
        double d = distortion(g, mix);
        for (int l = 0; l < 200; ++l) {
            g = lloyd_step(g, mix);
            const double d2 = distortion(g, mix);
            if (d2 > d + 1e-12 * std::max(1.0, d)) monotone = false;
            d = d2;
        }

        auto init = quantile_init_grid(mix, 8, {});
        OptimizerConfig nr_cfg;
        nr_cfg.nr_max_iters = 80;
        OptimizeReport rep_nr;
        auto gn = optimize_grid(init, mix, nr_cfg, &rep_nr);
        OptimizerConfig la_cfg;
        la_cfg.nr_max_iters = 1;
        la_cfg.cond_threshold = 0.999999; // forces the accelerated-Lloyd path
        la_cfg.lloyd_max_iters = 8000;
        OptimizeReport rep_la;
        auto gl = optimize_grid(init, mix, la_cfg, &rep_la);
        if (rep_nr.converged && rep_nr.lloyd_iters == 0 && rep_la.converged) {
            ++compared;
            for (std::size_t i = 0; i < gn.size(); ++i)
                worst_gap = std::max(worst_gap,
                                     std::fabs(gn.codewords[i] - gl.codewords[i]));
        }
    }
    Outcome out;
    std::ostringstream d;
    d << "monotone over 200 steps: " << (monotone ? "yes" : "no") << "; NR vs Lloyd gap "
      << worst_gap << " on " << compared << " converged pairs (tol 1e-7)";
    out.detail = d.str();
    out.pass = monotone && compared >= 10 && worst_gap < 1e-7;
    return out;
}

// ---------------------------------------------------------------- criterion 4
Outcome criterion_heston_cdf_error(Shared& sh) {
    const double dt = sh.heston_sched.dt();
    auto dist_ee =
        marginal_update_dist(sh.heston_model, sh.heston_ee.steps[11], 0, Scheme::euler, dt);
    auto dist_wo2 =
        marginal_update_dist(sh.heston_model, sh.heston_wo2.steps[11], 0, Scheme::euler, dt);
    double sum_ee = 0.0, sum_wo2 = 0.0;
    int count = 0;
    for (int xi = 50; xi <= 200; ++xi) {
        const double x = xi;
        const double truth = heston_terminal_cdf(sh.hp, 1.0, x);
        sum_ee += std::fabs(dist_ee->cdf(x) - truth);
        sum_wo2 += std::fabs(dist_wo2->cdf(x) - truth);
        ++count;
    }
    const double avg_ee = sum_ee / count;
    const double avg_wo2 = sum_wo2 / count;
    Outcome out;
    std::ostringstream d;
    d << "avg |dF| euler-wo2 " << avg_wo2 << " vs euler-euler " << avg_ee << " (ratio "
      << avg_wo2 / avg_ee << ", required < 0.55; paper-window checks "
      << "wo2 in [0.000645, 0.001935], ee in [0.00146, 0.00438])";
    out.detail = d.str();
    out.pass = avg_wo2 < 0.55 * avg_ee && avg_wo2 >= 0.5 * 0.00129 &&
               avg_wo2 <= 1.5 * 0.00129 && avg_ee >= 0.5 * 0.00292 &&
               avg_ee <= 1.5 * 0.00292;
    return out;
}

// ---------------------------------------------------------------- criterion 5
Outcome criterion_heston_european(Shared& sh) {
    std::vector<double> strikes;
    for (double k = 70.0; k <= 130.0 + 1e-9; k += 5.0) strikes.push_back(k);

    McConfig mc;
    mc.paths = 100000;
    mc.steps_per_year = 120;
    mc.seed = 20260809;
    mc.threads = kThreads;

    int inside = 0;
    double max_err_wo2 = 0.0, max_err_ee = 0.0;
    for (double k : strikes) {
        OptionSpec spec{OptionKind::european_put, k, 12, 0.05};
        const double p_wo2 = price_european(sh.heston_wo2, spec);
        const double p_ee = price_european(sh.heston_ee, spec);
        const double cf = heston_cf_price(sh.hp, k, 1.0, false);
        max_err_wo2 = std::max(max_err_wo2, std::fabs(p_wo2 - cf));
        max_err_ee = std::max(max_err_ee, std::fabs(p_ee - cf));
        const auto est = mc_price(
            sh.heston_model, 1.0,
            [k](const std::vector<double>&, const std::vector<std::vector<double>>& s) {
                return std::exp(-0.05) * std::max(k - s.back()[0], 0.0);
            },
            mc);
        if (std::fabs(p_wo2 - est.mean) <= 3.0 * est.std_error) ++inside;
    }
    Outcome out;
    std::ostringstream d;
    d << inside << "/" << strikes.size() << " strikes inside 3 MC standard errors; "
      << "max |err| vs CF: wo2 " << max_err_wo2 << ", ee " << max_err_ee;
    out.detail = d.str();
    out.pass = inside * 10 >= static_cast<int>(strikes.size()) * 9 &&
               max_err_wo2 < max_err_ee;
    return out;
}

// ---------------------------------------------------------------- criterion 6
Outcome criterion_sabr_barrier(Shared& sh) {
    // Barrier levels as percent of strike, all above the initial forward
    // (110.52); monthly knockout monitoring.
    const std::vector<double> barrier_pct = {115, 120, 125, 130, 135, 140, 145};
    McConfig mc;
    mc.paths = 100000;
    mc.steps_per_year = 120;
    mc.seed = 77001;
    mc.antithetic = true;
    mc.threads = kThreads;

    double rel_sum = 0.0;
    int outside = 0;
    std::ostringstream d;
    for (double pct : barrier_pct) {
        const double barrier = 100.0 * pct / 100.0;
        OptionSpec spec{OptionKind::up_and_out_put, 100.0, 12, sh.sabr_rate};
        spec.barrier = barrier;
        spec.monitor_steps = all_steps(12);
        spec.forward_underlying = true;
        const double pmq_price = price_barrier_up_out(sh.sabr_grids, spec);
        const double dt_grid = sh.sabr_sched.dt();
        const auto est = mc_price(
            sh.sabr_model, 1.0,
            [&, barrier](const std::vector<double>& times,
                         const std::vector<std::vector<double>>& s) {
                const double dt_mc = times[1] - times[0];
                for (int k = 1; k <= 12; ++k) {
                    const auto idx =
                        static_cast<std::size_t>(std::lround(k * dt_grid / dt_mc));
                    if (s[idx][0] >= barrier) return 0.0;
                }
                return std::exp(-sh.sabr_rate) * std::max(100.0 - s.back()[0], 0.0);
            },
            mc);
        rel_sum += std::fabs(pmq_price - est.mean) / est.mean;
        const double z = (pmq_price - est.mean) / est.std_error;
        if (std::fabs(z) > 3.0) ++outside;
        d << " [B=" << barrier << " pmq=" << pmq_price << " mc=" << est.mean
          << " z=" << z << "]";
    }
    const double avg_rel = rel_sum / barrier_pct.size();
    Outcome out;
    std::ostringstream head;
    head << "avg rel err " << avg_rel << " (tol 0.005), " << outside
         << " levels outside 3 sigma (tol 2);" << d.str();
    out.detail = head.str();
    out.pass = avg_rel <= 0.005 && outside <= 2;
    return out;
}

// ---------------------------------------------------------------- criterion 7
Outcome criterion_sabr_bermudan(Shared& sh) {
    bool dominance = true, monotone = true, single_date_ok = true;
    double prev = -1.0;
    for (double k = 80.0; k <= 120.0 + 1e-9; k += 5.0) {
        OptionSpec berm{OptionKind::bermudan_put, k, 12, sh.sabr_rate};
        berm.monitor_steps = all_steps(12);
        berm.forward_underlying = true;
        OptionSpec eur{OptionKind::european_put, k, 12, sh.sabr_rate};
        eur.forward_underlying = true;
        const double vb = price_bermudan_put(sh.sabr_grids, berm);
        const double ve = price_european(sh.sabr_grids, eur);
        if (vb < ve) dominance = false;
        if (vb < prev) monotone = false;
        prev = vb;
        OptionSpec one = berm;
        one.monitor_steps = {12};
        if (std::fabs(price_bermudan_put(sh.sabr_grids, one) - ve) > 1e-12)
            single_date_ok = false;
    }
    Outcome out;
    std::ostringstream d;
    d << "bermudan >= european: " << (dominance ? "yes" : "no")
      << "; single-date reduction (1e-12): " << (single_date_ok ? "yes" : "no")
      << "; monotone in strike: " << (monotone ? "yes" : "no");
    out.detail = d.str();
    out.pass = dominance && monotone && single_date_ok;
    return out;
}

// ---------------------------------------------------------------- criterion 8
double conservation_residual(const GridSequence& seq, std::ostringstream& msg) {
    double worst = 0.0;
    for (std::size_t k = 1; k < seq.steps.size(); ++k) {
        const auto& s = seq.steps[k];
        double sum = 0.0;
        for (double w : s.joint) sum += w;
        worst = std::max(worst, std::fabs(sum - 1.0) / 1e-10);
        for (std::size_t n = 0; n < s.marginals.size(); ++n) {
            const auto axis = s.joint_marginal(n);
            for (std::size_t i = 0; i < axis.size(); ++i)
                worst = std::max(worst, std::fabs(axis[i] - s.marginals[n].weights[i]) /
                                            1e-9);
        }
        const std::size_t rows = seq.steps[k - 1].joint_size();
        const std::size_t cols = s.joint_size();
        for (std::size_t i = 0; i < rows; ++i) {
            double rs = 0.0;
            for (std::size_t j = 0; j < cols; ++j) rs += s.transition[i * cols + j];
            worst = std::max(worst, std::fabs(rs - 1.0) / 1e-10);
        }
        if (k >= 2) {
            auto mid = propagate_joint_weights(seq.steps[k - 2].joint,
                                               seq.steps[k - 1].transition,
                                               seq.steps[k - 1].joint_size());
            auto end = propagate_joint_weights(mid, s.transition, cols);
            for (std::size_t j = 0; j < cols; ++j)
                worst = std::max(worst, std::fabs(end[j] - s.joint[j]) / 1e-9);
        }
    }
    msg << " worst residual ratio " << worst;
    return worst;
}

Outcome criterion_conservation(Shared& sh) {
    BuildOptions opts;
    opts.threads = kThreads;
    auto gbm = pmq_build(gbm2d(110.0, 90.0, 0.05, 0.10, 0.30, -0.6),
                         Schedule{1.0, 12, {10, 20}}, {Scheme::euler, Scheme::euler},
                         opts);
    Outcome out;
    std::ostringstream d;
    d << "heston-wo2:";
    const double a = conservation_residual(sh.heston_wo2, d);
    d << "; sabr:";
    const double b = conservation_residual(sh.sabr_grids, d);
    d << "; gbm2d:";
    const double c = conservation_residual(gbm, d);
    out.detail = d.str() + " (ratios must stay <= 1)";
    out.pass = a <= 1.0 && b <= 1.0 && c <= 1.0;
    return out;
}

// ---------------------------------------------------------------- criterion 9
Outcome criterion_feller_stress() {
    int aborts = 0, fallbacks = 0, merges = 0;
    BuildOptions opts;
    opts.threads = kThreads;
    opts.with_transitions = false;
    for (double sigma = 0.6; sigma <= 1.2 + 1e-9; sigma += 0.1) {
        for (Scheme vs : {Scheme::euler, Scheme::wo2}) {
            try {
                auto model = heston(100.0, 0.09, 2.0, 0.09, sigma, 0.05, -0.3);
                auto seq = pmq_build(model, Schedule{1.0, 12, {30, 15}},
                                     {Scheme::euler, vs}, opts);
                fallbacks += seq.total_hessian_fallbacks();
                merges += seq.total_empty_region_merges();
            } catch (const std::exception&) {
                ++aborts;
            }
        }
    }
    Outcome out;
    std::ostringstream d;
    d << "14 builds across sigma 0.6..1.2: aborts " << aborts
      << " (must be 0), newton->lloyd fallbacks " << fallbacks
      << " (must be >= 1), empty-region merges " << merges;
    out.detail = d.str();
    out.pass = aborts == 0 && fallbacks >= 1;
    return out;
}

// --------------------------------------------------------------- criterion 10
Outcome criterion_calibration_inverse_crime() {
    const SabrParams truth{0.4, 0.9, 0.4, -0.3};
    RsveSettings settings;
    settings.codewords = {20, 10};
    settings.steps_override = 12;
    settings.threads = kThreads;

    QuoteSet qs;
    qs.spot = 100.0;
    qs.rate = 0.10;
    for (double t : {0.25, 0.5, 1.0})
        for (double k : {85.0, 95.0, 105.0, 115.0, 125.0})
            qs.quotes.push_back({t, k, OptionKind::european_put, 0.2, 1.0});
    auto bd = pmq::detail::rsve_eval(truth, qs, settings, nullptr);
    for (std::size_t i = 0; i < qs.quotes.size(); ++i)
        qs.quotes[i].market_vol = bd.model_vols[i];

    // 20% perturbation per parameter; beta moves downward because +20%
    // would leave its [0, 1] domain.
    SabrParams init{truth.y0 * 1.2, truth.beta * 0.8, truth.nu * 1.2,
                    truth.rho * 1.2};
    auto result = calibrate(qs, init, 400, settings);

    const double dy = std::fabs(result.params.y0 - truth.y0) / truth.y0;
    const double db = std::fabs(result.params.beta - truth.beta) / truth.beta;
    const double dn = std::fabs(result.params.nu - truth.nu) / truth.nu;
    const double dr = std::fabs(result.params.rho - truth.rho) / std::fabs(truth.rho);
    Outcome out;
    std::ostringstream d;
    d << "recovered (y0 " << result.params.y0 << ", beta " << result.params.beta
      << ", nu " << result.params.nu << ", rho " << result.params.rho << "), rel errs ("
      << dy << ", " << db << ", " << dn << ", " << dr << ") tol 0.02 each; rsve "
      << result.objective << " (tol 1e-6); crashed evals "
      << result.diagnostics.failed_builds << " of " << result.evaluations;
    out.detail = d.str();
    out.pass = dy <= 0.02 && db <= 0.02 && dn <= 0.02 && dr <= 0.02 &&
               result.objective < 1e-6 && result.diagnostics.failed_builds == 0;
    return out;
}

} // namespace

int main() {
    Shared shared;
    const auto t_build0 = std::chrono::steady_clock::now();
    shared.build();
    const double build_s = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - t_build0)
                               .count();
    std::printf("grid builds (heston ee/wo2, sabr wo2): %.1f s\n", build_s);

    struct Entry {
        int id;
        const char* name;
        CriterionFn fn;
    };
    const std::vector<Entry> entries = {
        {1, "two-point standard normal quantizer", criterion_two_point_normal},
        {2, "gradient/hessian finite-difference check", criterion_gradient_hessian_fd},
        {3, "lloyd monotonicity and NR/lloyd agreement",
         criterion_lloyd_monotone_agreement},
        {4, "heston marginal cdf error ratio",
         [&] { return criterion_heston_cdf_error(shared); }},
        {5, "heston european puts vs MC band and CF",
         [&] { return criterion_heston_european(shared); }},
        {6, "sabr barrier ladder vs MC", [&] { return criterion_sabr_barrier(shared); }},
        {7, "sabr bermudan properties", [&] { return criterion_sabr_bermudan(shared); }},
        {8, "probability conservation suite",
         [&] { return criterion_conservation(shared); }},
        {9, "feller-violating robustness sweep", criterion_feller_stress},
        {10, "sabr calibration inverse crime", criterion_calibration_inverse_crime},
    };

    int failures = 0;
    for (const auto& e : entries) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = e.fn();
        } catch (const std::exception& ex) {
            out.pass = false;
            out.detail = std::string("exception: ") + ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s (%.1f s) -- %s\n",
                    out.pass ? "PASS" : "FAIL", e.id, e.name, secs,
                    out.detail.c_str());
        std::fflush(stdout);
        if (!out.pass) ++failures;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
