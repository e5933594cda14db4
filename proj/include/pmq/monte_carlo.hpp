#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "pmq/errors.hpp"
#include "pmq/normal.hpp"
#include "pmq/sde_models.hpp"

namespace pmq {

struct McConfig {
    long paths = 100000;
    int steps_per_year = 120;
    std::uint64_t seed = 1;
    bool antithetic = false;
    int threads = 1;

    void validate() const {
        if (paths < 1) throw config_error("McConfig: need at least one path");
        if (steps_per_year < 1) throw config_error("McConfig: steps_per_year >= 1");
    }
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long paths = 0;
};

/// Functional of one simulated path. `times` has steps+1 entries including
/// t = 0; `states` is indexed [step][dim]. Return the discounted payoff.
using PathFunctional =
    std::function<double(const std::vector<double>& times,
                         const std::vector<std::vector<double>>& states)>;

namespace detail {

// splitmix64; used to derive independent block streams from (seed, block).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Counter-based uniform stream: value depends only on (seed, block, index),
/// so results are independent of threading and draw order.
class BlockRng {
public:
    BlockRng(std::uint64_t seed, std::uint64_t block)
        : state_(mix64(seed ^ mix64(block + 0x51ed2701a3c5e491ull))) {}

    double next_normal() {
        state_ = mix64(state_ + 0x2545f4914f6cdd1dull);
        const double u =
            (static_cast<double>(state_ >> 11) + 0.5) * 0x1.0p-53;
        return norm_ppf(u);
    }

private:
    std::uint64_t state_;
};

} // namespace detail

/// Fully-truncated Euler Monte Carlo: coefficients are evaluated at the state
/// clamped to the model's lower bounds while the state itself is left free.
/// Pathwise draws are split per 4096-path block, so an estimate is bit
/// reproducible for a given seed regardless of the thread count.
inline McEstimate mc_price(const SdeModel& model, double horizon,
                           const PathFunctional& payoff, const McConfig& cfg) {
    cfg.validate();
    const int steps = std::max(1, static_cast<int>(std::lround(cfg.steps_per_year * horizon)));
    const double dt = horizon / steps;
    const double sqdt = std::sqrt(dt);
    const int d = model.dim;

    // Cholesky factor of the correlation matrix.
    std::vector<std::vector<double>> chol(d, std::vector<double>(d, 0.0));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = model.corr(i, j);
            for (int k = 0; k < j; ++k) sum -= chol[i][k] * chol[j][k];
            if (i == j) {
                if (!(sum > 0.0))
                    throw parameter_domain_error("mc_price: correlation not SPD");
                chol[i][i] = std::sqrt(sum);
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }

    const long sample_count = cfg.antithetic ? (cfg.paths + 1) / 2 : cfg.paths;
    constexpr long block_size = 4096;
    const long blocks = (sample_count + block_size - 1) / block_size;

    // Per-block Welford accumulators, merged in fixed order afterwards.
    std::vector<double> block_mean(blocks, 0.0), block_m2(blocks, 0.0);
    std::vector<long> block_n(blocks, 0);

    std::vector<double> times(steps + 1);
    for (int k = 0; k <= steps; ++k) times[k] = k * dt;

    auto run_block = [&](long b) {
        detail::BlockRng rng(cfg.seed, static_cast<std::uint64_t>(b));
        const long lo = b * block_size;
        const long hi = std::min(sample_count, lo + block_size);
        std::vector<std::vector<double>> states(steps + 1, std::vector<double>(d));
        std::vector<std::vector<double>> anti_states;
        std::vector<double> z(d), eps(d), clamped(d);
        double mean = 0.0, m2 = 0.0;
        long count = 0;
        for (long p = lo; p < hi; ++p) {
            states[0] = model.x0;
            if (cfg.antithetic) {
                anti_states.assign(steps + 1, std::vector<double>(d));
                anti_states[0] = model.x0;
            }
            for (int k = 0; k < steps; ++k) {
                for (int n = 0; n < d; ++n) eps[n] = rng.next_normal();
                for (int n = 0; n < d; ++n) {
                    z[n] = 0.0;
                    for (int j = 0; j <= n; ++j) z[n] += chol[n][j] * eps[j];
                }
                auto advance = [&](std::vector<std::vector<double>>& path, double sign) {
                    const auto& x = path[k];
                    for (int n = 0; n < d; ++n)
                        clamped[n] = std::max(x[n], model.lower_bound[n]);
                    for (int n = 0; n < d; ++n)
                        path[k + 1][n] = x[n] + model.drift[n](clamped) * dt +
                                         model.diffusion[n](clamped) * sqdt * sign * z[n];
                };
                advance(states, 1.0);
                if (cfg.antithetic) advance(anti_states, -1.0);
            }
            double sample = payoff(times, states);
            if (cfg.antithetic) sample = 0.5 * (sample + payoff(times, anti_states));
            ++count;
            const double delta = sample - mean;
            mean += delta / count;
            m2 += delta * (sample - mean);
        }
        block_mean[b] = mean;
        block_m2[b] = m2;
        block_n[b] = count;
    };

    if (cfg.threads <= 1) {
        for (long b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::vector<std::thread> pool;
        const int nt = std::min<long>(cfg.threads, blocks);
        for (int t = 0; t < nt; ++t)
            pool.emplace_back([&, t]() {
                for (long b = t; b < blocks; b += nt) run_block(b);
            });
        for (auto& th : pool) th.join();
    }

    // Fixed-order pairwise merge keeps the estimate independent of the
    // thread count and free of the sum-of-squares cancellation.
    double mean = 0.0, m2 = 0.0;
    long n = 0;
    for (long b = 0; b < blocks; ++b) {
        if (block_n[b] == 0) continue;
        const double delta = block_mean[b] - mean;
        const long nn = n + block_n[b];
        mean += delta * block_n[b] / nn;
        m2 += block_m2[b] + delta * delta * (static_cast<double>(n) * block_n[b]) / nn;
        n = nn;
    }
    McEstimate est;
    est.paths = n;
    est.mean = mean;
    est.std_error = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
    return est;
}

} // namespace pmq
