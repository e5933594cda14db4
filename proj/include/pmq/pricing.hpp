#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pmq/errors.hpp"
#include "pmq/grid_builder.hpp"

namespace pmq {

enum class OptionKind { european_put, european_call, up_and_out_put, bermudan_put };

inline const char* option_kind_name(OptionKind k) {
    switch (k) {
        case OptionKind::european_put: return "european-put";
        case OptionKind::european_call: return "european-call";
        case OptionKind::up_and_out_put: return "up-and-out-put";
        case OptionKind::bermudan_put: return "bermudan-put";
    }
    return "?";
}

struct OptionSpec {
    OptionKind kind = OptionKind::european_put;
    double strike = 100.0;
    int maturity_step = 0; // grid step index of expiry
    double rate = 0.0;     // continuously compounded discount rate
    double barrier = 0.0;  // up-and-out level
    std::vector<int> monitor_steps; // barrier monitoring / exercise dates
    /// When the first grid coordinate is a forward for delivery at the grid
    /// horizon, early payoffs are evaluated on the induced spot
    /// x1 * exp(-r (T_grid - t_k)).
    bool forward_underlying = false;

    void validate(int grid_steps) const {
        if (!(strike > 0.0)) throw config_error("OptionSpec: strike must be positive");
        if (maturity_step < 1 || maturity_step > grid_steps)
            throw config_error("OptionSpec: maturity step outside the schedule");
        for (int s : monitor_steps)
            if (s < 1 || s > grid_steps)
                throw config_error("OptionSpec: monitor step outside the schedule");
        if (kind == OptionKind::up_and_out_put && !(barrier > 0.0))
            throw config_error("OptionSpec: barrier must be positive");
    }
};

/// Expectation of a payoff over one grid step's joint codewords.
inline double expectation(const ProductGridStep& step,
                          const std::function<double(const std::vector<double>&)>& h) {
    const std::size_t total = step.joint_size();
    double sum = 0.0;
    for (std::size_t i = 0; i < total; ++i) sum += step.joint[i] * h(step.codeword(i));
    return sum;
}

namespace detail {

inline double spot_factor(const GridSequence& seq, const OptionSpec& spec, int k) {
    if (!spec.forward_underlying) return 1.0;
    const double dt = seq.schedule.dt();
    return std::exp(-spec.rate * (seq.schedule.horizon - k * dt));
}

inline void require_built(const GridSequence& seq, const OptionSpec& spec,
                          bool needs_transitions) {
    spec.validate(seq.schedule.steps);
    if (needs_transitions)
        for (int k = 1; k <= spec.maturity_step; ++k)
            if (seq.steps[k].transition.empty())
                throw config_error("pricing: grid built without transition matrices");
}

} // namespace detail

/// Discounted terminal expectation of the vanilla payoff on coordinate 1.
/// Summation runs over the flat joint codewords in the same order as the
/// barrier pricer, so the no-barrier limit agrees bit for bit.
inline double price_european(const GridSequence& seq, const OptionSpec& spec) {
    detail::require_built(seq, spec, false);
    const auto& step = seq.steps[spec.maturity_step];
    const double t = spec.maturity_step * seq.schedule.dt();
    const double sf = detail::spot_factor(seq, spec, spec.maturity_step);
    const bool call = spec.kind == OptionKind::european_call;
    double val = 0.0;
    for (std::size_t i = 0; i < step.joint_size(); ++i) {
        if (!(step.joint[i] > 0.0)) continue;
        const double s = step.codeword(i)[0] * sf;
        const double payoff =
            call ? std::max(s - spec.strike, 0.0) : std::max(spec.strike - s, 0.0);
        val += step.joint[i] * payoff;
    }
    return std::exp(-spec.rate * t) * val;
}

/// Discrete up-and-out put: forward induction on survival mass, zeroing the
/// codewords at or above the barrier at each monitoring date.
inline double price_barrier_up_out(const GridSequence& seq, const OptionSpec& spec) {
    detail::require_built(seq, spec, true);
    std::vector<double> surv = seq.steps[0].joint; // point mass at x0
    const double dt = seq.schedule.dt();
    for (int k = 1; k <= spec.maturity_step; ++k) {
        const auto& step = seq.steps[k];
        const std::size_t cols = step.joint_size();
        surv = propagate_joint_weights(surv, step.transition, cols);
        if (std::find(spec.monitor_steps.begin(), spec.monitor_steps.end(), k) !=
            spec.monitor_steps.end()) {
            for (std::size_t i = 0; i < cols; ++i)
                if (step.codeword(i)[0] >= spec.barrier) surv[i] = 0.0;
        }
    }
    const auto& last = seq.steps[spec.maturity_step];
    const double sf = detail::spot_factor(seq, spec, spec.maturity_step);
    double val = 0.0;
    for (std::size_t i = 0; i < last.joint_size(); ++i) {
        if (!(surv[i] > 0.0)) continue;
        const double s = last.codeword(i)[0] * sf;
        val += surv[i] * std::max(spec.strike - s, 0.0);
    }
    return std::exp(-spec.rate * spec.maturity_step * dt) * val;
}

/// Bermudan put by backward induction over the transition matrices.
inline double price_bermudan_put(const GridSequence& seq, const OptionSpec& spec) {
    detail::require_built(seq, spec, true);
    const double dt = seq.schedule.dt();
    const int K = spec.maturity_step;
    auto exercise_value = [&](int k, double x1) {
        const double s = x1 * detail::spot_factor(seq, spec, k);
        return std::max(spec.strike - s, 0.0);
    };
    const auto& lastg = seq.steps[K];
    std::vector<double> value(lastg.joint_size());
    for (std::size_t i = 0; i < value.size(); ++i)
        value[i] = exercise_value(K, lastg.codeword(i)[0]);
    const double df = std::exp(-spec.rate * dt);
    for (int k = K - 1; k >= 0; --k) {
        const auto& step = seq.steps[k];
        const auto& next = seq.steps[k + 1];
        const std::size_t rows = step.joint_size();
        const std::size_t cols = next.joint_size();
        std::vector<double> cont(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* row = next.transition.data() + i * cols;
            double acc = 0.0;
            for (std::size_t j = 0; j < cols; ++j) acc += row[j] * value[j];
            cont[i] = df * acc;
        }
        const bool can_exercise =
            std::find(spec.monitor_steps.begin(), spec.monitor_steps.end(), k) !=
            spec.monitor_steps.end();
        std::vector<double> v(rows);
        for (std::size_t i = 0; i < rows; ++i) {
            const double ex =
                can_exercise ? exercise_value(k, step.codeword(i)[0]) : 0.0;
            v[i] = std::max(ex, cont[i]);
        }
        value = std::move(v);
    }
    return value[0];
}

/// Dispatch on the option kind.
inline double price_option(const GridSequence& seq, const OptionSpec& spec) {
    switch (spec.kind) {
        case OptionKind::european_put:
        case OptionKind::european_call: return price_european(seq, spec);
        case OptionKind::up_and_out_put: return price_barrier_up_out(seq, spec);
        case OptionKind::bermudan_put: return price_bermudan_put(seq, spec);
    }
    throw config_error("price_option: unknown kind");
}

} // namespace pmq
