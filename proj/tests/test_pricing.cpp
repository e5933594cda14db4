#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pmq/grid_builder.hpp"
#include "pmq/pricing.hpp"
#include "pmq/sde_models.hpp"

using namespace pmq;

namespace {

GridSequence small_gbm_grids() {
    static GridSequence seq =
        rmq_1d(gbm1d(100.0, 0.05, 0.2), Schedule{1.0, 12, {30}}, Scheme::euler);
    return seq;
}

std::vector<int> steps_1_to(int k) {
    std::vector<int> v(k);
    for (int i = 0; i < k; ++i) v[i] = i + 1;
    return v;
}

} // namespace

TEST_CASE("expectation over a grid step") {
    auto seq = small_gbm_grids();
    SECTION("constant payoff integrates to one") {
        CHECK(expectation(seq.steps[7], [](const std::vector<double>&) { return 1.0; }) ==
              Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("identity payoff at step zero is the spot") {
        CHECK(expectation(seq.steps[0],
                          [](const std::vector<double>& x) { return x[0]; }) == 100.0);
    }
    SECTION("second moment tracks the lognormal value") {
        const double got = expectation(
            seq.steps[12], [](const std::vector<double>& x) { return x[0] * x[0]; });
        const double want = 100.0 * 100.0 * std::exp(2.0 * 0.05 + 0.04); // E[S^2]
        CHECK(std::fabs(got - want) / want < 0.01);
    }
}

TEST_CASE("european pricing") {
    auto seq = small_gbm_grids();
    OptionSpec put{OptionKind::european_put, 100.0, 12, 0.05};
    OptionSpec call{OptionKind::european_call, 100.0, 12, 0.05};
    SECTION("put-call parity is exact at grid level") {
        const double p = price_european(seq, put);
        const double c = price_european(seq, call);
        double fwd = 0.0;
        const auto& last = seq.steps[12];
        for (std::size_t i = 0; i < last.joint_size(); ++i)
            fwd += last.joint[i] * last.codeword(i)[0];
        const double want = std::exp(-0.05) * (100.0 - fwd);
        CHECK(p - c == Catch::Approx(want).margin(1e-12));
    }
    SECTION("vanishing strike kills the put") {
        OptionSpec tiny = put;
        tiny.strike = 1e-9;
        CHECK(price_european(seq, tiny) <= 1e-12);
    }
    SECTION("prices respect static bounds") {
        const double p = price_european(seq, put);
        CHECK(p >= 0.0);
        CHECK(p <= std::exp(-0.05) * 100.0);
    }
    SECTION("maturity outside the schedule is rejected") {
        OptionSpec bad = put;
        bad.maturity_step = 13;
        CHECK_THROWS_AS(price_european(seq, bad), config_error);
    }
}

TEST_CASE("barrier pricing") {
    auto seq = small_gbm_grids();
    OptionSpec barrier{OptionKind::up_and_out_put, 100.0, 12, 0.05};
    barrier.monitor_steps = steps_1_to(12);
    SECTION("infinite barrier reduces to the european put") {
        barrier.barrier = 1e12;
        OptionSpec put{OptionKind::european_put, 100.0, 12, 0.05};
        CHECK(price_barrier_up_out(seq, barrier) ==
              Catch::Approx(price_european(seq, put)).margin(1e-12));
    }
    SECTION("price is non-decreasing in the barrier level") {
        double prev = -1.0;
        for (double b : {95.0, 105.0, 115.0, 130.0, 160.0, 250.0}) {
            barrier.barrier = b;
            const double v = price_barrier_up_out(seq, barrier);
            CHECK(v >= prev - 1e-14);
            prev = v;
        }
    }
    SECTION("barrier below every first-step codeword knocks out everything") {
        barrier.barrier = 1e-6;
        CHECK(price_barrier_up_out(seq, barrier) == 0.0);
    }
}

TEST_CASE("bermudan pricing") {
    auto seq = small_gbm_grids();
    OptionSpec berm{OptionKind::bermudan_put, 100.0, 12, 0.05};
    berm.monitor_steps = steps_1_to(12);
    OptionSpec eur{OptionKind::european_put, 100.0, 12, 0.05};
    SECTION("single exercise date at maturity reduces to european") {
        OptionSpec one = berm;
        one.monitor_steps = {12};
        CHECK(price_bermudan_put(seq, one) ==
              Catch::Approx(price_european(seq, eur)).margin(1e-12));
    }
    SECTION("bermudan dominates european for every strike") {
        for (double k : {80.0, 90.0, 100.0, 110.0, 120.0}) {
            OptionSpec b2 = berm, e2 = eur;
            b2.strike = e2.strike = k;
            CHECK(price_bermudan_put(seq, b2) >= price_european(seq, e2));
        }
    }
    SECTION("monotone in strike") {
        double prev = -1.0;
        for (double k : {80.0, 90.0, 100.0, 110.0, 120.0}) {
            OptionSpec b2 = berm;
            b2.strike = k;
            const double v = price_bermudan_put(seq, b2);
            CHECK(v >= prev);
            prev = v;
        }
    }
    SECTION("put family ordering barrier <= european <= bermudan") {
        OptionSpec bar{OptionKind::up_and_out_put, 100.0, 12, 0.05};
        bar.monitor_steps = steps_1_to(12);
        bar.barrier = 120.0;
        const double vb = price_barrier_up_out(seq, bar);
        const double ve = price_european(seq, eur);
        const double vber = price_bermudan_put(seq, berm);
        CHECK(vb <= ve + 1e-14);
        CHECK(ve <= vber + 1e-14);
    }
}

TEST_CASE("forward underlying conversion") {
    // SABR-style setup: the first coordinate is the one-year forward.
    const double r = 0.10;
    auto model = sabr(100.0 * std::exp(r), 0.4, 0.9, 0.4, -0.3);
    Schedule sched{1.0, 6, {20, 10}};
    auto seq = pmq_build(model, sched, {Scheme::euler, Scheme::wo2});
    OptionSpec berm{OptionKind::bermudan_put, 100.0, 6, r};
    berm.forward_underlying = true;
    berm.monitor_steps = {6};
    OptionSpec eur{OptionKind::european_put, 100.0, 6, r};
    eur.forward_underlying = true;
    // At maturity the forward equals the spot, so the single-date Bermudan
    // still matches the European leg.
    CHECK(price_bermudan_put(seq, berm) ==
          Catch::Approx(price_european(seq, eur)).margin(1e-12));
    berm.monitor_steps = steps_1_to(6);
    CHECK(price_bermudan_put(seq, berm) >= price_european(seq, eur));
}
