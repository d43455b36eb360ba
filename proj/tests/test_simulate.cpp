// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>

#include "ddeps/error.hpp"
#include "ddeps/simulate.hpp"

using namespace ddeps;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
constexpr double pi = std::numbers::pi;

namespace {

DdeModel blowflies(double mu, double beta) {
    return builtin_model("blowflies")->with_params({{"mu", mu}, {"beta", beta}});
}

Eigen::VectorXd constant_start(const PsSystem& ps, double offset) {
    return sample_history(ps, [&](double) {
        return Eigen::VectorXd(ps.equilibrium.array() + offset);
    });
}

}  // namespace

TEST_CASE("history sampling", "[simulate]") {
    const PsSystem ps = PsSystem::build(*builtin_model("fluidflow"), 6);
    const Eigen::VectorXd y = sample_history(ps, [](double th) { return Eigen::Vector2d(th, 2.0 * th * th); });
    REQUIRE(y.size() == ps.size());
    for (int j = 0; j <= 6; ++j) {
        const double th = ps.mesh.nodes[j];
        CHECK(y(2 * j) == th);
        CHECK(y(2 * j + 1) == 2.0 * th * th);
    }
    CHECK_THROWS_AS(sample_history(ps, [](double) { return Eigen::VectorXd::Zero(3); }), Error);
}

TEST_CASE("integration accuracy", "[simulate]") {
    SECTION("equilibrium stays put") {
        const PsSystem ps = PsSystem::build(blowflies(3.0, 20.0), 10);
        const Trajectory tr = integrate(ps, constant_start(ps, 0.0), 100.0);
        double drift = 0.0;
        for (const auto& s : tr.states) drift = std::max(drift, (s.array() - ps.equilibrium(0)).abs().maxCoeff());
        CHECK(drift < 1e-8);
        CHECK(tr.times.back() == 100.0);
    }
    SECTION("linear decay without delay feedback") {
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"-x0@0"}, {}, {"0"});
        const PsSystem ps = PsSystem::build(m, 8);
        const Trajectory tr = integrate(ps, constant_start(ps, 1.0), 5.0);
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            CHECK_THAT(tr.states[i](0), WithinAbs(std::exp(-tr.times[i]), 1e-7));
        for (std::size_t i = 1; i < tr.times.size(); ++i) {
            CHECK(tr.times[i] - tr.times[i - 1] <= 0.05 + 1e-15);
            CHECK(tr.errors[i] <= 1.0);
        }
    }
    SECTION("halving the tolerances barely moves the solution") {
        const PsSystem ps = PsSystem::build(blowflies(7.0, 60.0), 12);
        const Eigen::VectorXd y0 = constant_start(ps, 0.3);
        IntegrateOptions a, b;
        a.rel_tol = 1e-7;
        a.abs_tol = 1e-9;
        b.rel_tol = 0.5e-7;
        b.abs_tol = 0.5e-9;
        const Trajectory ta = integrate(ps, y0, 20.0, a), tb = integrate(ps, y0, 20.0, b);
        CHECK((ta.states.back() - tb.states.back()).cwiseAbs().maxCoeff() < 1e-5);
    }
    SECTION("bad arguments") {
        const PsSystem ps = PsSystem::build(blowflies(3.0, 20.0), 4);
        const Eigen::VectorXd y0 = constant_start(ps, 0.0);
        IntegrateOptions o;
        o.rel_tol = 1e-14;
        CHECK_THROWS_AS(integrate(ps, y0, 1.0, o), Error);
        CHECK_THROWS_AS(integrate(ps, y0, -1.0), Error);
        CHECK_THROWS_AS(integrate(ps, Eigen::VectorXd::Zero(3), 1.0), Error);
    }
    SECTION("pure transport carries the head value into the whole segment") {
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"0*x0@1"}, {}, {"0"});
        const PsSystem ps = PsSystem::build(m, 10);
        const Eigen::VectorXd y0 = sample_history(ps, [](double th) { return Eigen::VectorXd::Constant(1, 0.7 + std::sin(3 * th)); });
        const Trajectory tr = integrate(ps, y0, 30.0);
        for (const auto& s : tr.states) CHECK(s(0) == 0.7);
        CHECK((tr.states.back().array() - 0.7).abs().maxCoeff() < 1e-6);
    }
    SECTION("blow-up is reported") {
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"x0@0^2"}, {}, {"0"});
        const PsSystem ps = PsSystem::build(m, 4);
        try {
            (void)integrate(ps, constant_start(ps, 1.0), 5.0);
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK((e.kind() == ErrorKind::StepUnderflow || e.kind() == ErrorKind::NonFinite));
        }
    }
}

TEST_CASE("period estimation", "[simulate]") {
    SECTION("synthetic sine") {
        Trajectory tr;
        const double T = 2.7;
        for (int i = 0; i <= 20000; ++i) {
            const double t = 0.01 * i;
            tr.times.push_back(t);
            tr.states.push_back(Eigen::VectorXd::Constant(1, 1.0 + std::sin(2 * pi * t / T)));
        }
        const PeriodEstimate p = estimate_period(tr);
        CHECK_THAT(p.period, WithinRel(T, 1e-6));
        CHECK(p.grouping == 1);
    }
    SECTION("two alternating spacings are grouped") {
        Trajectory tr;
        for (int i = 0; i <= 40000; ++i) {
            const double t = 0.005 * i;
            const double x = std::sin(2 * pi * t) + 1.2 * std::sin(pi * t + 0.3);
            tr.times.push_back(t);
            tr.states.push_back(Eigen::VectorXd::Constant(1, x));
        }
        const PeriodEstimate p = estimate_period(tr);
        CHECK_THAT(p.period, WithinRel(2.0, 1e-5));
    }
    SECTION("decaying and flat signals are rejected") {
        Trajectory flat;
        for (int i = 0; i <= 1000; ++i) {
            flat.times.push_back(0.1 * i);
            flat.states.push_back(Eigen::VectorXd::Constant(1, 2.0));
        }
        try {
            (void)estimate_period(flat);
            FAIL("expected failure");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::NotOscillatory);
        }
        CHECK_THROWS_AS(estimate_period(flat, 1), Error);
    }
}

TEST_CASE("periodic attractors of the model equations", "[simulate]") {
    SECTION("blowflies past period doubling") {
        const PeriodEstimate p = attractor_period(blowflies(7.0, 105.0), "beta", 105.0);
        CHECK_THAT(p.period, WithinRel(4.47, 0.05));
        CHECK(p.grouping == 2);
    }
    SECTION("blowflies before period doubling") {
        const PeriodEstimate p = attractor_period(blowflies(7.0, 95.0), "beta", 95.0);
        CHECK_THAT(p.period, WithinRel(2.2428, 0.01));
        CHECK(p.grouping == 1);
    }
    SECTION("fluid flow") {
        PeriodDoublingOptions o;
        o.t_end = 400.0;
        const PeriodEstimate p = attractor_period(*builtin_model("fluidflow"), "k", 1.5, o);
        CHECK_THAT(p.period, WithinRel(11.15, 0.05));
    }
    SECTION("every node sees the same period") {
        const PsSystem ps = PsSystem::build(blowflies(7.0, 65.0), 16);
        const Trajectory tr = integrate(ps, constant_start(ps, 0.4), 200.0);
        const double p0 = estimate_period(tr, 0).period;
        for (int j = 1; j <= 16; ++j) CHECK_THAT(estimate_period(tr, j).period, WithinRel(p0, 1e-3));
    }
    SECTION("period converges with the discretization") {
        double prev = 0.0, prev_diff = 1e300;
        for (int n : {6, 10, 14}) {
            PeriodDoublingOptions o;
            o.n = n;
            const double p = attractor_period(blowflies(7.0, 65.0), "beta", 65.0, o).period;
            if (prev != 0.0) {
                const double diff = std::abs(p - prev);
                CHECK(diff < prev_diff);
                prev_diff = diff;
            }
            prev = p;
        }
        CHECK(prev_diff < 1e-3);
    }
}

TEST_CASE("period-doubling bracket", "[simulate]") {
    const DdeModel m = blowflies(7.0, 100.0);
    const auto [lo, hi] = bracket_period_doubling(m, "beta", {90.0, 110.0});
    CHECK(lo <= 98.22);
    CHECK(hi >= 98.22);
    CHECK(hi - lo <= 2.0);

    try {
        (void)bracket_period_doubling(m, "beta", {60.0, 70.0});
        FAIL("expected no jump");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoPeriodJump);
    }
    CHECK_THROWS_AS(bracket_period_doubling(m, "beta", {90.0, 90.0}), Error);
}
