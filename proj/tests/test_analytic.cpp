// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "ddeps/analytic.hpp"
#include "ddeps/discretize.hpp"
#include "ddeps/error.hpp"
#include "ddeps/hopf.hpp"
#include "oracles.hpp"

using namespace ddeps;
using namespace ddeps::blowfly;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
constexpr double pi = std::numbers::pi;

namespace {

LinearPart scalar_linear(double b1, double b2, std::vector<std::string> diff = {}) {
    const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"b1*x0@0 + b2*x0@1"}, {{"b1", b1}, {"b2", b2}}, {"0"});
    return linearize(m, Eigen::VectorXd::Zero(1), diff);
}

}  // namespace

TEST_CASE("exact characteristic function", "[analytic]") {
    const double b1 = -1.2, b2 = 0.7;
    const CharFn0 cf(scalar_linear(b1, b2, {"b1", "b2"}));
    for (cd l : {cd(0.3, 1.0), cd(-1.0, 4.0), cd(2.0, 0.0)}) {
        CHECK(std::abs(cf.eval(l)(0, 0) - oracle::delta0(l, b1, b2)) < 1e-14);
        CHECK(std::abs(cf.dlambda(l)(0, 0) - (1.0 + b2 * std::exp(-l))) < 1e-14);
        CHECK(std::abs(cf.dalpha(l, "b2")(0, 0) + std::exp(-l)) < 1e-14);
        CHECK(std::abs(cf.dalpha(l, "b1")(0, 0) + 1.0) < 1e-14);
    }
    CHECK_THAT(cf.eval(0.0)(0, 0).real(), WithinAbs(-(b1 + b2), 1e-15));
    CHECK_FALSE(cf.degree().has_value());

    const Coeffs c = dde_boundary(2.0);
    const CharFn0 on(scalar_linear(c.b1, c.b2));
    CHECK(std::abs(on.eval(cd(0.0, 2.0))(0, 0)) < 1e-14);
}

TEST_CASE("delay-equation boundary", "[analytic]") {
    const Coeffs a = dde_boundary(pi / 2);
    CHECK_THAT(a.b1, WithinAbs(0.0, 1e-15));
    CHECK_THAT(a.b2, WithinRel(-pi / 2, 1e-15));

    const Coeffs s = dde_boundary(1e-6);
    CHECK_THAT(s.b1, WithinAbs(1.0, 1e-10));
    CHECK_THAT(s.b2, WithinAbs(-1.0, 1e-10));
    // Series branch and closed form agree across the switch.
    const Coeffs lo = dde_boundary(0.99e-4), hi = dde_boundary(1.01e-4);
    CHECK_THAT(lo.b1, WithinAbs(hi.b1, 1e-8));

    const Coeffs t = dde_boundary(2.0 * pi / 3.0);
    CHECK_THAT(t.b1, WithinRel(-2.0 * pi / (3.0 * std::sqrt(3.0)), 1e-14));
    CHECK_THAT(t.b2, WithinRel(-4.0 * pi / (3.0 * std::sqrt(3.0)), 1e-14));

    CHECK_THROWS_AS(dde_boundary(pi), Error);
    CHECK_THROWS_AS(dde_boundary(-2.0 * pi), Error);

    for (int i = 1; i < 60; ++i) {
        const double w = 0.05 + 3.0 * i / 60.0;
        const Coeffs c = dde_boundary(w);
        CHECK(std::abs(oracle::delta0(cd(0.0, w), c.b1, c.b2)) < 1e-12 * (1.0 + w));
    }
}

TEST_CASE("discretized boundary", "[analytic]") {
    SECTION("closed forms for n = 2 and n = 3") {
        for (int i = 0; i < 100; ++i) {
            const double w = 0.05 + 3.9 * i / 100.0;  // n = 2 singular at 4
            const auto [b1, b2] = oracle::ps_boundary_n2(w);
            const Coeffs c = ps_boundary(2, w);
            CHECK_THAT(c.b1, WithinRel(b1, 1e-12));
            CHECK_THAT(c.b2, WithinRel(b2, 1e-12));
        }
        for (int i = 0; i < 100; ++i) {
            const double w = 0.05 + 2.9 * i / 100.0;
            const auto [b1, b2] = oracle::ps_boundary_n3(w);
            const Coeffs c = ps_boundary(3, w);
            CHECK_THAT(c.b1, WithinRel(b1, 1e-12));
            CHECK_THAT(c.b2, WithinRel(b2, 1e-12));
        }
    }
    SECTION("small-omega limit") {
        for (int n = 2; n <= 20; ++n) {
            const Coeffs c = ps_boundary(n, 1e-6);
            CHECK_THAT(c.b1, WithinAbs(1.0, 1e-4));
            CHECK_THAT(c.b2, WithinAbs(-1.0, 1e-4));
        }
    }
    SECTION("singular points are rejected") {
        CHECK_THROWS_AS(ps_boundary(2, 4.0), Error);
        CHECK_THROWS_AS(ps_boundary(5, 0.0), Error);
    }
    SECTION("roots of the discretized characteristic function") {
        for (int n : {4, 7, 12}) {
            for (int i = 1; i < 40; ++i) {
                const double w = 0.1 + 2.9 * i / 40.0;
                const Coeffs c = ps_boundary(n, w);
                const CharFnN cf(scalar_linear(c.b1, c.b2), n);
                CHECK(std::abs(cf.eval(cd(0.0, w))(0, 0)) < 1e-12 * (1.0 + w + std::abs(c.b1) + std::abs(c.b2)));
            }
        }
    }
    SECTION("pointwise convergence to the delay-equation boundary") {
        auto gap = [](int n) {
            double g = 0.0;
            for (int i = 0; i <= 100; ++i) {
                const double w = 0.1 + 2.9 * i / 100.0;
                const Coeffs a = ps_boundary(n, w), b = dde_boundary(w);
                g = std::max({g, std::abs(a.b1 - b.b1), std::abs(a.b2 - b.b2)});
            }
            return g;
        };
        const double g5 = gap(5), g10 = gap(10);
        CHECK(g10 < 1e-6);
        CHECK(g10 < g5);
    }
}

TEST_CASE("coordinate change", "[analytic]") {
    CHECK_THAT(to_mu_beta(-3.0, 1.0).mu, WithinAbs(3.0, 0.0));
    const Coeffs c = from_mu_beta(3.0, 40.0);
    CHECK(c.b1 == -3.0);
    CHECK_THAT(c.b2, WithinRel(3.0 * (1.0 - std::log(40.0 / 3.0)), 1e-15));
    const PopParams p = to_mu_beta(c.b1, c.b2);
    CHECK_THAT(p.mu, WithinRel(3.0, 1e-13));
    CHECK_THAT(p.beta, WithinRel(40.0, 1e-13));
    CHECK_THROWS_AS(to_mu_beta(1.0, -1.0), Error);
    CHECK_THROWS_AS(from_mu_beta(-1.0, 2.0), Error);
}

TEST_CASE("transcritical line", "[analytic]") {
    for (int n : {1, 3, 8, 15}) {
        const CharFnN on(scalar_linear(-2.0, 2.0), n);
        CHECK(std::abs(on.eval(0.0)(0, 0)) < 1e-14);
        const CharFnN off(scalar_linear(-2.0, 2.1), n);
        CHECK(std::abs(off.eval(0.0)(0, 0)) > 0.09);
    }
}

TEST_CASE("Lyapunov coefficient closed forms", "[analytic]") {
    SECTION("delay equation: negative on the arc") {
        for (int i = 1; i <= 50; ++i) {
            const double w = pi / 2 + (pi / 2) * i / 51.0;
            CHECK(c0(w).real() < 0.0);
            const Coeffs c = dde_boundary(w);
            CHECK(std::abs(1.0 + c.b2 * std::exp(cd(0.0, -w))) > 1e-3);
        }
        CHECK_THROWS_AS(c0(1.0), Error);
        CHECK_THROWS_AS(c0(3.2), Error);
    }
    SECTION("discretizations: negative where mu > 0") {
        for (int n : {2, 3}) {
            int count = 0;
            for (const ChartRow& r : chart(n, 0.05, 6.0, 400)) {
                if (r.curve != "ps" || std::isnan(r.re_c)) continue;
                CHECK(r.re_c < 0.0);
                ++count;
            }
            CHECK(count > 20);
        }
    }
    SECTION("c_n approaches c_0") {
        double prev = 1e300;
        for (int n : {4, 6, 8, 10}) {
            const double g = std::abs(cn(n, 2.2) - c0(2.2));
            CHECK(g < prev);
            prev = g;
        }
    }
    SECTION("general formula agrees with the closed forms") {
        const DdeModel bf = *builtin_model("blowflies");
        {
            const double w = 2.0;
            const Coeffs c = dde_boundary(w);
            const PopParams p = to_mu_beta(c.b1, c.b2);
            const DdeModel m = bf.with_params({{"mu", p.mu}, {"beta", p.beta}});
            const Eigen::VectorXd x = default_equilibrium(m);
            const CharFn0 cf(linearize(m, x));
            CHECK(std::abs(lyapunov_c(m, x, cf, w) - c0(w)) < 1e-12 * std::abs(c0(w)) + 1e-13);
        }
        for (int n : {2, 5, 9}) {
            const double w = 2.0;
            const Coeffs c = ps_boundary(n, w);
            const PopParams p = to_mu_beta(c.b1, c.b2);
            const DdeModel m = bf.with_params({{"mu", p.mu}, {"beta", p.beta}});
            const Eigen::VectorXd x = default_equilibrium(m);
            const CharFnN cf(linearize(m, x), n);
            CHECK(std::abs(lyapunov_c(m, x, cf, w) - cn(n, w)) < 1e-10 * std::max(1.0, std::abs(cn(n, w))));
        }
    }
}

TEST_CASE("eigenvalue derivative for n = 2", "[analytic]") {
    for (int i = -39; i <= 39; ++i) {
        if (i == 0) continue;
        const double w = 0.1 * i - 0.013;
        const LambdaPrime lp = lambda_prime_n2(w);
        CHECK(lp.re_closed > 0.0);
        CHECK_THAT(lp.value.real(), WithinRel(lp.re_closed, 1e-11));
    }
    const LambdaPrime lp = lambda_prime_n2(1.7);
    CHECK_THAT(lp.value.real(), WithinAbs(lp.re_closed, 1e-13));
    CHECK_THAT(lp.value.real(), WithinAbs(0.26284, 1e-5));
    CHECK_THAT(lp.value.imag(), WithinAbs(0.21960, 1e-5));
    CHECK_THROWS_AS(lambda_prime_n2(0.0), Error);
    CHECK_THROWS_AS(lambda_prime_n2(4.5), Error);

    // Same quantity from the general machinery with b2 as the parameter.
    for (double w : {0.5, 1.7, 3.1}) {
        const Coeffs c = ps_boundary(2, w);
        const CharFnN cf(scalar_linear(c.b1, c.b2, {"b2"}), 2);
        CHECK_THAT(transversality(cf, "b2", w), WithinRel(lambda_prime_n2(w).value.real(), 1e-10));
    }
}

TEST_CASE("stability chart", "[analytic]") {
    const auto rows = chart(2, 0.1, 6.0, 590);
    bool saw_dde = false, saw_ps = false;
    int max_branch = 0;
    for (const auto& r : rows) {
        if (r.curve == "dde") {
            saw_dde = true;
            CHECK(std::abs(r.omega - pi) >= 1e-3);
        } else {
            saw_ps = true;
            CHECK(std::abs(r.omega - 4.0) >= 1e-3);
            max_branch = std::max(max_branch, r.branch);
        }
        if (r.b1 < 0.0) {
            CHECK(r.mu == -r.b1);
            CHECK(r.beta_over_mu > 0.0);
        } else {
            CHECK(std::isnan(r.mu));
        }
    }
    CHECK(saw_dde);
    CHECK(saw_ps);
    CHECK(max_branch == 1);  // the single singularity at omega = 4
    CHECK_THROWS_AS(chart(0, 0.1, 1.0, 10), Error);
    CHECK_THROWS_AS(chart(3, 1.0, 0.5, 10), Error);
}
