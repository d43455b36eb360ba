// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "ddeps/error.hpp"
#include "ddeps/expr.hpp"

using namespace ddeps;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using cd = std::complex<double>;

namespace {

double eval_real(const std::string& text, const SymbolTable& syms, std::vector<double> in) {
    const Program p = Program::compile(Expr::parse(text), syms);
    return p.eval(std::span<const double>(in));
}

}  // namespace

TEST_CASE("parse and print", "[expr]") {
    const Expr e = Expr::parse("-mu*x0@0 + beta*x0@1*exp(-x0@1)");
    CHECK(e.params() == std::vector<std::string>{"beta", "mu"});
    CHECK(e.max_lag() == 1);
    CHECK(e.max_comp() == 0);
    CHECK(Expr::parse(e.str()).str() == e.str());

    const Expr f = Expr::parse("1 - k*x0@0*x0@1*x1@0/2");
    CHECK(f.max_comp() == 1);
    CHECK(Expr::parse(f.str()).str() == f.str());

    CHECK(Expr::parse("a+b*c").str() == "a + b*c");
    CHECK(Expr::parse("(a+b)*c").str() == "(a + b)*c");
    CHECK(Expr::parse("a-(b-c)").str() == "a - (b - c)");
    CHECK(Expr::parse("a/(b*c)").str() == "a/(b*c)");
    CHECK(Expr::parse("2^3^2").str() == "2^3^2");
    CHECK(Expr::parse("(2^3)^2").str() == "(2^3)^2");

    SymbolTable syms{1, 1, {"a", "b", "c"}};
    CHECK(eval_real("a+b*c", syms, {0.0, 2.0, 3.0, 4.0}) == 14.0);
    CHECK(eval_real("-a^2", syms, {0.0, 3.0, 0.0, 0.0}) == -9.0);
    CHECK(eval_real("2^3^2", syms, {0.0, 0.0, 0.0, 0.0}) == 512.0);
    CHECK(eval_real("a - b - c", syms, {0.0, 1.0, 2.0, 3.0}) == -4.0);
    CHECK(eval_real("a / b / c", syms, {0.0, 8.0, 2.0, 2.0}) == 2.0);
    CHECK_THAT(eval_real("pow(a, 0.5) + 1.5e1", syms, {0.0, 4.0, 0.0, 0.0}), WithinAbs(17.0, 1e-15));
}

TEST_CASE("parse errors", "[expr]") {
    try {
        (void)Expr::parse("a + * b");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(e.offset() == 4);
    }
    CHECK_THROWS_AS(Expr::parse("(a + b"), ParseError);
    CHECK_THROWS_AS(Expr::parse(""), ParseError);
    CHECK_THROWS_AS(Expr::parse("x0@"), ParseError);
    try {
        (void)Expr::parse("tanh(a)");
        FAIL("expected unknown function");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownSymbol);
    }
    SymbolTable syms{1, 2, {"a"}};
    CHECK_THROWS_AS(Program::compile(Expr::parse("zeta*x0@0"), syms), Error);
    CHECK_THROWS_AS(Program::compile(Expr::parse("x0@2"), syms), Error);
    CHECK_THROWS_AS(Program::compile(Expr::parse("x1@0"), syms), Error);
}

TEST_CASE("domain errors name the subexpression", "[expr]") {
    SymbolTable syms{1, 1, {"a"}};
    const Program p = Program::compile(Expr::parse("1 + log(x0@0 - a)"), syms);
    std::vector<double> in{1.0, 2.0};
    try {
        (void)p.eval(std::span<const double>(in));
        FAIL("expected domain error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Domain);
        CHECK(std::string(e.what()).find("log(x0@0 - a)") != std::string::npos);
    }
    const Program q = Program::compile(Expr::parse("a/x0@0"), syms);
    std::vector<double> z{0.0, 1.0};
    CHECK_THROWS_AS(q.eval(std::span<const double>(z)), Error);
}

TEST_CASE("jet derivatives of the blowflies nonlinearity", "[expr]") {
    // G(x) = beta (xbar + x) exp(-(xbar + x)) - mu xbar, derivatives at x = 0 in closed form.
    const double mu = 3.0, beta = 40.0, xbar = std::log(beta / mu);
    SymbolTable syms{1, 2, {"beta", "mu"}};
    const Program p = Program::compile(Expr::parse("-mu*x0@0 + beta*x0@1*exp(-x0@1)"), syms);
    std::vector<cd> base{xbar, xbar, beta, mu};
    std::vector<cd> e1{0.0, 1.0, 0.0, 0.0};
    CHECK_THAT(p.d2(base, e1, e1).real(), WithinRel(mu * std::log(beta / mu) - 2.0 * mu, 1e-12));
    CHECK_THAT(p.d3(base, e1, e1, e1).real(), WithinRel(-mu * std::log(beta / mu) + 3.0 * mu, 1e-12));
    CHECK_THAT(p.d1(base, e1).real(), WithinRel(mu * (1.0 - std::log(beta / mu)), 1e-12));
}

TEST_CASE("quadratic forms", "[expr]") {
    SymbolTable syms{1, 1, {}};
    const Program p = Program::compile(Expr::parse("x0@0^2"), syms);
    std::vector<cd> base{cd(0.7, -0.2)}, u{cd(1.5, 0.5)}, v{cd(-0.3, 2.0)}, w{cd(0.1, 0.1)};
    const cd d2 = p.d2(base, u, v);
    CHECK(std::abs(d2 - 2.0 * u[0] * v[0]) < 1e-13);
    CHECK(std::abs(p.d3(base, u, v, w)) < 1e-13);
}

TEST_CASE("jets agree with finite differences", "[expr][property]") {
    const std::vector<std::string> exprs = {
        "x0@0*exp(-x1@1) + a*sin(x0@1)",
        "log(2 + x0@0^2) * cos(x1@0) - x1@1/(3 + x0@1^2)",
        "pow(1.5 + x0@0^2, 1.3) + a*x0@0*x1@1^3",
        "exp(sin(x0@0)*x1@0) - 2^x0@1",
        "-a*x0@0 + (x1@1 - x0@1)^2/(1 + a)",
    };
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    SymbolTable syms{2, 2, {"a"}};
    for (const auto& text : exprs) {
        const Program p = Program::compile(Expr::parse(text), syms);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> b(5), dvec(5);
            for (int i = 0; i < 5; ++i) b[i] = U(rng), dvec[i] = U(rng);
            b[4] = 0.2 + 0.8 * std::abs(b[4]);  // keep 1 + a away from zero
            dvec[4] = 0.0;
            auto f = [&](double t) {
                std::vector<double> x(5);
                for (int i = 0; i < 5; ++i) x[i] = b[i] + t * dvec[i];
                return p.eval(std::span<const double>(x));
            };
            std::vector<cd> bc(b.begin(), b.end()), dc(dvec.begin(), dvec.end());
            const Jet3 j = p.taylor(bc, dc);
            // Each order is checked against a central difference (step 1e-4) of the order below,
            // which keeps the difference quotient well conditioned.
            auto jet_at = [&](double t) {
                std::vector<cd> bt(5);
                for (int i = 0; i < 5; ++i) bt[i] = b[i] + t * dvec[i];
                return p.taylor(bt, dc);
            };
            const double h = 1e-4;
            const Jet3 jp = jet_at(h), jm = jet_at(-h);
            const double fd1 = (f(h) - f(-h)) / (2 * h);
            const double fd2 = (jp.c[1] - jm.c[1]).real() / (2 * h);
            const double fd3 = 2.0 * (jp.c[2] - jm.c[2]).real() / (2 * h);
            const double j1 = j.c[1].real(), j2 = 2.0 * j.c[2].real(), j3 = 6.0 * j.c[3].real();
            CHECK(std::abs(j1 - fd1) <= 1e-6 * std::max(1.0, std::abs(j1)));
            CHECK(std::abs(j2 - fd2) <= 1e-6 * std::max(1.0, std::abs(j2)));
            CHECK(std::abs(j3 - fd3) <= 1e-6 * std::max(1.0, std::abs(j3)));
            CHECK(std::abs(j.c[0].real() - f(0)) <= 1e-14 * std::max(1.0, std::abs(f(0))));
        }
    }
}

TEST_CASE("polarized forms are symmetric", "[expr][property]") {
    SymbolTable syms{2, 2, {"a"}};
    const Program p = Program::compile(Expr::parse("x0@0*exp(-x1@1) + a*sin(x0@1)*x1@0^2"), syms);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N;
    auto rnd = [&] {
        std::vector<cd> v(5);
        for (auto& x : v) x = cd(N(rng), N(rng));
        return v;
    };
    for (int t = 0; t < 10; ++t) {
        auto base = rnd();
        for (auto& x : base) x = x.real();
        base[4] = 0.8;
        const auto u = rnd(), v = rnd(), w = rnd();
        const cd uv = p.d2(base, u, v), vu = p.d2(base, v, u);
        CHECK(std::abs(uv - vu) <= 1e-12 * std::max(1.0, std::abs(uv)));
        const cd a = p.d3(base, u, v, w);
        for (const cd b : {p.d3(base, u, w, v), p.d3(base, v, u, w), p.d3(base, v, w, u), p.d3(base, w, u, v),
                           p.d3(base, w, v, u)})
            CHECK(std::abs(a - b) <= 1e-11 * std::max(1.0, std::abs(a)));
    }
}
