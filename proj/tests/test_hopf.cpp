// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>

#include "ddeps/analytic.hpp"
#include "ddeps/discretize.hpp"
#include "ddeps/error.hpp"
#include "ddeps/hopf.hpp"
#include "oracles.hpp"

using namespace ddeps;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
constexpr double pi = std::numbers::pi;

namespace {

DdeModel blowflies(double mu) { return builtin_model("blowflies")->with_param("mu", mu); }

// Kuznetsov's formula on the dense pseudospectral ODE, with the same eigenvector scaling.
cd dense_lyapunov(const DdeModel& m, int n, double omega) {
    const PsSystem ps = PsSystem::build(m, n);
    const CharFnN cf(ps.linear, n);
    const int d = m.dim();
    const cd l(0.0, omega);
    const Eigen::MatrixXcd A = assemble_An(ps).cast<cd>();
    const Eigen::Index N = A.rows();
    const KernelPair kp = kernel_vectors(cf.eval(l));
    const Eigen::VectorXcd p = eigvec_right(cf, l, kp.right);
    const Eigen::VectorXcd q = eigvec_left(cf, l, p, kp.left);
    const Eigen::MatrixXcd basis = ps.lag_basis.cast<cd>();
    auto lags = [&](const Eigen::VectorXcd& u) {
        const Eigen::Map<const Eigen::MatrixXcd> U(u.data(), d, n + 1);
        return LagValues(U * basis);
    };
    auto B = [&](const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
        Eigen::VectorXcd r = Eigen::VectorXcd::Zero(N);
        r.head(d) = rhs_d2(m, ps.equilibrium, lags(u), lags(v));
        return r;
    };
    auto C = [&](const Eigen::VectorXcd& u, const Eigen::VectorXcd& v, const Eigen::VectorXcd& w) {
        Eigen::VectorXcd r = Eigen::VectorXcd::Zero(N);
        r.head(d) = rhs_d3(m, ps.equilibrium, lags(u), lags(v), lags(w));
        return r;
    };
    const Eigen::VectorXcd pb = p.conjugate();
    const Eigen::VectorXcd h11 = -A.partialPivLu().solve(B(p, pb));
    const Eigen::MatrixXcd S = 2.0 * l * Eigen::MatrixXcd::Identity(N, N) - A;
    const Eigen::VectorXcd h20 = S.partialPivLu().solve(B(p, p));
    const Eigen::VectorXcd total = 0.5 * C(p, p, pb) + B(p, h11) + 0.5 * B(pb, h20);
    return q.cwiseProduct(total).sum();
}

}  // namespace

TEST_CASE("Hopf point of the delay equation", "[hopf]") {
    const auto ref = oracle::blowfly_hopf(3.0);
    const HopfPoint hp = find_hopf(CharFamily(blowflies(3.0), std::nullopt), "beta", 2.4, 29.0);
    CHECK_THAT(hp.omega, WithinAbs(ref.omega, 1e-10));
    CHECK_THAT(hp.alpha, WithinAbs(ref.beta, 1e-10 * ref.beta));
    CHECK(hp.residual < 1e-12 * (1.0 + hp.omega));
    CHECK_FALSE(hp.n.has_value());
    CHECK(hp.transversal);
    CHECK_FALSE(hp.degenerate);
    CHECK_THAT(hp.a2, WithinRel(hp.c.real() / hp.sigma, 1e-15));
    CHECK_THAT(direction_a2(hp), WithinRel(hp.a2, 1e-15));
    CHECK(hp.nonresonance.pass);
    CHECK(std::isnan(hp.nonresonance.axis_clearance));
    CHECK(std::abs(hp.c - blowfly::c0(hp.omega)) < 1e-12);

    SECTION("quadratic Newton tail") {
        const auto& r = hp.residual_history;
        REQUIRE(r.size() >= 3);
        for (std::size_t k = 0; k + 1 < r.size(); ++k)
            if (r[k] < 1e-4 && r[k + 1] > 1e-13) CHECK(r[k + 1] <= 10.0 * r[k] * r[k]);
    }
}

TEST_CASE("Hopf points of the discretizations converge", "[hopf]") {
    const auto ref = oracle::blowfly_hopf(3.0);
    double pb = 1e300, pw = 1e300;
    for (int n : {4, 6, 8, 10, 12}) {
        const HopfPoint hp = find_hopf(CharFamily(blowflies(3.0), n), "beta", 2.4, 29.0);
        CHECK(hp.residual < 1e-12 * (1.0 + hp.omega));
        CHECK(hp.n == n);
        const double eb = std::abs(hp.alpha - ref.beta), ew = std::abs(hp.omega - ref.omega);
        CHECK(eb < pb);
        CHECK(ew < pw);
        pb = eb;
        pw = ew;
        if (n == 10) CHECK(eb < 1e-6);
        CHECK(hp.nonresonance.pass);
    }
}

TEST_CASE("finite-difference parameter derivatives give the same Hopf point", "[hopf]") {
    const HopfPoint a = find_hopf(CharFamily(blowflies(3.0), 10), "beta", 2.4, 29.0);
    const HopfPoint f = find_hopf(CharFamily(blowflies(3.0), 10, ParamDerivative::FiniteDifference), "beta", 2.4, 29.0);
    CHECK_THAT(f.alpha, WithinRel(a.alpha, 1e-12));
    CHECK_THAT(f.sigma, WithinRel(a.sigma, 1e-6));
}

TEST_CASE("Hopf failures", "[hopf]") {
    const CharFamily fam(blowflies(3.0), 8);
    CHECK_THROWS_AS(find_hopf(fam, "beta", -1.0, 29.0), Error);
    CHECK_THROWS_AS(find_hopf(fam, "gamma", 2.0, 29.0), Error);
    try {
        HopfOptions o;
        o.max_iter = 1;
        (void)find_hopf(fam, "beta", 2.0, 60.0, o);
        FAIL("expected no convergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NoConvergence);
    }
}

TEST_CASE("Lyapunov coefficient: independent oracles", "[hopf]") {
    SECTION("planar ODE against the classical formula") {
        // x' = -w y + f, y' = w x + g; Re c = 4 a with a from the textbook expression.
        const double w = 1.3;
        const DdeModel m = DdeModel::create(
            2, {0.0},
            {"-w*x1@0 + 0.7*x0@0^2 - 0.4*x0@0*x1@0 + 0.2*x1@0^2 - 0.9*x0@0^3 + 0.3*x0@0*x1@0^2",
             "w*x0@0 - 0.5*x0@0^2 + 0.6*x0@0*x1@0 + 0.1*x1@0^2 + 0.4*x0@0^2*x1@0 - 1.1*x1@0^3"},
            {{"w", w}}, {"0", "0"});
        const double fxx = 1.4, fxy = -0.4, fyy = 0.4, fxxx = -5.4, fxyy = 0.6;
        const double gxx = -1.0, gxy = 0.6, gyy = 0.2, gxxy = 0.8, gyyy = -6.6;
        const double a = (fxxx + fxyy + gxxy + gyyy) / 16.0 +
                         (fxy * (fxx + fyy) - gxy * (gxx + gyy) - fxx * gxx + fyy * gyy) / (16.0 * w);
        const CharFn0 cf(linearize(m, Eigen::VectorXd::Zero(2)));
        const cd c = lyapunov_c(m, Eigen::VectorXd::Zero(2), cf, w);
        CHECK_THAT(c.real(), WithinRel(4.0 * a, 1e-12));
    }
    SECTION("dense pseudospectral ODE, scalar and system") {
        for (int n : {5, 9}) {
            const HopfPoint hp = find_hopf(CharFamily(blowflies(3.0), n), "beta", 2.4, 29.0);
            const DdeModel m = blowflies(3.0).with_param("beta", hp.alpha);
            const cd dense = dense_lyapunov(m, n, hp.omega);
            CHECK(std::abs(hp.c - dense) < 1e-9 * std::abs(dense));
        }
        const DdeModel ff = *builtin_model("fluidflow");
        const HopfPoint hp = find_hopf(CharFamily(ff, 12), "k", 1.1, 1.0);
        const cd dense = dense_lyapunov(ff.with_param("k", hp.alpha), 12, hp.omega);
        CHECK(std::abs(hp.c - dense) < 1e-9 * std::abs(dense));
    }
    SECTION("cubic nonlinearity only") {
        const double w = 2.0;
        const blowfly::Coeffs b = blowfly::dde_boundary(w);
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"b1*x0@0 + b2*x0@1 + x0@1^3"}, {{"b1", b.b1}, {"b2", b.b2}},
                                            {"0"});
        const CharFn0 cf(linearize(m, Eigen::VectorXd::Zero(1)));
        const cd l(0.0, w);
        const cd expect = 0.5 * 6.0 * std::exp(-l) / cf.dlambda(l)(0, 0);
        CHECK(std::abs(lyapunov_c(m, Eigen::VectorXd::Zero(1), cf, w) - expect) < 1e-13);
    }
    SECTION("one-way coupled system reduces to the scalar value") {
        const HopfPoint s = find_hopf(CharFamily(blowflies(3.0), 8), "beta", 2.4, 29.0);
        const DdeModel m = DdeModel::create(
            2, {0.0, 1.0}, {"-mu*x0@0 + beta*x0@1*exp(-x0@1)", "-2*x1@0 + x0@1^2 - 0.5*x1@1*x0@0"},
            {{"mu", 3.0}, {"beta", 29.0}}, {"log(beta/mu)", "0"});
        const HopfPoint sys = find_hopf(CharFamily(m, 8), "beta", 2.4, 29.0);
        CHECK_THAT(sys.alpha, WithinRel(s.alpha, 1e-12));
        CHECK_THAT(sys.omega, WithinRel(s.omega, 1e-12));
        CHECK(std::abs(sys.c - s.c) < 1e-10 * std::abs(s.c));
        CHECK_THAT(sys.a2, WithinRel(s.a2, 1e-9));
        CHECK(std::abs(sys.p_star(0) - 1.0) < 1e-14);
    }
}

TEST_CASE("parametrization invariance", "[hopf]") {
    const double mu = 3.0;
    const DdeModel by_b2 = DdeModel::create(1, {0.0, 1.0}, {"-mu*x0@0 + mu*exp(1 - b2/mu)*x0@1*exp(-x0@1)"},
                                            {{"mu", mu}, {"b2", -4.0}}, {"1 - b2/mu"});
    for (std::optional<int> n : {std::optional<int>{}, std::optional<int>{10}}) {
        const HopfPoint hb = find_hopf(CharFamily(blowflies(mu), n), "beta", 2.4, 29.0);
        const HopfPoint h2 = find_hopf(CharFamily(by_b2, n), "b2", 2.4, -4.0);
        CHECK_THAT(mu * std::exp(1.0 - h2.alpha / mu), WithinRel(hb.alpha, 1e-12));
        CHECK(std::abs(h2.c - hb.c) < 1e-10 * std::abs(hb.c));
        const double dbeta_db2 = -hb.alpha / mu;
        CHECK_THAT(h2.a2 * dbeta_db2, WithinRel(hb.a2, 1e-8));
    }
}

TEST_CASE("transversality and direction", "[hopf]") {
    // Parameter that only enters the nonlinearity: sigma = 0.
    const double w = 2.0;
    const blowfly::Coeffs b = blowfly::dde_boundary(w);
    const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"b1*x0@0 + b2*x0@1 + a*x0@1^3"},
                                        {{"b1", b.b1}, {"b2", b.b2}, {"a", 1.0}}, {"0"});
    const CharFn0 cf(linearize(m, Eigen::VectorXd::Zero(1), {"a", "b1"}));
    CHECK(transversality(cf, "a", w) == 0.0);
    CHECK(transversality(cf, "b1", w) != 0.0);
    CHECK_THROWS_AS(direction_a2(cd(-1.0, 0.0), 0.0), Error);
    CHECK(direction_a2(cd(0.0, 0.3), 2.0) == 0.0);

    // sigma is minus the crossing speed; increasing beta destabilizes, so it stays negative.
    for (int i = 1; i < 20; ++i) {
        const double om = pi / 2 + (pi / 2) * i / 20.0;
        const blowfly::Coeffs c = blowfly::dde_boundary(om);
        const blowfly::PopParams p = blowfly::to_mu_beta(c.b1, c.b2);
        const DdeModel bm = blowflies(p.mu).with_param("beta", p.beta);
        const CharFn0 bc(linearize(bm, default_equilibrium(bm), {"beta"}));
        CHECK(transversality(bc, "beta", om) < 0.0);
    }
}

TEST_CASE("nonresonance", "[hopf]") {
    SECTION("interior points pass with margins above 0.1") {
        for (int n : {5, 10, 15}) {
            for (double om : {1.8, 2.2, 2.6, 2.9}) {
                const blowfly::Coeffs c = blowfly::ps_boundary(n, om);
                const blowfly::PopParams p = blowfly::to_mu_beta(c.b1, c.b2);
                const DdeModel bm = blowflies(p.mu).with_param("beta", p.beta);
                const CharFnN cf(linearize(bm, default_equilibrium(bm)), n);
                const NonresonanceVerdict v = nonresonance(cf, om);
                CHECK(v.pass);
                for (const auto& [k, margin] : v.margins) CHECK(margin > 0.1);
                CHECK(v.axis_clearance > 1e-6);
            }
        }
    }
    SECTION("endpoint (1, -1) fails at k = 0") {
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"x0@0 - x0@1"}, {}, {"0"});
        const CharFn0 cf(linearize(m, Eigen::VectorXd::Zero(1)));
        const NonresonanceVerdict v = nonresonance(cf, 1e-3);
        CHECK_FALSE(v.pass);
        CHECK(v.margins.front().first == 0);
        CHECK(v.margins.front().second < 1e-8);
    }
    SECTION("n = 2 has no room for resonance") {
        const blowfly::Coeffs c = blowfly::ps_boundary(2, 2.0);
        const DdeModel m = DdeModel::create(1, {0.0, 1.0}, {"b1*x0@0 + b2*x0@1"}, {{"b1", c.b1}, {"b2", c.b2}}, {"0"});
        const CharFnN cf(linearize(m, Eigen::VectorXd::Zero(1)), 2);
        const NonresonanceVerdict v = nonresonance(cf, 2.0);
        CHECK(v.pass);
        CHECK(v.axis_clearance > 0.1);
        CHECK(v.margins.size() == 10);
    }
}

TEST_CASE("stability curve continuation", "[hopf]") {
    const CharFamily fam(blowflies(3.0), std::nullopt);
    const HopfPoint start = find_hopf(fam, "beta", 2.4, 29.0);
    TraceOptions opt;
    opt.step = 0.5;
    opt.max_points = 400;
    opt.p1_range = {1.0, 10.0};
    const StabilityCurve fwd = trace_hopf_curve(fam, "mu", "beta", start, opt);
    CHECK(fwd.termination == "out_of_bounds");
    CHECK_THAT(fwd.points.back().p1, WithinAbs(10.0, 1e-12));
    opt.step = -0.5;
    const StabilityCurve bwd = trace_hopf_curve(fam, "mu", "beta", start, opt);
    CHECK(bwd.termination == "out_of_bounds");
    CHECK_THAT(bwd.points.back().p1, WithinAbs(1.0, 1e-12));

    double worst = 0.0;
    for (const auto* c : {&fwd, &bwd})
        for (const CurvePoint& pt : c->points) {
            const auto ref = oracle::blowfly_hopf(pt.p1);
            worst = std::max(worst, std::abs(pt.p2 / pt.p1 - ref.beta / pt.p1));
            CHECK_THAT(pt.omega, WithinAbs(ref.omega, 1e-8));
            CHECK(pt.residual < 1e-10 * (1.0 + pt.omega));
        }
    CHECK(worst < 1e-6);

    // Tracing back from the far end revisits the same curve.
    const CurvePoint& end = fwd.points.back();
    HopfPoint s2 = find_hopf(CharFamily(blowflies(end.p1), std::nullopt), "beta", end.omega, end.p2);
    s2.params["mu"] = end.p1;
    opt.step = -0.5;
    opt.max_points = 30;
    const StabilityCurve back = trace_hopf_curve(fam, "mu", "beta", s2, opt);
    for (const CurvePoint& pt : back.points) {
        const auto ref = oracle::blowfly_hopf(pt.p1);
        CHECK_THAT(pt.p2, WithinRel(ref.beta, 1e-9));
    }
    CHECK(back.points.back().p1 < end.p1);

    SECTION("invalid start") {
        HopfPoint bad = start;
        bad.params["beta"] += 1.0;
        CHECK_THROWS_AS(trace_hopf_curve(fam, "mu", "beta", bad, opt), Error);
        opt.step = 0.0;
        CHECK_THROWS_AS(trace_hopf_curve(fam, "mu", "beta", start, opt), Error);
    }
    SECTION("fluid flow: one branch in the (k, c) window") {
        const CharFamily ff(*builtin_model("fluidflow"), 12);
        const HopfPoint s = find_hopf(ff, "k", 1.1, 1.0);
        TraceOptions o;
        o.step = 0.1;
        o.max_points = 300;
        o.p1_range = {0.05, 3.0};
        o.p2_range = {0.05, 3.0};
        for (double sgn : {1.0, -1.0}) {
            o.step = 0.1 * sgn;
            const StabilityCurve c = trace_hopf_curve(ff, "k", "c", s, o);
            CHECK(c.termination == "out_of_bounds");
            CHECK(c.points.size() > 5);
            for (std::size_t i = 1; i < c.points.size(); ++i)
                CHECK(std::abs(c.points[i].omega - c.points[i - 1].omega) < 0.5);
        }
    }
}

TEST_CASE("convergence study", "[hopf]") {
    const std::vector<int> ns{4, 6, 8, 10, 12, 14, 16};
    const auto rows = convergence_study(blowflies(3.0), "beta", 2.4, 29.0, ns);
    REQUIRE(rows.size() == ns.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].n == ns[i]);
        CHECK(rows[i].status == "ok");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i - 1].alpha_err > 1e-10) CHECK(rows[i].alpha_err < rows[i - 1].alpha_err);
        if (rows[i - 1].omega_err > 1e-10) CHECK(rows[i].omega_err < rows[i - 1].omega_err);
        if (rows[i - 1].a2_err > 1e-10) CHECK(rows[i].a2_err < rows[i - 1].a2_err);
    }
    CHECK(rows.back().alpha_err < 1e-10);
    CHECK(std::abs(rows[6].sigma - rows[5].sigma) < 1e-8);

    const auto self = convergence_study(blowflies(3.0), "beta", 2.4, 29.0, {6, 10}, true);
    CHECK(self[1].alpha_err == 0.0);
    CHECK(self[1].omega_err == 0.0);
    CHECK(self[1].a2_err == 0.0);

    // A failing row is recorded, not thrown.
    const auto bad = convergence_study(blowflies(3.0), "beta", 2.4, 29.0, {1, 8});
    CHECK(bad[0].status != "ok");
    CHECK(bad[1].status == "ok");

    CHECK_THROWS_AS(convergence_study(blowflies(3.0), "beta", 2.4, 29.0, {}), Error);
}

TEST_CASE("worker count", "[hopf]") {
    setenv("DDEPS_THREADS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("DDEPS_THREADS", "zero", 1);
    CHECK(worker_count() >= 1);
    unsetenv("DDEPS_THREADS");
}
