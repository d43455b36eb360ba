// SPDX-License-Identifier: MIT
#include "ddeps/hopf.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "ddeps/analytic.hpp"
#include "ddeps/discretize.hpp"
#include "ddeps/error.hpp"

namespace ddeps {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXcd adjugate(const Eigen::MatrixXcd& A) {
    const Eigen::Index d = A.rows();
    if (d == 1) return Eigen::MatrixXcd::Ones(1, 1);
    Eigen::MatrixXcd adj(d, d);
    Eigen::MatrixXcd minor(d - 1, d - 1);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index r = 0, rr = 0; r < d; ++r) {
                if (r == i) continue;
                for (Eigen::Index c = 0, cc = 0; c < d; ++c) {
                    if (c == j) continue;
                    minor(rr, cc++) = A(r, c);
                }
                ++rr;
            }
            adj(j, i) = (((i + j) % 2) ? -1.0 : 1.0) * minor.determinant();
        }
    }
    return adj;
}

// Scalar defining function h and its derivatives: Delta itself for d = 1, det Delta otherwise.
struct HEval {
    cd h;
    cd h_lambda;
    std::vector<cd> h_param;
    double residual = 0.0;
};

HEval evaluate_h(const CharFn& cf, cd lambda, const std::vector<std::string>& params) {
    HEval ev;
    const Eigen::MatrixXcd Delta = cf.eval(lambda);
    const Eigen::MatrixXcd D1 = cf.dlambda(lambda);
    if (cf.dim() == 1) {
        ev.h = Delta(0, 0);
        ev.h_lambda = D1(0, 0);
        for (const auto& p : params) ev.h_param.push_back(cf.dalpha(lambda, p)(0, 0));
        ev.residual = std::abs(ev.h);
    } else {
        const Eigen::MatrixXcd adj = adjugate(Delta);
        ev.h = Delta.determinant();
        ev.h_lambda = (adj * D1).trace();
        for (const auto& p : params) ev.h_param.push_back((adj * cf.dalpha(lambda, p)).trace());
        ev.residual = Eigen::JacobiSVD<Eigen::MatrixXcd>(Delta).singularValues().minCoeff();
    }
    if (!std::isfinite(std::abs(ev.h)) || !std::isfinite(std::abs(ev.h_lambda)))
        throw Error(ErrorKind::NonFinite, "characteristic function is not finite");
    return ev;
}

// Kernel vectors at a root with q . D1 p = 1; also returns the unnormalized simplicity margin.
struct CriticalVectors {
    Eigen::VectorXcd p, q;
    double simplicity = 0.0;
};

CriticalVectors critical_vectors(const CharFn& cf, cd lambda) {
    const Eigen::MatrixXcd D1 = cf.dlambda(lambda);
    CriticalVectors cv;
    if (cf.dim() == 1) {
        cv.p = Eigen::VectorXcd::Ones(1);
        cv.q = Eigen::VectorXcd::Ones(1);
    } else {
        const KernelPair kp = kernel_vectors(cf.eval(lambda));
        cv.p = kp.right;
        cv.q = kp.left;
    }
    const cd s = (cv.q.transpose() * D1 * cv.p)(0);
    cv.simplicity = std::abs(s) / (cv.q.norm() * cv.p.norm());
    if (!(cv.simplicity > 1e-10))
        throw Error(ErrorKind::Simplicity, "critical root is not simple (|q . D1Delta p| = " +
                                               std::to_string(cv.simplicity) + ")");
    cv.q /= s;
    return cv;
}

Eigen::VectorXcd solve_small(const Eigen::MatrixXcd& M, const Eigen::VectorXcd& b, const char* what) {
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(M);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) throw Error(ErrorKind::Singular, what);
    return lu.solve(b);
}

}  // namespace

// ---------------------------------------------------------------- CharFamily

CharFamily::CharFamily(DdeModel model, std::optional<int> n, ParamDerivative mode)
    : model_(std::move(model)), n_(n), mode_(mode) {
    if (n_ && *n_ < 1) throw Error(ErrorKind::InvalidArgument, "discretization degree must be >= 1");
}

CharFamily::Point CharFamily::at(const std::map<std::string, double>& updates,
                                 const std::vector<std::string>& diff_params, const Eigen::VectorXd& guess) const {
    DdeModel m = model_.with_params(updates);
    Eigen::VectorXd g = guess;
    if (g.size() == 0) {
        const auto hint = m.equilibrium_hint();
        g = hint ? *hint : Eigen::VectorXd::Zero(m.dim()).eval();
    }
    Eigen::VectorXd xbar = equilibrium_solve(m, g);
    LinearPart lp = linearize(m, xbar, diff_params, mode_);
    std::shared_ptr<const CharFn> cf;
    if (n_) cf = std::make_shared<CharFnN>(std::move(lp), *n_);
    else cf = std::make_shared<CharFn0>(std::move(lp));
    return {std::move(m), std::move(xbar), std::move(cf)};
}

// ---------------------------------------------------------------- diagnostics

double transversality(const CharFn& cf, const std::string& param, double omega) {
    const cd lambda(0.0, omega);
    const CriticalVectors cv = critical_vectors(cf, lambda);
    return (cv.q.transpose() * cf.dalpha(lambda, param) * cv.p)(0).real();
}

cd lyapunov_c(const DdeModel& model, const Eigen::VectorXd& xbar, const CharFn& cf, double omega) {
    const cd lambda(0.0, omega);
    const int d = cf.dim(), m = cf.nlags();
    const CriticalVectors cv = critical_vectors(cf, lambda);

    const Eigen::VectorXcd E1 = cf.lag_values(lambda);
    const Eigen::VectorXcd E0 = cf.lag_values(0.0);
    const Eigen::VectorXcd E2 = cf.lag_values(2.0 * lambda);
    LagValues phi(d, m), phibar(d, m);
    for (int k = 0; k < m; ++k) {
        phi.col(k) = cv.p * E1(k);
        phibar.col(k) = cv.p.conjugate() * std::conj(E1(k));
    }

    const Eigen::VectorXcd w0 =
        solve_small(cf.eval(0.0), rhs_d2(model, xbar, phi, phibar), "Delta(0) is singular (transcritical coincidence)");
    const Eigen::VectorXcd w2 =
        solve_small(cf.eval(2.0 * lambda), rhs_d2(model, xbar, phi, phi), "Delta(2 i omega) is singular (2:1 resonance)");
    LagValues W0(d, m), W2(d, m);
    for (int k = 0; k < m; ++k) {
        W0.col(k) = w0 * E0(k);
        W2.col(k) = w2 * E2(k);
    }
    const Eigen::VectorXcd total = 0.5 * rhs_d3(model, xbar, phi, phi, phibar) + rhs_d2(model, xbar, W0, phi) +
                                   0.5 * rhs_d2(model, xbar, W2, phibar);
    return (cv.q.transpose() * total)(0);
}

double direction_a2(cd c, double sigma) {
    if (sigma == 0.0) throw Error(ErrorKind::InvalidArgument, "direction_a2: transversality sigma is zero");
    return c.real() / sigma;
}

double direction_a2(const HopfPoint& hp) { return direction_a2(hp.c, hp.sigma); }

NonresonanceVerdict nonresonance(const CharFn& cf, double omega, int k_max) {
    NonresonanceVerdict v;
    for (int k = 0; k <= k_max; ++k) {
        if (k == 1) continue;
        const cd lambda(0.0, k * omega);
        double margin;
        try {
            const Eigen::MatrixXcd Delta = cf.eval(lambda);
            margin = Eigen::JacobiSVD<Eigen::MatrixXcd>(Delta).singularValues().minCoeff() / (1.0 + k * std::abs(omega));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Conditioning) throw;
            margin = kInf;  // next to a pole of Delta_n, far from a root
        }
        v.margins.emplace_back(k, margin);
        if (!(margin > 1e-8)) {
            v.pass = false;
            v.failures.push_back("k=" + std::to_string(k) + ": Delta(k i omega) nearly singular");
        }
    }
    v.axis_clearance = kNaN;
    if (const auto* cfn = dynamic_cast<const CharFnN*>(&cf)) {
        const Eigen::VectorXcd ev = eigenvalues(assemble_An(*cfn));
        const double tol = 1e-6 * (1.0 + std::abs(omega));
        // Drop the critical pair itself (closest eigenvalues to +-i omega).
        std::vector<Eigen::Index> skip;
        for (double s : {1.0, -1.0}) {
            Eigen::Index best = -1;
            double bd = kInf;
            for (Eigen::Index i = 0; i < ev.size(); ++i) {
                if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
                const double dist = std::abs(ev(i) - cd(0.0, s * omega));
                if (dist < bd) bd = dist, best = i;
            }
            if (best >= 0 && bd < tol) skip.push_back(best);
        }
        double clearance = kInf;
        for (Eigen::Index i = 0; i < ev.size(); ++i) {
            if (std::find(skip.begin(), skip.end(), i) != skip.end()) continue;
            clearance = std::min(clearance, std::abs(ev(i).real()));
            if (std::abs(ev(i).real()) < 1e-6) {
                v.pass = false;
                v.failures.push_back("eigenvalue (" + std::to_string(ev(i).real()) + ", " + std::to_string(ev(i).imag()) +
                                     ") of A_n within 1e-6 of the imaginary axis");
            }
        }
        v.axis_clearance = clearance;
    }
    return v;
}

// ---------------------------------------------------------------- find_hopf

HopfPoint find_hopf(const CharFamily& family, const std::string& param, double omega_guess, double alpha_guess,
                    const HopfOptions& opt) {
    if (!(omega_guess > 0.0)) throw Error(ErrorKind::InvalidArgument, "find_hopf: omega guess must be positive");
    if (!family.model().has_param(param))
        throw Error(ErrorKind::InvalidArgument, "find_hopf: unknown parameter '" + param + "'");
    const std::vector<std::string> plist{param};

    HopfPoint hp;
    hp.param = param;
    hp.n = family.degree();
    double omega = omega_guess, alpha = alpha_guess;
    Eigen::VectorXd xbar;
    std::optional<CharFamily::Point> pt;
    bool converged = false, tiny_step = false;

    for (int it = 0; it <= opt.max_iter; ++it) {
        pt = family.at({{param, alpha}}, plist, xbar);
        xbar = pt->equilibrium;
        const HEval ev = evaluate_h(*pt->cf, cd(0.0, omega), plist);
        hp.residual_history.push_back(ev.residual);
        hp.iterations = it;
        const double scale = 1.0 + std::abs(omega);
        if (ev.residual <= opt.tol * scale || (tiny_step && ev.residual <= 1e3 * opt.tol * scale)) {
            hp.residual = ev.residual;
            converged = true;
            break;
        }
        if (it == opt.max_iter) break;
        const cd hw = cd(0.0, 1.0) * ev.h_lambda;
        const cd ha = ev.h_param[0];
        Eigen::Matrix2d J;
        J << hw.real(), ha.real(), hw.imag(), ha.imag();
        const double detJ = J.determinant();
        if (!(std::abs(detJ) > 1e-14 * J.squaredNorm()))
            throw Error(ErrorKind::Singular, "find_hopf: singular Jacobian (transversality or simplicity failure)");
        const Eigen::Vector2d step = -J.inverse() * Eigen::Vector2d(ev.h.real(), ev.h.imag());
        omega += step(0);
        alpha += step(1);
        if (!std::isfinite(omega) || !std::isfinite(alpha))
            throw Error(ErrorKind::NoConvergence, "find_hopf: Newton iterate is not finite");
        if (!(omega > 0.0)) throw Error(ErrorKind::NoConvergence, "find_hopf: omega collapsed to <= 0");
        tiny_step = std::abs(step(0)) <= 1e-14 * (1.0 + std::abs(omega)) &&
                    std::abs(step(1)) <= 1e-14 * (1.0 + std::abs(alpha));
    }
    if (!converged)
        throw Error(ErrorKind::NoConvergence,
                    "find_hopf: no convergence in " + std::to_string(opt.max_iter) + " iterations");

    hp.alpha = alpha;
    hp.omega = omega;
    hp.equilibrium = xbar;
    hp.params = pt->model.params();
    const CharFn& cf = *pt->cf;
    const cd lambda(0.0, omega);
    const CriticalVectors cv = critical_vectors(cf, lambda);
    hp.p_star = cv.p;
    hp.q_star = cv.q;
    hp.simplicity_margin = cv.simplicity;
    hp.sigma = (cv.q.transpose() * cf.dalpha(lambda, param) * cv.p)(0).real();
    hp.transversal = hp.sigma != 0.0;
    hp.nonresonance = nonresonance(cf, omega, opt.k_max);
    if (opt.compute_lyapunov) {
        hp.c = lyapunov_c(pt->model, xbar, cf, omega);
        hp.degenerate = hp.c.real() == 0.0;
        hp.a2 = hp.degenerate ? 0.0 : (hp.transversal ? hp.c.real() / hp.sigma : kNaN);
    } else {
        hp.c = kNaN;
        hp.a2 = kNaN;
    }
    return hp;
}

// ---------------------------------------------------------------- continuation

StabilityCurve trace_hopf_curve(const CharFamily& family, const std::string& p1, const std::string& p2,
                                const HopfPoint& start, const TraceOptions& opt) {
    if (opt.step == 0.0 || !std::isfinite(opt.step))
        throw Error(ErrorKind::InvalidArgument, "trace_hopf_curve: step must be nonzero");
    if (opt.max_points < 1) throw Error(ErrorKind::InvalidArgument, "trace_hopf_curve: max_points must be >= 1");
    if (p1 == p2) throw Error(ErrorKind::InvalidArgument, "trace_hopf_curve: parameters must differ");
    for (const auto& p : {p1, p2})
        if (!start.params.count(p)) throw Error(ErrorKind::InvalidArgument, "trace_hopf_curve: start lacks '" + p + "'");
    const std::vector<std::string> plist{p1, p2};

    using Vec3 = Eigen::Vector3d;
    struct Eval {
        Eigen::Vector2d F;
        Eigen::Matrix<double, 2, 3> J;
        double residual;
        Eigen::VectorXd xbar;
    };
    auto evaluate = [&](const Vec3& u, const Eigen::VectorXd& guess) {
        const auto pt = family.at({{p1, u(1)}, {p2, u(2)}}, plist, guess);
        const HEval ev = evaluate_h(*pt.cf, cd(0.0, u(0)), plist);
        const cd hw = cd(0.0, 1.0) * ev.h_lambda;
        Eval e;
        e.F << ev.h.real(), ev.h.imag();
        e.J << hw.real(), ev.h_param[0].real(), ev.h_param[1].real(), hw.imag(), ev.h_param[0].imag(),
            ev.h_param[1].imag();
        e.residual = ev.residual;
        e.xbar = pt.equilibrium;
        return e;
    };
    auto tangent = [](const Eigen::Matrix<double, 2, 3>& J) {
        Vec3 t = J.row(0).transpose().cross(J.row(1).transpose());
        const double nt = t.norm();
        if (!(nt > 0.0)) throw Error(ErrorKind::Singular, "trace_hopf_curve: rank-deficient Jacobian");
        return Vec3(t / nt);
    };

    StabilityCurve curve;
    curve.p1 = p1;
    curve.p2 = p2;
    Vec3 u(start.omega, start.params.at(p1), start.params.at(p2));
    Eval e0 = evaluate(u, start.equilibrium);
    if (!(e0.residual <= 1e-8 * (1.0 + std::abs(u(0)))))
        throw Error(ErrorKind::InvalidArgument, "trace_hopf_curve: start is not on the Hopf curve");
    Vec3 t = tangent(e0.J);
    if (std::abs(t(1)) > 1e-12 ? t(1) < 0 : t(2) < 0) t = -t;
    if (opt.step < 0) t = -t;
    curve.points.push_back({u(1), u(2), u(0), e0.residual, 0, 0.0});

    const double h0 = std::abs(opt.step), hmax = 4.0 * h0, hmin = 1e-8;
    double h = h0;
    Vec3 prev_u = u;
    Eigen::VectorXd xbar = e0.xbar;
    bool have_secant = false;
    std::string last_failure;

    // Newton on F = 0 plus the scalar constraint a . v = c.
    struct Corrected {
        bool ok = false;
        Vec3 v;
        Eigen::VectorXd xbar;
        int iters = 0;
        double residual = kInf;
    };
    auto correct = [&](Vec3 v, Eigen::VectorXd vx, const Vec3& a, double c) {
        Corrected out;
        try {
            for (out.iters = 1; out.iters <= 10; ++out.iters) {
                const Eval e = evaluate(v, vx);
                vx = e.xbar;
                out.residual = e.residual;
                Eigen::Matrix3d G;
                G.topRows<2>() = e.J;
                G.row(2) = a.transpose();
                Eigen::Vector3d r;
                r << e.F, a.dot(v) - c;
                if (out.residual <= 1e-12 * (1.0 + std::abs(v(0))) && out.iters > 1) {
                    out.ok = true;
                    break;
                }
                Eigen::FullPivLU<Eigen::Matrix3d> lu(G);
                if (!lu.isInvertible()) {
                    last_failure = "singular";
                    break;
                }
                v -= lu.solve(r);
                if (!v.allFinite() || !(v(0) > 0.0)) break;
            }
        } catch (const Error& err) {
            last_failure = std::string(kind_name(err.kind())) + ": " + err.what();
            out.ok = false;
        }
        out.v = v;
        out.xbar = vx;
        return out;
    };
    const Vec3 lower(0.0, opt.p1_range.first, opt.p2_range.first);
    const Vec3 upper(opt.omega_max, opt.p1_range.second, opt.p2_range.second);
    auto inside = [&](const Vec3& v, double slack) {
        for (int i = 0; i < 3; ++i) {
            const double pad = slack * (1.0 + std::abs(upper(i) - lower(i)));
            if ((i > 0 && v(i) < lower(i) - pad) || v(i) > upper(i) + pad) return false;
        }
        return true;
    };

    while (static_cast<int>(curve.points.size()) < opt.max_points) {
        Vec3 dir = t;
        if (have_secant) {
            const Vec3 s = u - prev_u;
            dir = s / s.norm();
        }
        const Vec3 pred = u + h * dir;
        Corrected cr = correct(pred, xbar, dir, dir.dot(pred));
        // Reject corrections that wander off the predicted arc.
        if (cr.ok && (cr.v - pred).norm() > 0.5 * h) cr.ok = false;
        if (cr.ok && (cr.v - u).dot(dir) <= 0.0) cr.ok = false;

        if (!cr.ok) {
            h *= 0.5;
            if (h < hmin) {
                curve.termination = last_failure == "singular" ? "singular" : "step_underflow";
                curve.message = "continuation step fell below 1e-8 near (" + std::to_string(u(1)) + ", " +
                                std::to_string(u(2)) + ")" + (last_failure.empty() ? "" : "; " + last_failure);
                return curve;
            }
            continue;
        }
        const Vec3 v = cr.v;
        if (!inside(v, 0.0)) {
            // Land the last point on the first bound crossed between u and v.
            int idx = -1;
            double frac = kInf, bound = 0.0;
            for (int i = 0; i < 3; ++i)
                for (const double b : {i > 0 ? lower(i) : -kInf, upper(i)}) {
                    if (!std::isfinite(b) || (v(i) - b) * (u(i) - b) > 0.0 || v(i) == u(i)) continue;
                    const double f = (b - u(i)) / (v(i) - u(i));
                    if (f < frac) frac = f, idx = i, bound = b;
                }
            if (idx >= 0) {
                const Corrected edge = correct(u + frac * (v - u), xbar, Vec3::Unit(idx), bound);
                if (edge.ok && inside(edge.v, 1e-12) && (edge.v - u).norm() <= 2.0 * h)
                    curve.points.push_back({edge.v(1), edge.v(2), edge.v(0), edge.residual, edge.iters, h});
            }
            curve.termination = "out_of_bounds";
            curve.message = "curve left the parameter window";
            return curve;
        }
        prev_u = u;
        u = v;
        xbar = cr.xbar;
        have_secant = true;
        curve.points.push_back({u(1), u(2), u(0), cr.residual, cr.iters, h});
        h = std::min(2.0 * h, hmax);
    }
    curve.termination = "max_points";
    return curve;
}

// ---------------------------------------------------------------- convergence study

unsigned worker_count() {
    if (const char* env = std::getenv("DDEPS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ConvergenceRow> convergence_study(const DdeModel& model, const std::string& param, double omega_guess,
                                              double alpha_guess, const std::vector<int>& n_list,
                                              bool finest_as_reference) {
    if (n_list.empty()) throw Error(ErrorKind::InvalidArgument, "convergence_study: empty n list");
    for (int n : n_list)
        if (n < 1) throw Error(ErrorKind::InvalidArgument, "convergence_study: n must be >= 1");
    std::optional<int> ref_n;
    if (finest_as_reference) ref_n = *std::max_element(n_list.begin(), n_list.end());
    const HopfPoint ref = find_hopf(CharFamily(model, ref_n), param, omega_guess, alpha_guess);

    std::vector<ConvergenceRow> rows(n_list.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            ConvergenceRow& row = rows[i];
            row.n = n_list[i];
            try {
                const HopfPoint hp = ref_n == row.n ? ref : find_hopf(CharFamily(model, row.n), param, ref.omega, ref.alpha);
                row.alpha_err = std::abs(hp.alpha - ref.alpha);
                row.omega_err = std::abs(hp.omega - ref.omega);
                row.a2_err = std::abs(hp.a2 - ref.a2);
                row.sigma = hp.sigma;
                row.simplicity = hp.simplicity_margin;
                double mm = kInf;
                for (const auto& [k, m] : hp.nonresonance.margins) mm = std::min(mm, m);
                row.min_margin = mm;
                row.status = hp.nonresonance.pass ? "ok" : "nonresonance_warning";
            } catch (const Error& e) {
                row.alpha_err = row.omega_err = row.a2_err = row.sigma = row.simplicity = row.min_margin = kNaN;
                row.status = std::string(kind_name(e.kind())) + ": " + e.what();
            }
        }
    };
    const unsigned nw = std::min<unsigned>(worker_count(), static_cast<unsigned>(rows.size()));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < nw; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return rows;
}

}  // namespace ddeps
