// SPDX-License-Identifier: MIT
#include "ddeps/simulate.hpp"

#include <algorithm>
#include <boost/numeric/odeint/stepper/runge_kutta_dopri5.hpp>
#include <cmath>
#include <numeric>

#include "ddeps/error.hpp"

namespace ddeps {

namespace odeint = boost::numeric::odeint;

Eigen::VectorXd sample_history(const PsSystem& ps, const History& phi) {
    const int d = ps.dim();
    Eigen::VectorXd y(ps.size());
    for (int j = 0; j <= ps.n; ++j) {
        const double theta = ps.mesh.nodes(j);
        Eigen::VectorXd v;
        try {
            v = phi(theta);
        } catch (const Error& e) {
            throw Error(e.kind(), std::string(e.what()) + " (history at theta = " + std::to_string(theta) + ")");
        }
        if (v.size() != d) throw Error(ErrorKind::InvalidArgument, "history returned a vector of the wrong size");
        y.segment(j * d, d) = v;
    }
    return y;
}

Trajectory integrate(const PsSystem& ps, const Eigen::VectorXd& y0, double t_end, const IntegrateOptions& opt) {
    if (!(opt.rel_tol >= 1e-12 && opt.rel_tol <= 1e-2) || !(opt.abs_tol >= 1e-12 && opt.abs_tol <= 1e-2))
        throw Error(ErrorKind::InvalidArgument, "integrate: tolerances must lie in [1e-12, 1e-2]");
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw Error(ErrorKind::InvalidArgument, "integrate: t_end must be > 0");
    if (!(opt.max_step > 0.0)) throw Error(ErrorKind::InvalidArgument, "integrate: max_step must be > 0");
    if (y0.size() != ps.size()) throw Error(ErrorKind::InvalidArgument, "integrate: initial state has wrong size");
    if (!y0.allFinite()) throw Error(ErrorKind::NonFinite, "integrate: initial state is not finite");

    using State = std::vector<double>;
    auto sys = [&ps](const State& x, State& dxdt, double) {
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::VectorXd f = rhs(ps, xv);
        std::copy(f.data(), f.data() + f.size(), dxdt.begin());
    };
    odeint::runge_kutta_dopri5<State> stepper;

    const std::size_t N = static_cast<std::size_t>(y0.size());
    State x(y0.data(), y0.data() + N), dxdt(N), xnew(N), dxdtnew(N), xerr(N);
    sys(x, dxdt, 0.0);

    Trajectory tr;
    tr.times.push_back(0.0);
    tr.states.push_back(y0);
    tr.errors.push_back(0.0);

    double t = 0.0, h = std::min(opt.initial_step, opt.max_step);
    constexpr double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
    while (t < t_end) {
        h = std::min({h, opt.max_step, t_end - t});
        stepper.do_step(sys, x, dxdt, t, xnew, dxdtnew, h, xerr);
        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(x[i]), std::abs(xnew[i]));
            err = std::max(err, std::abs(xerr[i]) / sc);
        }
        if (!std::isfinite(err)) {
            h *= fac_min;
        } else if (err <= 1.0) {
            t = (t_end - t <= h) ? t_end : t + h;
            x.swap(xnew);
            dxdt.swap(dxdtnew);
            Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(N));
            if (!xv.allFinite())
                throw Error(ErrorKind::NonFinite, "integrate: state became non-finite at t = " + std::to_string(t));
            tr.times.push_back(t);
            tr.states.emplace_back(xv);
            tr.errors.push_back(err);
            h *= std::clamp(safety * std::pow(std::max(err, 1e-10), -0.2), 1.0, fac_max);
            continue;
        } else {
            h *= std::clamp(safety * std::pow(err, -0.2), fac_min, 1.0);
        }
        if (h < opt.min_step * std::max(1.0, std::abs(t))) {
            Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(N));
            throw Error(ErrorKind::StepUnderflow, "integrate: step size underflow at t = " + std::to_string(t) +
                                                      " (|state| = " + std::to_string(xv.norm()) + ")");
        }
    }
    return tr;
}

PeriodEstimate estimate_period(const Trajectory& traj, int component, double skip) {
    if (!(skip >= 0.0 && skip < 1.0)) throw Error(ErrorKind::InvalidArgument, "estimate_period: skip must lie in [0, 1)");
    if (traj.times.size() < 3) throw Error(ErrorKind::NotOscillatory, "estimate_period: trajectory too short");
    if (component < 0 || component >= traj.states.front().size())
        throw Error(ErrorKind::InvalidArgument, "estimate_period: component out of range");

    const double t0 = traj.times.front() + skip * (traj.times.back() - traj.times.front());
    std::vector<double> t, y;
    for (std::size_t i = 0; i < traj.times.size(); ++i)
        if (traj.times[i] >= t0) {
            t.push_back(traj.times[i]);
            y.push_back(traj.states[i](component));
        }
    if (t.size() < 3) throw Error(ErrorKind::NotOscillatory, "estimate_period: too few samples after the transient");

    // Time-weighted mean (samples are not uniform).
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) area += 0.5 * (y[i] + y[i + 1]) * (t[i + 1] - t[i]);
    const double mean = area / (t.back() - t.front());
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo < 1e-6 * (1.0 + std::abs(mean)))
        throw Error(ErrorKind::NotOscillatory, "estimate_period: amplitude below threshold (equilibrium?)");

    std::vector<double> cross;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double a = y[i] - mean, b = y[i + 1] - mean;
        if (!(a < 0.0 && b >= 0.0)) continue;
        double tc = t[i] - a * (t[i + 1] - t[i]) / (b - a);
        // Parabolic refinement through three neighbouring samples.
        const std::size_t k = (i + 2 < t.size()) ? i : (i > 0 ? i - 1 : i);
        if (k + 2 < t.size()) {
            const double x0 = t[k], x1 = t[k + 1], x2 = t[k + 2];
            const double f0 = y[k] - mean, f1 = y[k + 1] - mean, f2 = y[k + 2] - mean;
            const double d01 = (f1 - f0) / (x1 - x0), d12 = (f2 - f1) / (x2 - x1);
            const double c2 = (d12 - d01) / (x2 - x0);
            // p(s) = f0 + d01 (s - x0) + c2 (s - x0)(s - x1)
            const double A = c2, B = d01 - c2 * (x0 + x1), C = f0 - d01 * x0 + c2 * x0 * x1;
            if (std::abs(A) > 1e-300) {
                const double disc = B * B - 4.0 * A * C;
                if (disc >= 0.0) {
                    const double sq = std::sqrt(disc);
                    for (double r : {(-B + sq) / (2.0 * A), (-B - sq) / (2.0 * A)})
                        if (r >= t[i] && r <= t[i + 1]) tc = r;
                }
            }
        }
        cross.push_back(tc);
    }
    if (cross.size() < 3)
        throw Error(ErrorKind::NotOscillatory,
                    "estimate_period: only " + std::to_string(cross.size()) + " mean-level crossings after the transient");

    PeriodEstimate best;
    best.spread = std::numeric_limits<double>::infinity();
    best.crossings = static_cast<int>(cross.size());
    for (int m = 1; m <= 4; ++m) {
        if (cross.size() < static_cast<std::size_t>(m) + 2) break;
        std::vector<double> P;
        for (std::size_t i = 0; i + static_cast<std::size_t>(m) < cross.size(); ++i) P.push_back(cross[i + m] - cross[i]);
        const double mp = std::accumulate(P.begin(), P.end(), 0.0) / static_cast<double>(P.size());
        const auto [pl, ph] = std::minmax_element(P.begin(), P.end());
        const double spread = (*ph - *pl) / mp;
        if (spread < best.spread) {
            best.period = mp;
            best.spread = spread;
            best.grouping = m;
        }
        if (spread <= 1e-3) {
            best.period = mp;
            best.spread = spread;
            best.grouping = m;
            break;
        }
    }
    if (best.spread > 0.2)
        throw Error(ErrorKind::NotPeriodic, "estimate_period: crossing spacings spread " + std::to_string(best.spread) +
                                                " (quasiperiodic or chaotic attractor?)");
    return best;
}

PeriodEstimate attractor_period(const DdeModel& model, const std::string& param, double value,
                                const PeriodDoublingOptions& opt) {
    const DdeModel m = model.with_param(param, value);
    const PsSystem ps = PsSystem::build(m, opt.n);
    Eigen::VectorXd h0 = ps.equilibrium.array() + 0.1 * (1.0 + ps.equilibrium.array().abs());
    const Eigen::VectorXd y0 = sample_history(ps, [&](double) { return h0; });
    return estimate_period(integrate(ps, y0, opt.t_end, opt.integrate), 0, opt.skip);
}

std::pair<double, double> bracket_period_doubling(const DdeModel& model, const std::string& param,
                                                  std::pair<double, double> range, const PeriodDoublingOptions& opt) {
    auto [a, b] = range;
    if (!(b > a)) throw Error(ErrorKind::InvalidArgument, "bracket_period_doubling: range must have positive width");
    if (!(opt.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "bracket_period_doubling: tol must be > 0");
    const double pa = attractor_period(model, param, a, opt).period;
    const double pb = attractor_period(model, param, b, opt).period;
    auto jump = [](double p, double q) { return std::max(p, q) / std::min(p, q) > 1.5; };
    if (!jump(pa, pb))
        throw Error(ErrorKind::NoPeriodJump, "bracket_period_doubling: periods " + std::to_string(pa) + " and " +
                                                 std::to_string(pb) + " at the range ends show no jump");
    while (b - a > opt.tol) {
        const double mid = 0.5 * (a + b);
        const double pm = attractor_period(model, param, mid, opt).period;
        if (jump(pa, pm)) b = mid;
        else a = mid;
    }
    return {a, b};
}

}  // namespace ddeps
