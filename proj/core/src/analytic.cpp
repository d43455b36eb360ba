// SPDX-License-Identifier: MIT
#include "ddeps/analytic.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ddeps/cheb_mesh.hpp"
#include "ddeps/error.hpp"

namespace ddeps {

Eigen::VectorXcd CharFn0::lag_values(cd lambda) const {
    const auto& tau = linear().delays;
    Eigen::VectorXcd v(static_cast<Eigen::Index>(tau.size()));
    for (std::size_t k = 0; k < tau.size(); ++k) v(static_cast<Eigen::Index>(k)) = std::exp(-lambda * tau[k]);
    return v;
}

Eigen::VectorXcd CharFn0::lag_values_dlambda(cd lambda) const {
    const auto& tau = linear().delays;
    Eigen::VectorXcd v(static_cast<Eigen::Index>(tau.size()));
    for (std::size_t k = 0; k < tau.size(); ++k) v(static_cast<Eigen::Index>(k)) = -tau[k] * std::exp(-lambda * tau[k]);
    return v;
}

namespace blowfly {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double pi = std::numbers::pi;

// Last entries of (D - lambda I)^{-1} D 1 and (D - lambda I)^{-2} D 1.
struct LagTail {
    cd z;
    cd dz;
};

class LagSolver {
public:
    explicit LagSolver(int n) : diff_(diff_matrix(make_mesh(n))) {}
    LagTail at(cd lambda) const {
        Eigen::MatrixXcd S = diff_.D.cast<cd>();
        S.diagonal().array() -= lambda;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(S);
        const Eigen::VectorXcd z = lu.solve((-diff_.d0).cast<cd>());
        const Eigen::VectorXcd dz = lu.solve(z);
        return {z(z.size() - 1), dz(dz.size() - 1)};
    }

private:
    DiffOp diff_;
};

Coeffs ps_boundary_from(const LagSolver& ls, double omega, int n) {
    if (omega == 0.0) throw Error(ErrorKind::InvalidArgument, "ps_boundary: omega = 0 is singular");
    const cd z = ls.at(cd(0.0, omega)).z;
    if (!(std::abs(z.imag()) > 1e-14 * (1.0 + std::abs(omega))))
        throw Error(ErrorKind::InvalidArgument, "ps_boundary: Im z_n vanishes at omega = " + std::to_string(omega) +
                                                    " (singular point of the n = " + std::to_string(n) + " boundary)");
    return {-omega * z.real() / z.imag(), omega / z.imag()};
}

cd c0_unchecked(double omega) {
    const auto [b1, b2] = dde_boundary(omega);
    if (b1 + b2 == 0.0) throw Error(ErrorKind::InvalidArgument, "c0: b1 + b2 = 0 (transcritical point)");
    const auto [mu, beta] = to_mu_beta(b1, b2);
    const double g2 = d2G(mu, beta), g3 = d3G(mu, beta);
    const cd e1 = std::exp(cd(0.0, -omega)), e2 = std::exp(cd(0.0, -2.0 * omega));
    const cd B10 = e1 / (1.0 + b2 * e1);
    const cd B20 = e2 / (cd(0.0, 2.0 * omega) - b1 - b2 * e2) * B10;
    return 0.5 * g3 * B10 - g2 * g2 / (b1 + b2) * B10 + 0.5 * g2 * g2 * B20;
}

cd cn_from(const LagSolver& ls, int n, double omega) {
    const auto [b1, b2] = ps_boundary_from(ls, omega, n);
    if (b1 + b2 == 0.0) throw Error(ErrorKind::InvalidArgument, "cn: b1 + b2 = 0 (transcritical point)");
    const auto [mu, beta] = to_mu_beta(b1, b2);
    const double g2 = d2G(mu, beta), g3 = d3G(mu, beta);
    const LagTail t1 = ls.at(cd(0.0, omega));
    const cd zc = ls.at(cd(0.0, -omega)).z;
    const cd z2 = ls.at(cd(0.0, 2.0 * omega)).z;
    const cd den1 = 1.0 - b2 * t1.dz;
    const cd den2 = cd(0.0, 2.0 * omega) - b1 - b2 * z2;
    if (den1 == 0.0 || den2 == 0.0) throw Error(ErrorKind::Singular, "cn: vanishing denominator");
    const cd B1 = t1.z * t1.z * zc / den1;
    const cd B2 = z2 / den2 * B1;
    return 0.5 * g3 * B1 - g2 * g2 / (b1 + b2) * B1 + 0.5 * g2 * g2 * B2;
}

double nan_if_throws(auto&& f) {
    try {
        return f();
    } catch (const Error&) {
        return kNaN;
    }
}

}  // namespace

Coeffs dde_boundary(double omega) {
    const double w2 = omega * omega;
    if (std::abs(omega) < 1e-4) return {1.0 - w2 / 3.0 - w2 * w2 / 45.0, -(1.0 + w2 / 6.0 + 7.0 * w2 * w2 / 360.0)};
    const double s = std::sin(omega);
    const double k = std::round(omega / pi);
    if (k != 0.0 && std::abs(omega - k * pi) < 1e-12 * std::max(1.0, std::abs(omega)))
        throw Error(ErrorKind::InvalidArgument,
                    "dde_boundary: omega = " + std::to_string(omega) + " is a multiple of pi (singular)");
    return {omega * std::cos(omega) / s, -omega / s};
}

Coeffs ps_boundary(int n, double omega) { return ps_boundary_from(LagSolver(n), omega, n); }

PopParams to_mu_beta(double b1, double b2) {
    if (!(b1 < 0.0)) throw Error(ErrorKind::InvalidArgument, "to_mu_beta: requires b1 < 0 (mu > 0)");
    return {-b1, -b1 * std::exp(1.0 + b2 / b1)};
}

Coeffs from_mu_beta(double mu, double beta) {
    if (!(mu > 0.0 && beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "from_mu_beta: requires mu, beta > 0");
    return {-mu, mu * (1.0 - std::log(beta / mu))};
}

double d2G(double mu, double beta) { return mu * std::log(beta / mu) - 2.0 * mu; }
double d3G(double mu, double beta) { return -mu * std::log(beta / mu) + 3.0 * mu; }

cd c0(double omega) {
    if (!(omega > pi / 2 && omega < pi)) throw Error(ErrorKind::InvalidArgument, "c0: omega must lie in (pi/2, pi)");
    return c0_unchecked(omega);
}

cd cn(int n, double omega) { return cn_from(LagSolver(n), n, omega); }

LambdaPrime lambda_prime_n2(double omega) {
    if (omega == 0.0) throw Error(ErrorKind::InvalidArgument, "lambda_prime_n2: omega = 0 excluded");
    if (!(std::abs(omega) < 4.0)) throw Error(ErrorKind::InvalidArgument, "lambda_prime_n2: omega must lie in (-4, 4)");
    const auto [b1, b2] = ps_boundary(2, omega);
    const cd i(0.0, 1.0);
    const cd value = (i * omega - 4.0) / (-3.0 * omega * omega + 6.0 * i * omega + 4.0 - 2.0 * i * omega * b1 - 3.0 * b1 + b2);
    const double re = (14.0 - 2.0 * b1) / (4.0 * omega * omega + (6.0 - 2.0 * b1) * (6.0 - 2.0 * b1));
    return {value, re};
}

std::vector<ChartRow> chart(int n, double omega_min, double omega_max, int steps) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "chart: n must be >= 1");
    if (steps < 1) throw Error(ErrorKind::InvalidArgument, "chart: steps must be >= 1");
    if (!(omega_max > omega_min)) throw Error(ErrorKind::InvalidArgument, "chart: need omega_min < omega_max");
    constexpr double excl = 1e-3;
    const LagSolver ls(n);
    std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s <= steps; ++s) grid[static_cast<std::size_t>(s)] = omega_min + (omega_max - omega_min) * s / steps;

    auto fill = [](ChartRow& r) {
        if (r.b1 < 0.0) {
            r.mu = -r.b1;
            r.beta_over_mu = std::exp(1.0 + r.b2 / r.b1);
        } else {
            r.mu = kNaN;
            r.beta_over_mu = kNaN;
        }
    };

    std::vector<ChartRow> rows;
    // Delay equation: singular at nonzero multiples of pi.
    for (double w : grid) {
        const double k = std::round(w / pi);
        if (k != 0.0 && std::abs(w - k * pi) < excl) continue;
        ChartRow r{"dde", 0, w, 0, 0, 0, 0, 0};
        for (double kk = std::ceil(omega_min / pi); kk * pi < w; kk += 1.0)
            if (kk != 0.0 && kk * pi > omega_min) ++r.branch;
        const auto c = dde_boundary(w);
        r.b1 = c.b1;
        r.b2 = c.b2;
        fill(r);
        r.re_c = r.b1 < 0.0 ? nan_if_throws([&] { return c0_unchecked(w).real(); }) : kNaN;
        rows.push_back(r);
    }

    // Discretization: singular where Im z_n changes sign away from omega = 0.
    auto h = [&](double w) { return ls.at(cd(0.0, w)).z.imag(); };
    std::vector<double> sing;
    for (std::size_t s = 0; s + 1 < grid.size(); ++s) {
        double a = grid[s], b = grid[s + 1];
        if (a <= 0.0 && b >= 0.0) continue;
        double ha = h(a), hb = h(b);
        if (ha == 0.0) {
            sing.push_back(a);
            continue;
        }
        if (hb == 0.0 || (ha < 0) == (hb < 0)) continue;  // an exact grid root is taken at the next interval
        for (int it = 0; it < 100 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
            const double m = 0.5 * (a + b);
            const double hm = h(m);
            if ((hm < 0) == (ha < 0)) a = m, ha = hm;
            else b = m;
        }
        sing.push_back(0.5 * (a + b));
    }
    for (double w : grid) {
        if (std::abs(w) < 1e-8) continue;
        bool skip = false;
        int branch = 0;
        for (double sp : sing) {
            if (std::abs(w - sp) < excl) skip = true;
            if (sp < w) ++branch;
        }
        if (skip) continue;
        Coeffs c;
        try {
            c = ps_boundary_from(ls, w, n);
        } catch (const Error&) {
            continue;
        }
        ChartRow r{"ps", branch, w, c.b1, c.b2, 0, 0, 0};
        fill(r);
        r.re_c = r.b1 < 0.0 ? nan_if_throws([&] { return cn_from(ls, n, w).real(); }) : kNaN;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace blowfly
}  // namespace ddeps
