// SPDX-License-Identifier: MIT
#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "ddeps/charfn.hpp"

namespace ddeps {

/// Exact characteristic matrix of a point-delay equation: v_k(lambda) = exp(-lambda tau_k).
class CharFn0 final : public CharFn {
public:
    explicit CharFn0(LinearPart linear) : CharFn(std::move(linear)) {}
    [[nodiscard]] Eigen::VectorXcd lag_values(cd lambda) const override;
    [[nodiscard]] Eigen::VectorXcd lag_values_dlambda(cd lambda) const override;
    [[nodiscard]] std::optional<int> degree() const override { return std::nullopt; }
};

/// Closed forms for the scaled blowflies equation x' = -mu x + beta x(t-1) exp(-x(t-1)),
/// written at the positive equilibrium as x' = b1 x + b2 x(t-1) + G(x(t-1)).
namespace blowfly {

struct Coeffs {
    double b1 = 0.0;
    double b2 = 0.0;
};
struct PopParams {
    double mu = 0.0;
    double beta = 0.0;
};

/// Delta_0(i omega) = 0:  b1 = omega cot omega,  b2 = -omega / sin omega.
/// Series fallback for |omega| < 1e-4. Throws InvalidArgument near nonzero multiples of pi.
[[nodiscard]] Coeffs dde_boundary(double omega);

/// Delta_n(i omega) = 0 from the last entry z_n of (D - i omega I)^{-1} D 1.
/// Throws InvalidArgument (with the location) when Im z_n vanishes.
[[nodiscard]] Coeffs ps_boundary(int n, double omega);

/// mu = -b1, beta = -b1 exp(1 + b2/b1). Requires b1 < 0.
[[nodiscard]] PopParams to_mu_beta(double b1, double b2);
/// b1 = -mu, b2 = mu (1 - ln(beta/mu)). Requires mu > 0, beta > 0.
[[nodiscard]] Coeffs from_mu_beta(double mu, double beta);

/// Second and third derivative of G at the equilibrium.
[[nodiscard]] double d2G(double mu, double beta);
[[nodiscard]] double d3G(double mu, double beta);

/// Lyapunov coefficient of the delay equation along its Hopf boundary, omega in (pi/2, pi).
[[nodiscard]] cd c0(double omega);
/// Lyapunov coefficient of the degree-n discretization along its Hopf boundary.
[[nodiscard]] cd cn(int n, double omega);

/// Eigenvalue derivative for n = 2 along the boundary when b2 varies (complex closed form),
/// and the closed form of its real part.
struct LambdaPrime {
    cd value;
    double re_closed = 0.0;
};
[[nodiscard]] LambdaPrime lambda_prime_n2(double omega);

/// One row of a boundary chart. curve is "dde" or "ps". Undefined quantities are NaN.
struct ChartRow {
    std::string curve;
    int branch = 0;
    double omega = 0.0;
    double b1 = 0.0;
    double b2 = 0.0;
    double mu = 0.0;
    double beta_over_mu = 0.0;
    double re_c = 0.0;
};

/// Uniform omega sweep of both boundaries. Grid points within 1e-3 of a singularity are skipped;
/// branches are numbered by the singularities crossed.
[[nodiscard]] std::vector<ChartRow> chart(int n, double omega_min, double omega_max, int steps);

}  // namespace blowfly
}  // namespace ddeps
