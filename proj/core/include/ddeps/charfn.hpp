// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <string>

#include "ddeps/model.hpp"

namespace ddeps {

using cd = std::complex<double>;

/// Characteristic matrix  Delta(lambda) = lambda I - sum_k C_k v_k(lambda).
/// Subclasses supply the lag values v_k: exact exponentials e^{-lambda tau_k} for the delay
/// equation, values of the interpolated eigenfunction for the discretization.
class CharFn {
public:
    explicit CharFn(LinearPart linear) : linear_(std::move(linear)) {}
    CharFn(const CharFn&) = default;
    CharFn& operator=(const CharFn&) = delete;
    virtual ~CharFn() = default;

    [[nodiscard]] const LinearPart& linear() const { return linear_; }
    [[nodiscard]] int dim() const { return linear_.dim(); }
    [[nodiscard]] int nlags() const { return static_cast<int>(linear_.delays.size()); }

    /// v_k(lambda), one per delay.
    [[nodiscard]] virtual Eigen::VectorXcd lag_values(cd lambda) const = 0;
    /// d v_k / d lambda.
    [[nodiscard]] virtual Eigen::VectorXcd lag_values_dlambda(cd lambda) const = 0;
    /// Discretization degree, or nullopt for the exact delay equation.
    [[nodiscard]] virtual std::optional<int> degree() const = 0;

    [[nodiscard]] Eigen::MatrixXcd eval(cd lambda) const;
    [[nodiscard]] Eigen::MatrixXcd dlambda(cd lambda) const;
    /// -sum_k C_k'(alpha) v_k(lambda). Throws InvalidArgument when param has no registered derivative.
    [[nodiscard]] Eigen::MatrixXcd dalpha(cd lambda, const std::string& param) const;
    [[nodiscard]] cd det(cd lambda) const { return eval(lambda).determinant(); }

    /// sum_k C_k v_k for given lag values.
    [[nodiscard]] Eigen::MatrixXcd combine(const std::vector<Eigen::MatrixXd>& mats, const Eigen::VectorXcd& v) const;

private:
    LinearPart linear_;
};

}  // namespace ddeps
