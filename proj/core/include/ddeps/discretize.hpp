// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "ddeps/charfn.hpp"
#include "ddeps/cheb_mesh.hpp"
#include "ddeps/model.hpp"

namespace ddeps {

/// Pseudospectral ODE of dimension (n+1)d. State layout: blocks y_0, y_1, ..., y_n of size d,
/// so component i of node j sits at j*d + i.
struct PsSystem {
    DdeModel model;
    LinearPart linear;
    Eigen::VectorXd equilibrium;
    int n = 0;
    Mesh mesh;
    DiffOp diff;
    Eigen::MatrixXd lag_basis;  ///< (n+1) x nlags, column k = l_j(-tau_k)
    Eigen::MatrixXd lower;      ///< n x (n+1), rows 1..n of the full differentiation matrix

    /// Builds mesh, differentiation matrix, and linearization at xbar.
    [[nodiscard]] static PsSystem build(const DdeModel& model, int n, const Eigen::VectorXd& xbar,
                                        const std::vector<std::string>& diff_params = {},
                                        ParamDerivative mode = ParamDerivative::Analytic);
    /// As above with the equilibrium from default_equilibrium.
    [[nodiscard]] static PsSystem build(const DdeModel& model, int n);

    [[nodiscard]] int dim() const { return model.dim(); }
    [[nodiscard]] int size() const { return (n + 1) * model.dim(); }
};

/// Lag-basis matrix: column k holds l_j(-tau_k), j = 0..n.
[[nodiscard]] Eigen::MatrixXd lag_basis_matrix(const Mesh& mesh, const std::vector<double>& delays);

[[nodiscard]] Eigen::MatrixXd assemble_An(const PsSystem& ps);

/// Nonlinear right-hand side. Top block evaluates the model on the interpolated history.
[[nodiscard]] Eigen::VectorXd rhs(const PsSystem& ps, const Eigen::VectorXd& state);

/// Discretized characteristic matrix. LU factors of (D - lambda I) are cached per lambda
/// behind a mutex, so one instance may be shared across threads.
class CharFnN final : public CharFn {
public:
    CharFnN(LinearPart linear, int n);
    CharFnN(const CharFnN& other);

    [[nodiscard]] Eigen::VectorXcd lag_values(cd lambda) const override;
    [[nodiscard]] Eigen::VectorXcd lag_values_dlambda(cd lambda) const override;
    [[nodiscard]] std::optional<int> degree() const override { return mesh_.n; }

    [[nodiscard]] const Mesh& mesh() const { return mesh_; }
    [[nodiscard]] const DiffOp& diff() const { return diff_; }
    [[nodiscard]] const Eigen::MatrixXd& lag_basis() const { return lag_basis_; }

    /// z = (D - lambda I)^{-1} D 1, the tail of the discrete eigenfunction with head 1.
    [[nodiscard]] Eigen::VectorXcd lag_solve(cd lambda) const;

    /// Solves (D - lambda I) X = B. Throws Conditioning when 1/rcond > 1e14.
    [[nodiscard]] Eigen::MatrixXcd shifted_solve(cd lambda, const Eigen::MatrixXcd& B) const;
    /// Solves (D - lambda I)^T X = B.
    [[nodiscard]] Eigen::MatrixXcd shifted_solve_transposed(cd lambda, const Eigen::MatrixXcd& B) const;

    /// Block-row coefficients M_j = sum_k C_k l_j(-tau_k), j = 0..n.
    [[nodiscard]] const std::vector<Eigen::MatrixXd>& top_blocks() const { return M_; }

private:
    using LU = Eigen::PartialPivLU<Eigen::MatrixXcd>;
    std::shared_ptr<const LU> factor(cd lambda) const;

    Mesh mesh_;
    DiffOp diff_;
    Eigen::MatrixXd lag_basis_;
    std::vector<Eigen::MatrixXd> M_;

    mutable std::mutex mu_;
    mutable std::vector<std::pair<cd, std::shared_ptr<const LU>>> cache_;
};

/// A_n rebuilt from a discretized characteristic function (same matrix as assemble_An).
[[nodiscard]] Eigen::MatrixXd assemble_An(const CharFnN& cf);

/// Right eigenvector (p_star, p_star (x) z). Throws InvalidArgument when Delta_n(lambda) p_star is not ~0.
[[nodiscard]] Eigen::VectorXcd eigvec_right(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& p_star);

/// Left eigenvector q (row, as a column vector) with q A_n = lambda q, scaled so that q . p = 1
/// (plain dot product) against the given right eigenvector p. q_star is the left kernel vector
/// of Delta_n(lambda); pass an empty vector for d = 1.
[[nodiscard]] Eigen::VectorXcd eigvec_left(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& p,
                                           const Eigen::VectorXcd& q_star = {});

/// (lambda I - A_n)^{-1} zeta without forming A_n. Throws Singular if Delta_n(lambda) is singular.
[[nodiscard]] Eigen::VectorXcd resolvent_apply(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& zeta);

/// Spectral projection p (q . zeta).
[[nodiscard]] Eigen::VectorXcd projection_apply(const Eigen::VectorXcd& p, const Eigen::VectorXcd& q,
                                                const Eigen::VectorXcd& zeta);

/// Balancing followed by Hessenberg QR. Sorted by decreasing real part, then decreasing imaginary part.
[[nodiscard]] Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& A);

/// Right and left kernel vectors of a singular d x d matrix via SVD. The right vector is
/// scaled to first component 1 when that component is not negligible.
struct KernelPair {
    Eigen::VectorXcd right;
    Eigen::VectorXcd left;  ///< row vector stored as column, left . M = 0 (no conjugation)
    double sigma_min = 0.0;
};
[[nodiscard]] KernelPair kernel_vectors(const Eigen::MatrixXcd& M);

}  // namespace ddeps
