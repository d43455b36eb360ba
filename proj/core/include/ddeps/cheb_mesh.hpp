// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ddeps {

/// Chebyshev extremal mesh on [-1, 0]: theta_0 = 0 > theta_1 > ... > theta_n = -1.
struct Mesh {
    int n = 0;
    Eigen::VectorXd nodes;         ///< n+1 nodes, strictly decreasing
    Eigen::VectorXd bary_weights;  ///< n+1 barycentric weights, scaled to max |w| = 1
};

/// Differentiation operator on the reduced mesh.
/// D(i-1, j-1) = l_j'(theta_i) for i, j = 1..n and d0(i-1) = l_0'(theta_i).
struct DiffOp {
    Eigen::MatrixXd D;
    Eigen::VectorXd d0;
};

/// Throws InvalidArgument for n < 1.
[[nodiscard]] Mesh make_mesh(int n);

/// l_j(theta) by the second barycentric form. Exact at nodes.
[[nodiscard]] double lagrange_eval(const Mesh& mesh, int j, double theta);

/// All n+1 basis values at theta.
[[nodiscard]] Eigen::VectorXd lagrange_basis(const Mesh& mesh, double theta);

/// Full (n+1)x(n+1) matrix of l_j'(theta_i).
[[nodiscard]] Eigen::MatrixXd diff_matrix_full(const Mesh& mesh);

[[nodiscard]] DiffOp diff_matrix(const Mesh& mesh);

/// Value at theta of the interpolant through head at theta_0 and tail at theta_1..theta_n.
[[nodiscard]] double interpolate(const Mesh& mesh, double head, const Eigen::VectorXd& tail, double theta);

/// Componentwise variant: head has d entries, tail is n x d (row j-1 holds node j).
[[nodiscard]] Eigen::VectorXd interpolate(const Mesh& mesh, const Eigen::VectorXd& head,
                                          const Eigen::MatrixXd& tail, double theta);

/// Grid maximum (2048 uniform points) of the reduced-basis Lebesgue function.
/// A lower bound on the true constant.
[[nodiscard]] double lebesgue_constant(const Mesh& mesh);

}  // namespace ddeps
