// SPDX-License-Identifier: MIT
#include "ddeps/cheb_mesh.hpp"

#include <cmath>
#include <numbers>

#include "ddeps/error.hpp"

namespace ddeps {
namespace {

Eigen::VectorXd product_weights(const Eigen::VectorXd& x) {
    const Eigen::Index m = x.size();
    Eigen::VectorXd w(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double p = 1.0;
        for (Eigen::Index k = 0; k < m; ++k)
            if (k != j) p *= x(j) - x(k);
        w(j) = 1.0 / p;
    }
    return w / w.cwiseAbs().maxCoeff();
}

// Second barycentric form; returns all basis values at t.
Eigen::VectorXd bary_basis(const Eigen::VectorXd& x, const Eigen::VectorXd& w, double t) {
    const Eigen::Index m = x.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        if (t == x(j)) {
            out(j) = 1.0;
            return out;
        }
    }
    double denom = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        out(j) = w(j) / (t - x(j));
        denom += out(j);
    }
    return out / denom;
}

}  // namespace

Mesh make_mesh(int n) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "mesh degree must be >= 1, got " + std::to_string(n));
    Mesh m;
    m.n = n;
    m.nodes.resize(n + 1);
    // sin form of (cos(j pi/n) - 1)/2: symmetric about -1/2 to the last bit.
    for (int j = 0; j <= n; ++j)
        m.nodes(j) = (std::sin(std::numbers::pi * (n - 2 * j) / (2.0 * n)) - 1.0) / 2.0;
    m.nodes(0) = 0.0;
    m.nodes(n) = -1.0;
    m.bary_weights = product_weights(m.nodes);
    return m;
}

double lagrange_eval(const Mesh& mesh, int j, double theta) {
    if (j < 0 || j > mesh.n) throw Error(ErrorKind::InvalidArgument, "basis index out of range");
    return bary_basis(mesh.nodes, mesh.bary_weights, theta)(j);
}

Eigen::VectorXd lagrange_basis(const Mesh& mesh, double theta) {
    return bary_basis(mesh.nodes, mesh.bary_weights, theta);
}

Eigen::MatrixXd diff_matrix_full(const Mesh& mesh) {
    const int m = mesh.n + 1;
    const auto& x = mesh.nodes;
    const auto& w = mesh.bary_weights;
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            F(i, j) = (w(j) / w(i)) / (x(i) - x(j));
            s += F(i, j);
        }
        F(i, i) = -s;
    }
    return F;
}

DiffOp diff_matrix(const Mesh& mesh) {
    const Eigen::MatrixXd F = diff_matrix_full(mesh);
    const int n = mesh.n;
    return DiffOp{F.bottomRightCorner(n, n), F.col(0).tail(n)};
}

double interpolate(const Mesh& mesh, double head, const Eigen::VectorXd& tail, double theta) {
    if (tail.size() != mesh.n)
        throw Error(ErrorKind::InvalidArgument, "interpolate: tail length " + std::to_string(tail.size()) +
                                                    " does not match mesh degree " + std::to_string(mesh.n));
    const Eigen::VectorXd l = lagrange_basis(mesh, theta);
    return head * l(0) + l.tail(mesh.n).dot(tail);
}

Eigen::VectorXd interpolate(const Mesh& mesh, const Eigen::VectorXd& head, const Eigen::MatrixXd& tail,
                            double theta) {
    if (tail.rows() != mesh.n || tail.cols() != head.size())
        throw Error(ErrorKind::InvalidArgument, "interpolate: tail shape does not match mesh and head");
    const Eigen::VectorXd l = lagrange_basis(mesh, theta);
    return l(0) * head + tail.transpose() * l.tail(mesh.n);
}

double lebesgue_constant(const Mesh& mesh) {
    const Eigen::VectorXd x = mesh.nodes.tail(mesh.n);
    const Eigen::VectorXd w = product_weights(x);
    constexpr int grid = 2048;
    double best = 0.0;
    for (int k = 0; k < grid; ++k) {
        const double t = -static_cast<double>(k) / (grid - 1);
        best = std::max(best, bary_basis(x, w, t).cwiseAbs().sum());
    }
    return best;
}

}  // namespace ddeps
