// SPDX-License-Identifier: MIT
#include "ddeps/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>

#include "ddeps/error.hpp"

namespace ddeps {

Eigen::MatrixXd lag_basis_matrix(const Mesh& mesh, const std::vector<double>& delays) {
    Eigen::MatrixXd B(mesh.n + 1, static_cast<Eigen::Index>(delays.size()));
    for (std::size_t k = 0; k < delays.size(); ++k) B.col(static_cast<Eigen::Index>(k)) = lagrange_basis(mesh, -delays[k]);
    return B;
}

PsSystem PsSystem::build(const DdeModel& model, int n, const Eigen::VectorXd& xbar,
                         const std::vector<std::string>& diff_params, ParamDerivative mode) {
    PsSystem ps{model, linearize(model, xbar, diff_params, mode), xbar, n, make_mesh(n), {}, {}, {}};
    ps.diff = diff_matrix(ps.mesh);
    ps.lag_basis = lag_basis_matrix(ps.mesh, model.delays());
    ps.lower = diff_matrix_full(ps.mesh).bottomRows(n);
    return ps;
}

PsSystem PsSystem::build(const DdeModel& model, int n) { return build(model, n, default_equilibrium(model)); }

Eigen::MatrixXd assemble_An(const PsSystem& ps) {
    const int d = ps.dim(), n = ps.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero((n + 1) * d, (n + 1) * d);
    for (int j = 0; j <= n; ++j)
        for (std::size_t k = 0; k < ps.linear.C.size(); ++k)
            A.block(0, j * d, d, d) += ps.linear.C[k] * ps.lag_basis(j, static_cast<Eigen::Index>(k));
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            A.block(i * d, j * d, d, d) = ps.lower(i - 1, j) * Eigen::MatrixXd::Identity(d, d);
    return A;
}

Eigen::VectorXd rhs(const PsSystem& ps, const Eigen::VectorXd& state) {
    const int d = ps.dim(), n = ps.n;
    if (state.size() != (n + 1) * d) throw Error(ErrorKind::InvalidArgument, "state has wrong size");
    const Eigen::Map<const Eigen::MatrixXd> Y(state.data(), d, n + 1);
    Eigen::VectorXd out((n + 1) * d);
    Eigen::Map<Eigen::MatrixXd> Yd(out.data(), d, n + 1);
    try {
        Yd.col(0) = ps.model.eval(Y * ps.lag_basis);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " (evaluating history interpolant at the delay nodes)");
    }
    Yd.rightCols(n) = Y * ps.lower.transpose();
    return out;
}

// ---------------------------------------------------------------- CharFnN

namespace {

std::vector<Eigen::MatrixXd> top_block_coeffs(const LinearPart& lp, const Eigen::MatrixXd& basis) {
    std::vector<Eigen::MatrixXd> M(static_cast<std::size_t>(basis.rows()), Eigen::MatrixXd::Zero(lp.dim(), lp.dim()));
    for (Eigen::Index j = 0; j < basis.rows(); ++j)
        for (std::size_t k = 0; k < lp.C.size(); ++k)
            M[static_cast<std::size_t>(j)] += lp.C[k] * basis(j, static_cast<Eigen::Index>(k));
    return M;
}

constexpr std::size_t kCacheSize = 32;
constexpr double kMaxCond = 1e14;

}  // namespace

CharFnN::CharFnN(LinearPart linear, int n) : CharFn(std::move(linear)), mesh_(make_mesh(n)) {
    diff_ = diff_matrix(mesh_);
    lag_basis_ = lag_basis_matrix(mesh_, this->linear().delays);
    M_ = top_block_coeffs(this->linear(), lag_basis_);
}

CharFnN::CharFnN(const CharFnN& other)
    : CharFn(other), mesh_(other.mesh_), diff_(other.diff_), lag_basis_(other.lag_basis_), M_(other.M_) {}

std::shared_ptr<const CharFnN::LU> CharFnN::factor(cd lambda) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto& [key, lu] : cache_)
            if (key == lambda) return lu;
    }
    const int n = mesh_.n;
    Eigen::MatrixXcd S = diff_.D.cast<cd>();
    S.diagonal().array() -= lambda;
    auto lu = std::make_shared<const LU>(S);
    const double rc = lu->rcond();
    if (!(rc * kMaxCond > 1.0))
        throw Error(ErrorKind::Conditioning, "(D - lambda I) is ill-conditioned at lambda = (" +
                                                 std::to_string(lambda.real()) + ", " + std::to_string(lambda.imag()) +
                                                 "): lambda is too close to an eigenvalue of D (n = " +
                                                 std::to_string(n) + ")");
    std::lock_guard<std::mutex> lock(mu_);
    if (cache_.size() >= kCacheSize) cache_.erase(cache_.begin());
    cache_.emplace_back(lambda, lu);
    return lu;
}

Eigen::MatrixXcd CharFnN::shifted_solve(cd lambda, const Eigen::MatrixXcd& B) const { return factor(lambda)->solve(B); }

Eigen::MatrixXcd CharFnN::shifted_solve_transposed(cd lambda, const Eigen::MatrixXcd& B) const {
    return factor(lambda)->transpose().solve(B);
}

Eigen::VectorXcd CharFnN::lag_solve(cd lambda) const {
    return shifted_solve(lambda, (-diff_.d0).cast<cd>());
}

Eigen::VectorXcd CharFnN::lag_values(cd lambda) const {
    const int n = mesh_.n;
    Eigen::VectorXcd f(n + 1);
    f(0) = 1.0;
    f.tail(n) = lag_solve(lambda);
    return lag_basis_.cast<cd>().transpose() * f;
}

Eigen::VectorXcd CharFnN::lag_values_dlambda(cd lambda) const {
    const int n = mesh_.n;
    Eigen::VectorXcd f(n + 1);
    f(0) = 0.0;
    f.tail(n) = shifted_solve(lambda, lag_solve(lambda));
    return lag_basis_.cast<cd>().transpose() * f;
}

Eigen::MatrixXd assemble_An(const CharFnN& cf) {
    const int d = cf.dim(), n = cf.mesh().n;
    const Eigen::MatrixXd lower = diff_matrix_full(cf.mesh()).bottomRows(n);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero((n + 1) * d, (n + 1) * d);
    for (int j = 0; j <= n; ++j) A.block(0, j * d, d, d) = cf.top_blocks()[static_cast<std::size_t>(j)];
    for (int i = 1; i <= n; ++i)
        for (int j = 0; j <= n; ++j) A.block(i * d, j * d, d, d) = lower(i - 1, j) * Eigen::MatrixXd::Identity(d, d);
    return A;
}

// ---------------------------------------------------------------- eigenvectors

Eigen::VectorXcd eigvec_right(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& p_star) {
    const int d = cf.dim(), n = cf.mesh().n;
    if (p_star.size() != d) throw Error(ErrorKind::InvalidArgument, "p_star has wrong size");
    double scale = 1.0 + std::abs(lambda);
    for (const auto& C : cf.linear().C) scale += C.norm();
    const double res = (cf.eval(lambda) * p_star).norm();
    if (!(res < 1e-8 * scale * p_star.norm()))
        throw Error(ErrorKind::InvalidArgument, "eigvec_right: Delta_n(lambda) p_star residual " + std::to_string(res) +
                                                    " too large; lambda is not a characteristic root");
    const Eigen::VectorXcd z = cf.lag_solve(lambda);
    Eigen::VectorXcd p((n + 1) * d);
    p.head(d) = p_star;
    for (int j = 1; j <= n; ++j) p.segment(j * d, d) = z(j - 1) * p_star;
    return p;
}

Eigen::VectorXcd eigvec_left(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& p, const Eigen::VectorXcd& q_star) {
    const int d = cf.dim(), n = cf.mesh().n;
    Eigen::VectorXcd q0 = q_star.size() == 0 ? Eigen::VectorXcd::Ones(d).eval() : q_star;
    if (q0.size() != d || p.size() != (n + 1) * d) throw Error(ErrorKind::InvalidArgument, "eigvec_left: size mismatch");
    const auto& M = cf.top_blocks();
    Eigen::MatrixXcd R(n, d);
    for (int i = 1; i <= n; ++i) R.row(i - 1) = q0.transpose() * M[static_cast<std::size_t>(i)].cast<cd>();
    // (lambda I - D^T) Q = R  <=>  (D - lambda I)^T Q = -R
    const Eigen::MatrixXcd Q = cf.shifted_solve_transposed(lambda, -R);
    Eigen::VectorXcd q((n + 1) * d);
    q.head(d) = q0;
    for (int j = 1; j <= n; ++j) q.segment(j * d, d) = Q.row(j - 1).transpose();
    const cd s = q.cwiseProduct(p).sum();  // plain product, no conjugation
    if (!(std::abs(s) > 1e-10 * q.norm() * p.norm()))
        throw Error(ErrorKind::Simplicity, "eigvec_left: q . p vanishes; the root is not simple");
    return q / s;
}

Eigen::VectorXcd resolvent_apply(const CharFnN& cf, cd lambda, const Eigen::VectorXcd& zeta) {
    const int d = cf.dim(), n = cf.mesh().n;
    if (zeta.size() != (n + 1) * d) throw Error(ErrorKind::InvalidArgument, "resolvent_apply: zeta has wrong size");
    Eigen::MatrixXcd Zt(n, d);
    for (int j = 1; j <= n; ++j) Zt.row(j - 1) = zeta.segment(j * d, d).transpose();
    const Eigen::MatrixXcd W = -cf.shifted_solve(lambda, Zt);  // (lambda - D)^{-1} zeta_tail
    const Eigen::VectorXcd z = cf.lag_solve(lambda);
    const auto& M = cf.top_blocks();
    Eigen::VectorXcd r = zeta.head(d);
    for (int j = 1; j <= n; ++j) r += M[static_cast<std::size_t>(j)].cast<cd>() * W.row(j - 1).transpose();
    const Eigen::MatrixXcd Delta = cf.eval(lambda);
    double scale = 1.0 + std::abs(lambda);
    for (const auto& C : cf.linear().C) scale += C.norm();
    const double smin = Eigen::JacobiSVD<Eigen::MatrixXcd>(Delta).singularValues().minCoeff();
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(Delta);
    if (!lu.isInvertible() || !(smin > 1e-14 * scale))
        throw Error(ErrorKind::Singular, "resolvent_apply: Delta_n(lambda) is singular; lambda is an eigenvalue of A_n");
    const Eigen::VectorXcd eta0 = lu.solve(r);
    Eigen::VectorXcd eta((n + 1) * d);
    eta.head(d) = eta0;
    for (int j = 1; j <= n; ++j) eta.segment(j * d, d) = W.row(j - 1).transpose() + z(j - 1) * eta0;
    return eta;
}

Eigen::VectorXcd projection_apply(const Eigen::VectorXcd& p, const Eigen::VectorXcd& q, const Eigen::VectorXcd& zeta) {
    return p * (q.transpose() * zeta)(0);
}

// ---------------------------------------------------------------- eigenvalues

namespace {

// Parlett-Reinsch diagonal similarity with power-of-two factors (exact in floating point).
void balance(Eigen::MatrixXd& A) {
    constexpr double radix = 2.0, sqrdx = radix * radix;
    const Eigen::Index m = A.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < m; ++i) {
            double c = A.col(i).cwiseAbs().sum() - std::abs(A(i, i));
            double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                A.row(i) /= f;
                A.col(i) *= f;
            }
        }
    }
}

}  // namespace

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw Error(ErrorKind::InvalidArgument, "eigenvalues: matrix must be square");
    if (!A.allFinite()) throw Error(ErrorKind::NonFinite, "eigenvalues: matrix has non-finite entries");
    if (A.rows() == 0) return {};
    Eigen::MatrixXd B = A;
    balance(B);
    Eigen::EigenSolver<Eigen::MatrixXd> es;
    es.setMaxIterations(30 * B.rows());  // total QR sweeps
    es.compute(B, false);
    if (es.info() != Eigen::Success)
        throw Error(ErrorKind::NoConvergence, "eigenvalues: QR iteration did not converge");
    std::vector<cd> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(ev.begin(), ev.end(), [](cd a, cd b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return Eigen::Map<Eigen::VectorXcd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
}

KernelPair kernel_vectors(const Eigen::MatrixXcd& M) {
    const Eigen::Index d = M.rows();
    if (d == 1) return {Eigen::VectorXcd::Ones(1), Eigen::VectorXcd::Ones(1), std::abs(M(0, 0))};
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    KernelPair kp;
    kp.sigma_min = svd.singularValues()(d - 1);
    kp.right = svd.matrixV().col(d - 1);
    kp.left = svd.matrixU().col(d - 1).conjugate();
    Eigen::Index imax = 0;
    kp.right.cwiseAbs().maxCoeff(&imax);
    const cd pivot = std::abs(kp.right(0)) > 1e-8 * kp.right.norm() ? kp.right(0) : kp.right(imax);
    kp.right /= pivot;
    return kp;
}

}  // namespace ddeps
