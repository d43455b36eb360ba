// SPDX-License-Identifier: MIT
#pragma once

#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddeps/charfn.hpp"
#include "ddeps/model.hpp"

namespace ddeps {

/// A model together with a choice of characteristic function: exact (n empty) or degree-n discretization.
/// at() re-solves the equilibrium and relinearizes for a parameter update.
class CharFamily {
public:
    CharFamily(DdeModel model, std::optional<int> n, ParamDerivative mode = ParamDerivative::Analytic);

    struct Point {
        DdeModel model;
        Eigen::VectorXd equilibrium;
        std::shared_ptr<const CharFn> cf;
    };

    /// Parameters in `updates` override the base model. `guess` seeds the equilibrium Newton solve
    /// (the hint is used when empty). Derivatives are registered for every name in diff_params.
    [[nodiscard]] Point at(const std::map<std::string, double>& updates, const std::vector<std::string>& diff_params,
                           const Eigen::VectorXd& guess = {}) const;

    [[nodiscard]] const DdeModel& model() const { return model_; }
    [[nodiscard]] std::optional<int> degree() const { return n_; }
    [[nodiscard]] ParamDerivative mode() const { return mode_; }

private:
    DdeModel model_;
    std::optional<int> n_;
    ParamDerivative mode_;
};

struct NonresonanceVerdict {
    bool pass = true;
    /// (k, sigma_min(Delta(k i omega)) / (1 + k omega)); +inf marks a pole of the discretized Delta.
    std::vector<std::pair<int, double>> margins;
    /// Smallest |Re lambda| over the other eigenvalues of A_n (NaN for the delay equation).
    double axis_clearance = 0.0;
    std::vector<std::string> failures;
};

struct HopfPoint {
    std::string param;
    double alpha = 0.0;
    double omega = 0.0;
    cd c;
    double sigma = 0.0;
    double a2 = 0.0;
    double simplicity_margin = 0.0;
    NonresonanceVerdict nonresonance;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
    std::optional<int> n;
    Eigen::VectorXd equilibrium;
    std::map<std::string, double> params;
    Eigen::VectorXcd p_star;  ///< right kernel vector of Delta(i omega), first component 1
    Eigen::VectorXcd q_star;  ///< left kernel vector, q_star . D1Delta p_star = 1
    bool transversal = true;   ///< false when sigma == 0
    bool degenerate = false;   ///< true when Re c == 0
};

struct HopfOptions {
    int max_iter = 50;
    double tol = 1e-12;
    int k_max = 10;
    bool compute_lyapunov = true;
};

/// Newton on (Re h, Im h) = 0 in (omega, alpha), h = Delta(i omega) for d = 1 and det Delta for d > 1.
/// Throws NoConvergence (50 iterations or omega <= 0), Singular (Jacobian), Simplicity.
[[nodiscard]] HopfPoint find_hopf(const CharFamily& family, const std::string& param, double omega_guess,
                                  double alpha_guess, const HopfOptions& opt = {});

/// Re(q_star . D2Delta p_star) with q_star . D1Delta p_star = 1 (equals Re(D1Delta^{-1} D2Delta) for d = 1).
[[nodiscard]] double transversality(const CharFn& cf, const std::string& param, double omega);

/// Lyapunov coefficient from the three-term formula, eigenvector scaled to first component 1.
/// Works for either characteristic function; xbar is the equilibrium of `model`.
[[nodiscard]] cd lyapunov_c(const DdeModel& model, const Eigen::VectorXd& xbar, const CharFn& cf, double omega);

/// Re(c) / sigma. Throws InvalidArgument when sigma == 0.
[[nodiscard]] double direction_a2(cd c, double sigma);
[[nodiscard]] double direction_a2(const HopfPoint& hp);

/// Margins for k = 0, 2, ..., k_max plus (for discretizations) an eigenvalue scan of A_n.
[[nodiscard]] NonresonanceVerdict nonresonance(const CharFn& cf, double omega, int k_max = 10);

struct CurvePoint {
    double p1 = 0.0;
    double p2 = 0.0;
    double omega = 0.0;
    double residual = 0.0;
    int iterations = 0;
    double step = 0.0;
};

struct StabilityCurve {
    std::string p1;
    std::string p2;
    std::vector<CurvePoint> points;
    std::string termination;  ///< max_points, out_of_bounds, step_underflow, singular
    std::string message;
};

struct TraceOptions {
    double step = 0.05;
    int max_points = 200;
    std::pair<double, double> p1_range{-1e300, 1e300};
    std::pair<double, double> p2_range{-1e300, 1e300};
    double omega_max = 1e300;
};

/// Pseudo-arclength continuation of Delta(i omega; p1, p2) = 0 in (omega, p1, p2).
/// A negative step traverses the curve in the opposite direction. When the curve leaves the
/// window, a final point is placed on the bound it crossed.
[[nodiscard]] StabilityCurve trace_hopf_curve(const CharFamily& family, const std::string& p1, const std::string& p2,
                                              const HopfPoint& start, const TraceOptions& opt);

struct ConvergenceRow {
    int n = 0;
    double alpha_err = 0.0;
    double omega_err = 0.0;
    double a2_err = 0.0;
    double sigma = 0.0;
    double simplicity = 0.0;
    double min_margin = 0.0;
    std::string status;  ///< "ok" or the failure message
};

/// Hopf points for each n against a reference (exact delay equation by default, or the finest n).
/// Rows are computed concurrently (DDEPS_THREADS, default hardware concurrency) and returned in input order.
[[nodiscard]] std::vector<ConvergenceRow> convergence_study(const DdeModel& model, const std::string& param,
                                                            double omega_guess, double alpha_guess,
                                                            const std::vector<int>& n_list,
                                                            bool finest_as_reference = false);

/// Worker count from DDEPS_THREADS, else hardware concurrency (at least 1).
[[nodiscard]] unsigned worker_count();

}  // namespace ddeps
