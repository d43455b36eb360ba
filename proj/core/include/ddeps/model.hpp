// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddeps/expr.hpp"

namespace ddeps {

/// Point-delay DDE  x'(t) = f(x(t - tau_0), ..., x(t - tau_m); params)  with tau_0 = 0 < ... <= 1.
/// Right-hand sides are expressions over x{i}@{k} (component i at delay index k) and parameter names.
/// Immutable; copies share the compiled programs.
class DdeModel {
public:
    /// Validates shapes and delays and compiles every expression.
    /// equilibrium_hint entries are expressions in the parameters (plain numbers allowed).
    static DdeModel create(int dim, std::vector<double> delays, std::vector<std::string> rhs,
                           std::map<std::string, double> params, std::vector<std::string> equilibrium_hint = {});

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] int nlags() const { return static_cast<int>(delays_.size()); }
    [[nodiscard]] const std::vector<double>& delays() const { return delays_; }
    [[nodiscard]] const std::vector<std::string>& rhs_text() const { return rhs_text_; }
    [[nodiscard]] const std::vector<std::string>& hint_text() const { return hint_text_; }
    [[nodiscard]] const std::map<std::string, double>& params() const { return params_; }
    [[nodiscard]] const SymbolTable& symbols() const { return *syms_; }
    [[nodiscard]] const Program& program(int i) const { return (*progs_)[static_cast<std::size_t>(i)]; }

    [[nodiscard]] bool has_param(const std::string& name) const { return params_.count(name) > 0; }
    /// Throws InvalidArgument for unknown names.
    [[nodiscard]] double param(const std::string& name) const;
    [[nodiscard]] int param_slot(const std::string& name) const;
    [[nodiscard]] DdeModel with_param(const std::string& name, double value) const;
    [[nodiscard]] DdeModel with_params(const std::map<std::string, double>& values) const;

    /// Hint evaluated at the current parameters, if present.
    [[nodiscard]] std::optional<Eigen::VectorXd> equilibrium_hint() const;

    /// Input vector for the programs; lag_states is dim x nlags.
    [[nodiscard]] std::vector<double> inputs(const Eigen::MatrixXd& lag_states) const;
    [[nodiscard]] Eigen::VectorXd eval(const Eigen::MatrixXd& lag_states) const;
    /// rhs with every lag set to x.
    [[nodiscard]] Eigen::VectorXd eval_collapsed(const Eigen::VectorXd& x) const;

private:
    int dim_ = 0;
    std::vector<double> delays_;
    std::vector<std::string> rhs_text_;
    std::vector<std::string> hint_text_;
    std::map<std::string, double> params_;
    std::shared_ptr<const SymbolTable> syms_;
    std::shared_ptr<const std::vector<Program>> progs_;
    std::shared_ptr<const std::vector<Program>> hint_progs_;
};

/// Linear part  L phi = sum_k C_k phi(-tau_k)  at an equilibrium, plus parameter derivatives.
struct LinearPart {
    std::vector<double> delays;
    std::vector<Eigen::MatrixXd> C;
    /// dC[name][k] = total derivative of C_k along the equilibrium branch.
    std::map<std::string, std::vector<Eigen::MatrixXd>> dC;
    [[nodiscard]] int dim() const { return C.empty() ? 0 : static_cast<int>(C[0].rows()); }
};

enum class ParamDerivative { Analytic, FiniteDifference };

/// Newton on the collapsed rhs. Throws NoConvergence after 50 iterations, Singular on a singular Jacobian.
[[nodiscard]] Eigen::VectorXd equilibrium_solve(const DdeModel& model, const Eigen::VectorXd& guess);

/// Equilibrium from the hint (or zero) as Newton start.
[[nodiscard]] Eigen::VectorXd default_equilibrium(const DdeModel& model);

/// C_k at xbar; derivatives for each name in diff_params.
/// Analytic mode differentiates through the equilibrium by implicit differentiation;
/// finite-difference mode re-solves the equilibrium at alpha +- 1e-6 max(1,|alpha|).
[[nodiscard]] LinearPart linearize(const DdeModel& model, const Eigen::VectorXd& xbar,
                                   const std::vector<std::string>& diff_params = {},
                                   ParamDerivative mode = ParamDerivative::Analytic);

/// Lag-slot arguments: dim x nlags, column k is the value at delay index k.
using LagValues = Eigen::MatrixXcd;

/// Second and third derivatives of the rhs at the constant state xbar, complex-multilinear.
[[nodiscard]] Eigen::VectorXcd rhs_d2(const DdeModel& model, const Eigen::VectorXd& xbar, const LagValues& u,
                                      const LagValues& v);
[[nodiscard]] Eigen::VectorXcd rhs_d3(const DdeModel& model, const Eigen::VectorXd& xbar, const LagValues& u,
                                      const LagValues& v, const LagValues& w);

/// Built-in catalog: "blowflies", "fluidflow". Returns nullopt for other names.
[[nodiscard]] std::optional<DdeModel> builtin_model(const std::string& name);

/// JSON document with dim, delays, rhs, params, optional equilibrium_hint.
[[nodiscard]] DdeModel model_from_json(const std::string& text);
[[nodiscard]] std::string model_to_json(const DdeModel& model);
/// Built-in name or path to a JSON file.
[[nodiscard]] DdeModel load_model(const std::string& name_or_path);

}  // namespace ddeps
