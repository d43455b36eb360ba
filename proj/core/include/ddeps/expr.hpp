// SPDX-License-Identifier: MIT
#pragma once

#include <complex>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddeps/jet.hpp"

namespace ddeps {

/// Immutable expression tree node.
struct ExprNode {
    enum class Kind { Number, Param, State, Neg, Add, Sub, Mul, Div, Pow, Exp, Log, Sin, Cos };
    Kind kind;
    double value = 0.0;  // Number
    std::string name;    // Param
    int comp = 0;        // State: component index i of x{i}@{k}
    int lag = 0;         // State: delay index k
    std::vector<std::shared_ptr<const ExprNode>> args;
};

/// Parsed expression. Grammar: + - (left assoc) < * / (left assoc) < unary minus < ^ (right assoc),
/// so -a^b = -(a^b). Functions: exp, log, sin, cos, pow(a,b). State symbols: x{i}@{k}.
class Expr {
public:
    /// Throws ParseError (with byte offset) or Error(UnknownSymbol) for unknown functions.
    [[nodiscard]] static Expr parse(std::string_view text);

    /// Canonical text; parse(e.str()).str() == e.str().
    [[nodiscard]] std::string str() const;
    [[nodiscard]] const ExprNode& root() const { return *root_; }
    [[nodiscard]] std::shared_ptr<const ExprNode> root_ptr() const { return root_; }

    /// Parameter names referenced (sorted, unique).
    [[nodiscard]] std::vector<std::string> params() const;
    /// Largest delay index referenced, or -1 if none.
    [[nodiscard]] int max_lag() const;
    [[nodiscard]] int max_comp() const;

private:
    std::shared_ptr<const ExprNode> root_;
};

[[nodiscard]] std::string to_string(const ExprNode& node);

/// Input layout for compiled programs: states first (slot = lag*dim + comp), then params.
struct SymbolTable {
    int dim = 1;
    int nlags = 1;
    std::vector<std::string> params;
    [[nodiscard]] int n_inputs() const { return dim * nlags + static_cast<int>(params.size()); }
    [[nodiscard]] int state_slot(int comp, int lag) const { return lag * dim + comp; }
    [[nodiscard]] int param_slot(std::size_t p) const { return dim * nlags + static_cast<int>(p); }
};

/// Postfix program bound to a SymbolTable. Evaluation is const and thread-safe.
class Program {
public:
    using cd = std::complex<double>;

    /// Throws Error(UnknownSymbol) for unbound params or out-of-range state symbols.
    [[nodiscard]] static Program compile(const Expr& e, const SymbolTable& syms);

    [[nodiscard]] int n_inputs() const { return n_inputs_; }

    /// Evaluation with domain checks; throws Error(Domain) naming the offending subexpression.
    [[nodiscard]] double eval(std::span<const double> in) const;
    [[nodiscard]] cd eval(std::span<const cd> in) const;
    [[nodiscard]] Jet3 eval(std::span<const Jet3> in) const;

    /// Taylor coefficients of t -> f(base + t*dir).
    [[nodiscard]] Jet3 taylor(std::span<const cd> base, std::span<const cd> dir) const;

    /// Complex-multilinear derivative forms by polarization. No conjugation inside.
    [[nodiscard]] cd d1(std::span<const cd> base, std::span<const cd> u) const;
    [[nodiscard]] cd d2(std::span<const cd> base, std::span<const cd> u, std::span<const cd> v) const;
    [[nodiscard]] cd d3(std::span<const cd> base, std::span<const cd> u, std::span<const cd> v,
                        std::span<const cd> w) const;

    /// True when input slot s occurs in the expression.
    [[nodiscard]] bool uses(int slot) const;

private:
    struct Instr {
        ExprNode::Kind op;
        int slot = -1;
        double value = 0.0;
        const ExprNode* node = nullptr;
    };
    template <class T>
    T run(std::span<const T> in) const;

    std::shared_ptr<const ExprNode> root_;
    std::vector<Instr> code_;
    std::vector<bool> used_;
    int n_inputs_ = 0;
};

}  // namespace ddeps
