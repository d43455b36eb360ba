// SPDX-License-Identifier: MIT
#include "ddeps/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "ddeps/error.hpp"

namespace ddeps {

using Kind = ExprNode::Kind;
using NodePtr = std::shared_ptr<const ExprNode>;

namespace {

NodePtr make(Kind k, std::vector<NodePtr> args = {}) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->args = std::move(args);
    return n;
}

struct FnInfo {
    std::string_view name;
    Kind kind;
    int arity;
};
constexpr FnInfo kCatalog[] = {
    {"exp", Kind::Exp, 1}, {"log", Kind::Log, 1}, {"sin", Kind::Sin, 1},
    {"cos", Kind::Cos, 1}, {"pow", Kind::Pow, 2},
};

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse_all() {
        auto e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (eat('+')) lhs = make(Kind::Add, {lhs, term()});
            else if (eat('-')) lhs = make(Kind::Sub, {lhs, term()});
            else return lhs;
        }
    }
    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (eat('*')) lhs = make(Kind::Mul, {lhs, unary()});
            else if (eat('/')) lhs = make(Kind::Div, {lhs, unary()});
            else return lhs;
        }
    }
    NodePtr unary() {
        if (eat('-')) return make(Kind::Neg, {unary()});
        if (eat('+')) return unary();
        return power();
    }
    NodePtr power() {
        auto base = primary();
        if (eat('^')) return make(Kind::Pow, {base, unary()});
        return base;
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const std::size_t start = pos_;
        auto digits = [&] {
            std::size_t k = 0;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_, ++k;
            return k;
        };
        std::size_t nd = digits();
        if (pos_ < s_.size() && s_[pos_] == '.') {
            ++pos_;
            nd += digits();
        }
        if (nd == 0) {
            pos_ = start;
            fail("malformed number");
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (digits() == 0) {
                pos_ = save;
                fail("malformed exponent");
            }
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc() || p != s_.data() + pos_) {
            pos_ = start;
            fail("number out of range");
        }
        auto n = std::make_shared<ExprNode>();
        n->kind = Kind::Number;
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string_view id = s_.substr(start, pos_ - start);

        if (pos_ < s_.size() && s_[pos_] == '@') {
            const bool ok = id.size() >= 2 && id[0] == 'x' &&
                            std::all_of(id.begin() + 1, id.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
            if (!ok) {
                pos_ = start;
                fail("state symbol must have the form x<i>@<k>");
            }
            ++pos_;
            const std::size_t lag_start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            if (pos_ == lag_start) fail("expected delay index after '@'");
            auto n = std::make_shared<ExprNode>();
            n->kind = Kind::State;
            std::from_chars(id.data() + 1, id.data() + id.size(), n->comp);
            std::from_chars(s_.data() + lag_start, s_.data() + pos_, n->lag);
            return n;
        }

        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '(') {
            const auto* fn = std::find_if(std::begin(kCatalog), std::end(kCatalog),
                                          [&](const FnInfo& f) { return f.name == id; });
            if (fn == std::end(kCatalog))
                throw Error(ErrorKind::UnknownSymbol,
                            "unknown function '" + std::string(id) + "' at offset " + std::to_string(start));
            ++pos_;
            std::vector<NodePtr> args{expr()};
            while (eat(',')) args.push_back(expr());
            if (!eat(')')) fail("expected ')' after function arguments");
            if (static_cast<int>(args.size()) != fn->arity) {
                pos_ = start;
                fail(std::string(fn->name) + " expects " + std::to_string(fn->arity) + " argument(s)");
            }
            return make(fn->kind, std::move(args));
        }
        auto n = std::make_shared<ExprNode>();
        n->kind = Kind::Param;
        n->name = std::string(id);
        return n;
    }
};

int precedence(const ExprNode& n) {
    switch (n.kind) {
        case Kind::Add:
        case Kind::Sub: return 1;
        case Kind::Mul:
        case Kind::Div: return 2;
        case Kind::Neg: return 3;
        case Kind::Pow: return 4;
        default: return 5;
    }
}

std::string fmt_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

void print(const ExprNode& n, std::string& out) {
    auto sub = [&](const ExprNode& c, bool wrap) {
        if (wrap) out += '(';
        print(c, out);
        if (wrap) out += ')';
    };
    auto binary = [&](std::string_view op, int prec, bool right_assoc_min_unary) {
        const auto& a = *n.args[0];
        const auto& b = *n.args[1];
        sub(a, precedence(a) <= (prec == 4 ? 4 : prec - 1));
        out += op;
        sub(b, right_assoc_min_unary ? precedence(b) < 3 : precedence(b) <= prec);
    };
    switch (n.kind) {
        case Kind::Number: out += fmt_number(n.value); return;
        case Kind::Param: out += n.name; return;
        case Kind::State:
            out += 'x' + std::to_string(n.comp) + '@' + std::to_string(n.lag);
            return;
        case Kind::Neg:
            out += '-';
            sub(*n.args[0], precedence(*n.args[0]) < 3);
            return;
        case Kind::Add: binary(" + ", 1, false); return;
        case Kind::Sub: binary(" - ", 1, false); return;
        case Kind::Mul: binary("*", 2, false); return;
        case Kind::Div: binary("/", 2, false); return;
        case Kind::Pow: binary("^", 4, true); return;
        case Kind::Exp:
        case Kind::Log:
        case Kind::Sin:
        case Kind::Cos: {
            const auto* fn = std::find_if(std::begin(kCatalog), std::end(kCatalog),
                                          [&](const FnInfo& f) { return f.kind == n.kind; });
            out += fn->name;
            out += '(';
            print(*n.args[0], out);
            out += ')';
            return;
        }
    }
}

template <class F>
void walk(const ExprNode& n, F&& f) {
    f(n);
    for (const auto& a : n.args) walk(*a, f);
}

void emit(const NodePtr& n, const SymbolTable& syms, auto& code) {
    for (const auto& a : n->args) emit(a, syms, code);
    using Instr = std::remove_reference_t<decltype(code[0])>;
    Instr ins{n->kind, -1, n->value, n.get()};
    if (n->kind == Kind::State) {
        if (n->comp >= syms.dim)
            throw Error(ErrorKind::UnknownSymbol, "state component out of range in '" + to_string(*n) + "'");
        if (n->lag >= syms.nlags)
            throw Error(ErrorKind::UnknownSymbol, "delay index out of range in '" + to_string(*n) + "'");
        ins.slot = syms.state_slot(n->comp, n->lag);
    } else if (n->kind == Kind::Param) {
        auto it = std::find(syms.params.begin(), syms.params.end(), n->name);
        if (it == syms.params.end()) throw Error(ErrorKind::UnknownSymbol, "unknown symbol '" + n->name + "'");
        ins.slot = syms.param_slot(static_cast<std::size_t>(it - syms.params.begin()));
    }
    code.push_back(ins);
}

// Leading coefficient as a complex number, for domain checks.
inline std::complex<double> lead(double x) { return x; }
inline std::complex<double> lead(const std::complex<double>& x) { return x; }
inline std::complex<double> lead(const Jet3& x) { return x.c[0]; }

inline bool is_const(double) { return true; }
inline bool is_const(const std::complex<double>&) { return true; }
inline bool is_const(const Jet3& x) { return x.is_constant(); }

template <class T>
T ipow(T base, long long p) {
    if (p < 0) return T(1.0) / ipow(base, -p);
    T r(1.0);
    while (p) {
        if (p & 1) r = r * base;
        base = base * base;
        p >>= 1;
    }
    return r;
}

// Real power p of a with p non-integer or large.
inline double rpow(double a, double p) { return std::pow(a, p); }
inline std::complex<double> rpow(const std::complex<double>& a, double p) { return std::pow(a, p); }
inline Jet3 rpow(const Jet3& a, double p) {
    const auto x = a.c[0];
    const auto f0 = std::pow(x, p);
    return a.compose(f0, p * f0 / x, p * (p - 1) * f0 / (x * x), p * (p - 1) * (p - 2) * f0 / (x * x * x));
}

}  // namespace

std::string to_string(const ExprNode& node) {
    std::string s;
    print(node, s);
    return s;
}

Expr Expr::parse(std::string_view text) {
    Expr e;
    e.root_ = Parser(text).parse_all();
    return e;
}

std::string Expr::str() const { return to_string(*root_); }

std::vector<std::string> Expr::params() const {
    std::set<std::string> names;
    walk(*root_, [&](const ExprNode& n) {
        if (n.kind == Kind::Param) names.insert(n.name);
    });
    return {names.begin(), names.end()};
}

int Expr::max_lag() const {
    int m = -1;
    walk(*root_, [&](const ExprNode& n) {
        if (n.kind == Kind::State) m = std::max(m, n.lag);
    });
    return m;
}

int Expr::max_comp() const {
    int m = -1;
    walk(*root_, [&](const ExprNode& n) {
        if (n.kind == Kind::State) m = std::max(m, n.comp);
    });
    return m;
}

Program Program::compile(const Expr& e, const SymbolTable& syms) {
    Program p;
    p.root_ = e.root_ptr();
    p.n_inputs_ = syms.n_inputs();
    emit(p.root_, syms, p.code_);
    p.used_.assign(static_cast<std::size_t>(p.n_inputs_), false);
    for (const auto& ins : p.code_)
        if (ins.slot >= 0) p.used_[static_cast<std::size_t>(ins.slot)] = true;
    return p;
}

bool Program::uses(int slot) const {
    return slot >= 0 && slot < n_inputs_ && used_[static_cast<std::size_t>(slot)];
}

template <class T>
T Program::run(std::span<const T> in) const {
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    if (static_cast<int>(in.size()) != n_inputs_)
        throw Error(ErrorKind::InvalidArgument, "program expects " + std::to_string(n_inputs_) + " inputs");

    auto domain = [](const Instr& ins, const std::string& what) {
        throw Error(ErrorKind::Domain, what + " in '" + to_string(*ins.node) + "'");
    };
    auto nonpositive_real = [](std::complex<double> z) { return z.imag() == 0.0 && z.real() <= 0.0; };

    std::vector<T> st;
    st.reserve(code_.size());
    for (const auto& ins : code_) {
        switch (ins.op) {
            case Kind::Number: st.emplace_back(ins.value); break;
            case Kind::Param:
            case Kind::State: st.push_back(in[static_cast<std::size_t>(ins.slot)]); break;
            case Kind::Neg: st.back() = -st.back(); break;
            case Kind::Exp: st.back() = exp(st.back()); break;
            case Kind::Sin: st.back() = sin(st.back()); break;
            case Kind::Cos: st.back() = cos(st.back()); break;
            case Kind::Log:
                if (nonpositive_real(lead(st.back()))) domain(ins, "log of nonpositive value");
                st.back() = log(st.back());
                break;
            default: {
                T b = st.back();
                st.pop_back();
                T& a = st.back();
                switch (ins.op) {
                    case Kind::Add: a = a + b; break;
                    case Kind::Sub: a = a - b; break;
                    case Kind::Mul: a = a * b; break;
                    case Kind::Div:
                        if (lead(b) == 0.0) domain(ins, "division by zero");
                        a = a / b;
                        break;
                    case Kind::Pow: {
                        const auto pb = lead(b);
                        const auto pa = lead(a);
                        if (is_const(b) && pb.imag() == 0.0) {
                            const double p = pb.real();
                            if (p == std::nearbyint(p) && std::abs(p) <= 1024.0) {
                                if (p < 0 && pa == 0.0) domain(ins, "zero raised to a negative power");
                                a = ipow(a, static_cast<long long>(p));
                            } else {
                                if (nonpositive_real(pa) && !(pa == 0.0 && is_const(a) && p > 0))
                                    domain(ins, "nonpositive base with non-integer exponent");
                                a = rpow(a, p);
                            }
                        } else {
                            if (nonpositive_real(pa)) domain(ins, "nonpositive base with variable exponent");
                            a = exp(b * log(a));
                        }
                        break;
                    }
                    default: break;
                }
            }
        }
    }
    return st.back();
}

double Program::eval(std::span<const double> in) const { return run(in); }
Program::cd Program::eval(std::span<const cd> in) const { return run(in); }
Jet3 Program::eval(std::span<const Jet3> in) const { return run(in); }

Jet3 Program::taylor(std::span<const cd> base, std::span<const cd> dir) const {
    if (base.size() != dir.size()) throw Error(ErrorKind::InvalidArgument, "taylor: base/direction size mismatch");
    std::vector<Jet3> in(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) in[i] = Jet3::variable(base[i], dir[i]);
    return run(std::span<const Jet3>(in));
}

Program::cd Program::d1(std::span<const cd> base, std::span<const cd> u) const { return taylor(base, u).c[1]; }

Program::cd Program::d2(std::span<const cd> base, std::span<const cd> u, std::span<const cd> v) const {
    const std::size_t m = base.size();
    std::vector<cd> s(m), t(m);
    for (std::size_t i = 0; i < m; ++i) {
        s[i] = u[i] + v[i];
        t[i] = u[i] - v[i];
    }
    return 0.5 * (taylor(base, s).c[2] - taylor(base, t).c[2]);
}

Program::cd Program::d3(std::span<const cd> base, std::span<const cd> u, std::span<const cd> v,
                        std::span<const cd> w) const {
    const std::size_t m = base.size();
    std::vector<cd> h(m);
    cd acc = 0.0;
    for (int s2 : {1, -1}) {
        for (int s3 : {1, -1}) {
            for (std::size_t i = 0; i < m; ++i) h[i] = u[i] + double(s2) * v[i] + double(s3) * w[i];
            acc += double(s2 * s3) * taylor(base, h).c[3];
        }
    }
    return 0.25 * acc;
}

}  // namespace ddeps
