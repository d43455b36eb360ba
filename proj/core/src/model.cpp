// SPDX-License-Identifier: MIT
#include "ddeps/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ddeps/error.hpp"

namespace ddeps {

using cd = std::complex<double>;

DdeModel DdeModel::create(int dim, std::vector<double> delays, std::vector<std::string> rhs,
                          std::map<std::string, double> params, std::vector<std::string> equilibrium_hint) {
    if (dim < 1) throw Error(ErrorKind::InvalidArgument, "model dimension must be >= 1");
    if (static_cast<int>(rhs.size()) != dim)
        throw Error(ErrorKind::InvalidArgument, "model needs exactly one rhs expression per component");
    if (delays.empty() || delays[0] != 0.0)
        throw Error(ErrorKind::InvalidArgument, "delays must start with 0");
    for (std::size_t k = 0; k < delays.size(); ++k) {
        if (!(delays[k] >= 0.0 && delays[k] <= 1.0))
            throw Error(ErrorKind::InvalidArgument, "delays must lie in [0, 1]");
        if (k > 0 && !(delays[k] > delays[k - 1]))
            throw Error(ErrorKind::InvalidArgument, "delays must be strictly increasing");
    }
    if (!equilibrium_hint.empty() && static_cast<int>(equilibrium_hint.size()) != dim)
        throw Error(ErrorKind::InvalidArgument, "equilibrium_hint must have one entry per component");
    for (const auto& [name, v] : params)
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "parameter '" + name + "' is not finite");

    DdeModel m;
    m.dim_ = dim;
    m.delays_ = std::move(delays);
    m.rhs_text_ = std::move(rhs);
    m.hint_text_ = std::move(equilibrium_hint);
    m.params_ = std::move(params);

    auto syms = std::make_shared<SymbolTable>();
    syms->dim = dim;
    syms->nlags = m.nlags();
    for (const auto& kv : m.params_) syms->params.push_back(kv.first);

    auto progs = std::make_shared<std::vector<Program>>();
    for (const auto& text : m.rhs_text_) progs->push_back(Program::compile(Expr::parse(text), *syms));

    SymbolTable hint_syms{0, 0, syms->params};
    auto hints = std::make_shared<std::vector<Program>>();
    for (const auto& text : m.hint_text_) hints->push_back(Program::compile(Expr::parse(text), hint_syms));

    m.syms_ = std::move(syms);
    m.progs_ = std::move(progs);
    m.hint_progs_ = std::move(hints);
    return m;
}

double DdeModel::param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::InvalidArgument, "unknown parameter '" + name + "'");
    return it->second;
}

int DdeModel::param_slot(const std::string& name) const {
    const auto& names = syms_->params;
    for (std::size_t p = 0; p < names.size(); ++p)
        if (names[p] == name) return syms_->param_slot(p);
    throw Error(ErrorKind::InvalidArgument, "unknown parameter '" + name + "'");
}

DdeModel DdeModel::with_param(const std::string& name, double value) const {
    (void)param(name);
    if (!std::isfinite(value)) throw Error(ErrorKind::InvalidArgument, "parameter '" + name + "' is not finite");
    DdeModel m = *this;
    m.params_[name] = value;
    return m;
}

DdeModel DdeModel::with_params(const std::map<std::string, double>& values) const {
    DdeModel m = *this;
    for (const auto& [k, v] : values) m = m.with_param(k, v);
    return m;
}

std::optional<Eigen::VectorXd> DdeModel::equilibrium_hint() const {
    if (hint_progs_->empty()) return std::nullopt;
    std::vector<double> in;
    for (const auto& kv : params_) in.push_back(kv.second);
    Eigen::VectorXd x(dim_);
    for (int i = 0; i < dim_; ++i) x(i) = (*hint_progs_)[static_cast<std::size_t>(i)].eval(std::span<const double>(in));
    return x;
}

std::vector<double> DdeModel::inputs(const Eigen::MatrixXd& lag_states) const {
    std::vector<double> in(static_cast<std::size_t>(syms_->n_inputs()));
    for (int k = 0; k < nlags(); ++k)
        for (int i = 0; i < dim_; ++i) in[static_cast<std::size_t>(syms_->state_slot(i, k))] = lag_states(i, k);
    std::size_t p = static_cast<std::size_t>(dim_ * nlags());
    for (const auto& kv : params_) in[p++] = kv.second;
    return in;
}

Eigen::VectorXd DdeModel::eval(const Eigen::MatrixXd& lag_states) const {
    const auto in = inputs(lag_states);
    Eigen::VectorXd out(dim_);
    for (int i = 0; i < dim_; ++i) out(i) = program(i).eval(std::span<const double>(in));
    return out;
}

Eigen::VectorXd DdeModel::eval_collapsed(const Eigen::VectorXd& x) const {
    return eval(x.replicate(1, nlags()));
}

namespace {

std::vector<cd> complex_base(const DdeModel& m, const Eigen::VectorXd& xbar) {
    const auto in = m.inputs(xbar.replicate(1, m.nlags()));
    return {in.begin(), in.end()};
}

std::vector<cd> lag_direction(const DdeModel& m, const LagValues& u) {
    if (u.rows() != m.dim() || u.cols() != m.nlags())
        throw Error(ErrorKind::InvalidArgument, "lag-slot argument must be dim x nlags");
    std::vector<cd> dir(static_cast<std::size_t>(m.symbols().n_inputs()), cd(0.0));
    for (int k = 0; k < m.nlags(); ++k)
        for (int i = 0; i < m.dim(); ++i) dir[static_cast<std::size_t>(m.symbols().state_slot(i, k))] = u(i, k);
    return dir;
}

Eigen::MatrixXd collapsed_jacobian(const std::vector<Eigen::MatrixXd>& C) {
    Eigen::MatrixXd J = C[0];
    for (std::size_t k = 1; k < C.size(); ++k) J += C[k];
    return J;
}

std::vector<Eigen::MatrixXd> lag_jacobians(const DdeModel& m, const std::vector<cd>& base) {
    const int d = m.dim();
    std::vector<Eigen::MatrixXd> C(static_cast<std::size_t>(m.nlags()), Eigen::MatrixXd::Zero(d, d));
    std::vector<cd> e(base.size(), cd(0.0));
    for (int k = 0; k < m.nlags(); ++k) {
        for (int j = 0; j < d; ++j) {
            const int slot = m.symbols().state_slot(j, k);
            e[static_cast<std::size_t>(slot)] = 1.0;
            for (int i = 0; i < d; ++i)
                if (m.program(i).uses(slot)) C[static_cast<std::size_t>(k)](i, j) = m.program(i).d1(base, e).real();
            e[static_cast<std::size_t>(slot)] = 0.0;
        }
    }
    for (const auto& Ck : C)
        if (!Ck.allFinite()) throw Error(ErrorKind::NonFinite, "linearization produced non-finite coefficients");
    return C;
}

std::string number_text(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

}  // namespace

Eigen::VectorXd equilibrium_solve(const DdeModel& model, const Eigen::VectorXd& guess) {
    if (guess.size() != model.dim()) throw Error(ErrorKind::InvalidArgument, "equilibrium guess has wrong size");
    Eigen::VectorXd x = guess;
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd F = model.eval_collapsed(x);
        const double scale = 1.0 + x.cwiseAbs().maxCoeff();
        if (!F.allFinite()) throw Error(ErrorKind::NonFinite, "equilibrium residual is not finite");
        if (F.cwiseAbs().maxCoeff() < 1e-12 * scale) return x;
        const Eigen::MatrixXd J = collapsed_jacobian(lag_jacobians(model, complex_base(model, x)));
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible() || lu.rcond() < 1e-14)
            throw Error(ErrorKind::Singular, "singular Jacobian in equilibrium Newton iteration");
        const Eigen::VectorXd dx = lu.solve(F);
        x -= dx;
        if (dx.cwiseAbs().maxCoeff() <= 4e-16 * scale) {
            if (model.eval_collapsed(x).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + x.cwiseAbs().maxCoeff())) return x;
        }
    }
    throw Error(ErrorKind::NoConvergence, "equilibrium Newton iteration did not converge in 50 iterations");
}

Eigen::VectorXd default_equilibrium(const DdeModel& model) {
    const auto hint = model.equilibrium_hint();
    return equilibrium_solve(model, hint ? *hint : Eigen::VectorXd::Zero(model.dim()).eval());
}

LinearPart linearize(const DdeModel& model, const Eigen::VectorXd& xbar, const std::vector<std::string>& diff_params,
                     ParamDerivative mode) {
    const auto base = complex_base(model, xbar);
    LinearPart lp;
    lp.delays = model.delays();
    lp.C = lag_jacobians(model, base);
    const int d = model.dim();

    for (const auto& name : diff_params) {
        std::vector<Eigen::MatrixXd> dC;
        if (mode == ParamDerivative::FiniteDifference) {
            const double a = model.param(name);
            const double h = 1e-6 * std::max(1.0, std::abs(a));
            const auto mp = model.with_param(name, a + h);
            const auto mm = model.with_param(name, a - h);
            const auto Cp = linearize(mp, equilibrium_solve(mp, xbar)).C;
            const auto Cm = linearize(mm, equilibrium_solve(mm, xbar)).C;
            for (std::size_t k = 0; k < Cp.size(); ++k) dC.push_back((Cp[k] - Cm[k]) / (2.0 * h));
        } else {
            const int ps = model.param_slot(name);
            std::vector<cd> ea(base.size(), cd(0.0));
            ea[static_cast<std::size_t>(ps)] = 1.0;
            Eigen::VectorXd dF(d);
            for (int i = 0; i < d; ++i) dF(i) = model.program(i).d1(base, ea).real();
            Eigen::FullPivLU<Eigen::MatrixXd> lu(collapsed_jacobian(lp.C));
            if (!lu.isInvertible())
                throw Error(ErrorKind::Singular, "equilibrium branch not differentiable in '" + name + "'");
            const Eigen::VectorXd dx = -lu.solve(dF);
            // Direction: parameter moves by 1, state moves along the equilibrium branch.
            std::vector<cd> dir = ea;
            for (int k = 0; k < model.nlags(); ++k)
                for (int j = 0; j < d; ++j) dir[static_cast<std::size_t>(model.symbols().state_slot(j, k))] = dx(j);
            std::vector<cd> e(base.size(), cd(0.0));
            for (int k = 0; k < model.nlags(); ++k) {
                Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
                for (int j = 0; j < d; ++j) {
                    const int slot = model.symbols().state_slot(j, k);
                    e[static_cast<std::size_t>(slot)] = 1.0;
                    for (int i = 0; i < d; ++i)
                        if (model.program(i).uses(slot)) M(i, j) = model.program(i).d2(base, e, dir).real();
                    e[static_cast<std::size_t>(slot)] = 0.0;
                }
                dC.push_back(M);
            }
        }
        lp.dC[name] = std::move(dC);
    }
    return lp;
}

Eigen::VectorXcd rhs_d2(const DdeModel& model, const Eigen::VectorXd& xbar, const LagValues& u, const LagValues& v) {
    const auto base = complex_base(model, xbar);
    const auto du = lag_direction(model, u), dv = lag_direction(model, v);
    Eigen::VectorXcd out(model.dim());
    for (int i = 0; i < model.dim(); ++i) out(i) = model.program(i).d2(base, du, dv);
    return out;
}

Eigen::VectorXcd rhs_d3(const DdeModel& model, const Eigen::VectorXd& xbar, const LagValues& u, const LagValues& v,
                        const LagValues& w) {
    const auto base = complex_base(model, xbar);
    const auto du = lag_direction(model, u), dv = lag_direction(model, v), dw = lag_direction(model, w);
    Eigen::VectorXcd out(model.dim());
    for (int i = 0; i < model.dim(); ++i) out(i) = model.program(i).d3(base, du, dv, dw);
    return out;
}

std::optional<DdeModel> builtin_model(const std::string& name) {
    if (name == "blowflies")
        return DdeModel::create(1, {0.0, 1.0}, {"-mu*x0@0 + beta*x0@1*exp(-x0@1)"}, {{"mu", 3.0}, {"beta", 30.0}},
                                {"log(beta/mu)"});
    if (name == "fluidflow")
        // w' = 1 - k w(t) w(t-1) q(t-1) / 2,  q' = w - c
        return DdeModel::create(2, {0.0, 1.0}, {"1 - k*x0@0*x0@1*x1@1/2", "x0@0 - c"}, {{"k", 1.5}, {"c", 1.5}},
                                {"c", "2/(k*c^2)"});
    return std::nullopt;
}

DdeModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("model file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "model file must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        if (k != "dim" && k != "delays" && k != "rhs" && k != "params" && k != "equilibrium_hint")
            throw Error(ErrorKind::InvalidArgument, "unknown model field '" + k + "'");
    }
    try {
        const int dim = j.at("dim").get<int>();
        auto delays = j.at("delays").get<std::vector<double>>();
        auto rhs = j.at("rhs").get<std::vector<std::string>>();
        std::map<std::string, double> params;
        if (j.contains("params")) params = j.at("params").get<std::map<std::string, double>>();
        std::vector<std::string> hint;
        if (j.contains("equilibrium_hint")) {
            for (const auto& h : j.at("equilibrium_hint")) {
                if (h.is_number()) hint.push_back(number_text(h.get<double>()));
                else hint.push_back(h.get<std::string>());
            }
        }
        return DdeModel::create(dim, std::move(delays), std::move(rhs), std::move(params), std::move(hint));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed model file: ") + e.what());
    }
}

std::string model_to_json(const DdeModel& model) {
    nlohmann::ordered_json j;
    j["dim"] = model.dim();
    j["delays"] = model.delays();
    j["rhs"] = model.rhs_text();
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (const auto& [k, v] : model.params()) p[k] = v;
    j["params"] = p;
    if (!model.hint_text().empty()) j["equilibrium_hint"] = model.hint_text();
    return j.dump(2);
}

DdeModel load_model(const std::string& name_or_path) {
    if (auto m = builtin_model(name_or_path)) return *m;
    std::ifstream in(name_or_path);
    if (!in) throw Error(ErrorKind::Io, "cannot open model '" + name_or_path + "' (not a built-in name or readable file)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace ddeps
