// SPDX-License-Identifier: MIT
#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <unistd.h>

#include "ddeps/analytic.hpp"
#include "ddeps/cheb_mesh.hpp"
#include "ddeps/discretize.hpp"
#include "ddeps/error.hpp"
#include "ddeps/expr.hpp"
#include "ddeps/hopf.hpp"
#include "ddeps/simulate.hpp"

namespace ddeps::cli {
namespace {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- formatting

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : width_(header.size()) { row(header); }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) s_ << (i ? "," : "") << csv_field(cells[i]);
        s_ << '\n';
    }
    [[nodiscard]] std::string str() const { return s_.str(); }
    [[nodiscard]] std::size_t width() const { return width_; }

private:
    std::ostringstream s_;
    std::size_t width_;
};

json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json jcomplex(cd z) { return json{{"re", jnum(z.real())}, {"im", jnum(z.imag())}}; }

// ---------------------------------------------------------------- shared options

struct ModelOpts {
    std::string model;
    std::vector<std::string> sets;
};

struct Output {
    std::string path;
    std::string format = "csv";
};

void add_model(CLI::App* app, ModelOpts& m, bool param_alias) {
    app->add_option("--model", m.model, "built-in model name or JSON model file")->required();
    // Commands without a bifurcation parameter also accept --param for overrides.
    app->add_option(param_alias ? "--set,--param" : "--set", m.sets, "parameter override name=value (repeatable)");
}

void add_output(CLI::App* app, Output& o, const std::string& default_format) {
    o.format = default_format;
    app->add_option("--output,-o", o.path, "write to this file instead of stdout");
    app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw Error(ErrorKind::InvalidArgument, what + ": '" + text + "' is not a finite number");
    return v;
}

DdeModel load(const ModelOpts& m) {
    DdeModel model = load_model(m.model);
    for (const auto& kv : m.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::InvalidArgument, "--set expects name=value, got '" + kv + "'");
        model = model.with_param(kv.substr(0, eq), parse_double(kv.substr(eq + 1), "--set " + kv.substr(0, eq)));
    }
    return model;
}

/// Writes to a sibling temporary file and renames it into place.
void emit(const Output& o, const std::string& content, std::ostream& out) {
    if (o.path.empty()) {
        out << content;
        return;
    }
    namespace fs = std::filesystem;
    const fs::path target(o.path);
    const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(ErrorKind::Io, "cannot open '" + tmp.string() + "' for writing");
        f << content;
        f.flush();
        if (!f) {
            f.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error(ErrorKind::Io, "write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::Io, "cannot move output into '" + o.path + "'");
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::optional<int> degree(const std::optional<int>& n, bool analytic) {
    if (analytic == n.has_value())
        throw Error(ErrorKind::InvalidArgument, "give exactly one of --n N and --analytic");
    return analytic ? std::nullopt : n;
}

/// Parses a+bi, a-bi, bi, a (with optional exponents).
cd parse_complex(const std::string& text) {
    static const std::regex re(R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?\s*(?:([+-]\s*(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)\s*[ij])?\s*$)");
    static const std::regex pure(R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)?(?:[eE][+-]?\d+)?)\s*[ij]\s*$)");
    std::smatch m;
    auto coef = [](std::string s) {
        s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
        if (s.empty() || s == "+") return 1.0;
        if (s == "-") return -1.0;
        return std::stod(s);
    };
    if (std::regex_match(text, m, pure)) return {0.0, coef(m[1].str())};
    if (std::regex_match(text, m, re) && (m[1].matched || m[2].matched)) {
        const double re_part = m[1].matched ? std::stod(m[1].str()) : 0.0;
        const double im_part = m[2].matched ? coef(m[2].str()) : 0.0;
        return {re_part, im_part};
    }
    throw Error(ErrorKind::InvalidArgument, "--lambda: cannot parse '" + text + "' as a complex number");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

std::string criticality(cd c) {
    if (c.real() < 0.0) return "supercritical";
    if (c.real() > 0.0) return "subcritical";
    return "degenerate";
}

json hopf_json(const HopfPoint& hp) {
    json margins = json::array();
    for (const auto& [k, m] : hp.nonresonance.margins) margins.push_back({{"k", k}, {"margin", jnum(m)}});
    json eq = json::array(), pstar = json::array(), hist = json::array();
    for (Eigen::Index i = 0; i < hp.equilibrium.size(); ++i) eq.push_back(jnum(hp.equilibrium(i)));
    for (Eigen::Index i = 0; i < hp.p_star.size(); ++i) pstar.push_back(jcomplex(hp.p_star(i)));
    for (double r : hp.residual_history) hist.push_back(jnum(r));
    json params = json::object();
    for (const auto& [k, v] : hp.params) params[k] = jnum(v);
    return json{
        {"param", hp.param},
        {"n", hp.n ? json(*hp.n) : json(nullptr)},
        {"omega", jnum(hp.omega)},
        {"alpha", jnum(hp.alpha)},
        {"residual", jnum(hp.residual)},
        {"iterations", hp.iterations},
        {"c", jcomplex(hp.c)},
        {"sigma", jnum(hp.sigma)},
        {"a2", jnum(hp.a2)},
        {"criticality", criticality(hp.c)},
        {"simplicity_margin", jnum(hp.simplicity_margin)},
        {"transversal", hp.transversal},
        {"degenerate", hp.degenerate},
        {"nonresonance_pass", hp.nonresonance.pass},
        {"axis_clearance", jnum(hp.nonresonance.axis_clearance)},
        {"nonresonance_margins", margins},
        {"nonresonance_failures", hp.nonresonance.failures},
        {"equilibrium", eq},
        {"p_star", pstar},
        {"params", params},
        {"residual_history", hist},
    };
}

// ---------------------------------------------------------------- commands

struct MeshCmd {
    int n = 0;
    Output out;
    std::string run() const {
        const Mesh m = make_mesh(n);
        const DiffOp op = diff_matrix(m);
        if (out.format == "json") {
            json D = json::array();
            for (int i = 0; i < n; ++i) {
                json row = json::array();
                for (int j = 0; j < n; ++j) row.push_back(op.D(i, j));
                D.push_back(row);
            }
            return dump(json{{"n", n},
                             {"nodes", std::vector<double>(m.nodes.data(), m.nodes.data() + n + 1)},
                             {"weights", std::vector<double>(m.bary_weights.data(), m.bary_weights.data() + n + 1)},
                             {"d0", std::vector<double>(op.d0.data(), op.d0.data() + n)},
                             {"D", D}});
        }
        std::vector<std::string> head{"j", "theta", "weight", "d0"};
        for (int j = 1; j <= n; ++j) head.push_back("D_" + std::to_string(j));
        Csv csv(head);
        for (int j = 0; j <= n; ++j) {
            std::vector<std::string> r{std::to_string(j), num(m.nodes(j)), num(m.bary_weights(j))};
            // Row 0 is the head node, which carries no differentiation row.
            r.push_back(j == 0 ? "nan" : num(op.d0(j - 1)));
            for (int k = 0; k < n; ++k) r.push_back(j == 0 ? "nan" : num(op.D(j - 1, k)));
            csv.row(r);
        }
        return csv.str();
    }
};

struct EigCmd {
    ModelOpts model;
    int n = 0;
    Output out;
    std::string run() const {
        const PsSystem ps = PsSystem::build(load(model), n);
        const Eigen::VectorXcd ev = eigenvalues(assemble_An(ps));
        if (out.format == "json") {
            json list = json::array();
            for (Eigen::Index i = 0; i < ev.size(); ++i) list.push_back(jcomplex(ev(i)));
            return dump(json{{"n", n}, {"eigenvalues", list}});
        }
        Csv csv({"re", "im"});
        for (Eigen::Index i = 0; i < ev.size(); ++i) csv.row({num(ev(i).real()), num(ev(i).imag())});
        return csv.str();
    }
};

struct CharfnCmd {
    ModelOpts model;
    int n = 0;
    std::vector<std::string> lambdas;
    Output out;
    std::string run() const {
        const DdeModel m = load(model);
        const LinearPart lp = linearize(m, default_equilibrium(m));
        const CharFnN cn(lp, n);
        const CharFn0 c0(lp);
        auto smin = [](const Eigen::MatrixXcd& M) {
            return Eigen::JacobiSVD<Eigen::MatrixXcd>(M).singularValues().minCoeff();
        };
        Csv csv({"lambda_re", "lambda_im", "delta_n_re", "delta_n_im", "delta_0_re", "delta_0_im", "smin_n", "smin_0"});
        json rows = json::array();
        for (const auto& text : lambdas) {
            const cd l = parse_complex(text);
            const Eigen::MatrixXcd Dn = cn.eval(l), D0 = c0.eval(l);
            const cd dn = Dn.determinant(), d0 = D0.determinant();
            const double sn = smin(Dn), s0 = smin(D0);
            csv.row({num(l.real()), num(l.imag()), num(dn.real()), num(dn.imag()), num(d0.real()), num(d0.imag()),
                     num(sn), num(s0)});
            rows.push_back(json{{"lambda", jcomplex(l)},
                                {"delta_n", jcomplex(dn)},
                                {"delta_0", jcomplex(d0)},
                                {"smin_n", jnum(sn)},
                                {"smin_0", jnum(s0)}});
        }
        if (out.format == "json") return dump(json{{"n", n}, {"values", rows}});
        return csv.str();
    }
};

struct HopfCmd {
    ModelOpts model;
    std::string param;
    double omega = 0.0, alpha = 0.0;
    std::optional<int> n;
    bool analytic = false;
    bool finite_difference = false;
    bool lyap_only = false;
    Output out;
    std::string run() const {
        const CharFamily fam(load(model), degree(n, analytic),
                             finite_difference ? ParamDerivative::FiniteDifference : ParamDerivative::Analytic);
        const HopfPoint hp = find_hopf(fam, param, omega, alpha);
        if (lyap_only) {
            const json j{{"param", hp.param}, {"n", hp.n ? json(*hp.n) : json(nullptr)},
                         {"omega", jnum(hp.omega)}, {"alpha", jnum(hp.alpha)},
                         {"c", jcomplex(hp.c)},     {"sigma", jnum(hp.sigma)},
                         {"a2", jnum(hp.a2)},       {"criticality", criticality(hp.c)}};
            if (out.format == "json") return dump(j);
            Csv csv({"param", "n", "omega", "alpha", "c_re", "c_im", "sigma", "a2", "criticality"});
            csv.row({hp.param, hp.n ? std::to_string(*hp.n) : "analytic", num(hp.omega), num(hp.alpha),
                     num(hp.c.real()), num(hp.c.imag()), num(hp.sigma), num(hp.a2), criticality(hp.c)});
            return csv.str();
        }
        if (out.format == "json") return dump(hopf_json(hp));
        Csv csv({"param", "n", "omega", "alpha", "residual", "iterations", "c_re", "c_im", "sigma", "a2",
                 "simplicity_margin", "transversal", "nonresonance_pass", "axis_clearance"});
        csv.row({hp.param, hp.n ? std::to_string(*hp.n) : "analytic", num(hp.omega), num(hp.alpha), num(hp.residual),
                 std::to_string(hp.iterations), num(hp.c.real()), num(hp.c.imag()), num(hp.sigma), num(hp.a2),
                 num(hp.simplicity_margin), hp.transversal ? "true" : "false",
                 hp.nonresonance.pass ? "true" : "false", num(hp.nonresonance.axis_clearance)});
        return csv.str();
    }
};

struct CurveCmd {
    ModelOpts model;
    std::string params;
    double omega = 0.0, alpha = 0.0;
    std::optional<int> n;
    bool analytic = false;
    double step = 0.05;
    int max_points = 200;
    std::vector<double> p1_range, p2_range;
    double omega_max = 1e300;
    std::string direction = "both";
    Output out;
    std::string run() const {
        const auto names = split(params, ',');
        if (names.size() != 2 || names[0].empty() || names[1].empty())
            throw Error(ErrorKind::InvalidArgument, "--params expects P1,P2");
        const CharFamily fam(load(model), degree(n, analytic));
        // The start is a Hopf point in the second parameter at the model's value of the first.
        HopfPoint start = find_hopf(fam, names[1], omega, alpha);
        start.params[names[0]] = fam.model().param(names[0]);
        TraceOptions opt;
        opt.max_points = max_points;
        opt.omega_max = omega_max;
        if (!p1_range.empty()) opt.p1_range = {p1_range[0], p1_range[1]};
        if (!p2_range.empty()) opt.p2_range = {p2_range[0], p2_range[1]};

        struct Branch {
            std::string name;
            StabilityCurve curve;
        };
        std::vector<Branch> branches;
        if (direction != "forward") {
            opt.step = -step;
            branches.push_back({"backward", trace_hopf_curve(fam, names[0], names[1], start, opt)});
        }
        if (direction != "backward") {
            opt.step = step;
            branches.push_back({"forward", trace_hopf_curve(fam, names[0], names[1], start, opt)});
        }
        // Ordered along the curve: backward branch reversed, then forward; the start appears once.
        std::vector<std::pair<std::string, CurvePoint>> rows;
        for (const auto& b : branches) {
            if (b.name == "backward") {
                for (auto it = b.curve.points.rbegin(); it != b.curve.points.rend(); ++it) rows.emplace_back(b.name, *it);
            } else {
                const std::size_t skip = branches.size() == 2 ? 1 : 0;
                for (std::size_t i = skip; i < b.curve.points.size(); ++i) rows.emplace_back(b.name, b.curve.points[i]);
            }
        }
        if (out.format == "json") {
            json pts = json::array(), term = json::object();
            for (const auto& [name, p] : rows)
                pts.push_back(json{{"branch", name}, {names[0], jnum(p.p1)}, {names[1], jnum(p.p2)},
                                   {"omega", jnum(p.omega)}, {"residual", jnum(p.residual)},
                                   {"iterations", p.iterations}, {"step", jnum(p.step)}});
            for (const auto& b : branches) term[b.name] = json{{"termination", b.curve.termination},
                                                               {"message", b.curve.message}};
            return dump(json{{"p1", names[0]}, {"p2", names[1]}, {"n", n ? json(*n) : json(nullptr)},
                             {"points", pts}, {"termination", term}});
        }
        Csv csv({"branch", names[0], names[1], "omega", "residual", "iterations", "step"});
        for (const auto& [name, p] : rows)
            csv.row({name, num(p.p1), num(p.p2), num(p.omega), num(p.residual), std::to_string(p.iterations),
                     num(p.step)});
        return csv.str();
    }
};

struct ConvergeCmd {
    ModelOpts model;
    std::string param;
    double omega = 0.0, alpha = 0.0;
    std::string n_list;
    std::string reference = "exact";
    Output out;
    std::string run() const {
        std::vector<int> ns;
        for (const auto& s : split(n_list, ',')) {
            const double v = parse_double(s, "--n-list");
            if (v != std::floor(v) || v < 1 || v > 1000)
                throw Error(ErrorKind::InvalidArgument, "--n-list entries must be integers in [1, 1000]");
            ns.push_back(static_cast<int>(v));
        }
        const auto rows = convergence_study(load(model), param, omega, alpha, ns, reference == "finest");
        if (out.format == "json") {
            json list = json::array();
            for (const auto& r : rows)
                list.push_back(json{{"n", r.n}, {"alpha_err", jnum(r.alpha_err)}, {"omega_err", jnum(r.omega_err)},
                                    {"a2_err", jnum(r.a2_err)}, {"sigma", jnum(r.sigma)},
                                    {"simplicity", jnum(r.simplicity)}, {"min_margin", jnum(r.min_margin)},
                                    {"status", r.status}});
            return dump(json{{"param", param}, {"reference", reference}, {"rows", list}});
        }
        Csv csv({"n", "alpha_err", "omega_err", "a2_err", "sigma", "simplicity", "min_margin", "status"});
        for (const auto& r : rows)
            csv.row({std::to_string(r.n), num(r.alpha_err), num(r.omega_err), num(r.a2_err), num(r.sigma),
                     num(r.simplicity), num(r.min_margin), r.status});
        return csv.str();
    }
};

struct SimulateCmd {
    ModelOpts model;
    int n = 20;
    double t_end = 200.0;
    std::string history;
    std::string period_path;
    double skip = 0.6;
    int component = 0;
    IntegrateOptions integ;
    Output out;

    History make_history(const DdeModel& m, const Eigen::VectorXd& xbar) const {
        const auto colon = history.find(':');
        const std::string kind = history.substr(0, colon), body = colon == std::string::npos ? "" : history.substr(colon + 1);
        const int d = m.dim();
        auto expand = [&](std::vector<std::string> parts) {
            if (parts.size() == 1 && d > 1) parts.assign(d, parts[0]);
            if (static_cast<int>(parts.size()) != d)
                throw Error(ErrorKind::InvalidArgument, "--history needs 1 or " + std::to_string(d) + " components");
            return parts;
        };
        if (kind == "const") {
            Eigen::VectorXd v(d);
            const auto parts = expand(split(body, ';'));
            for (int i = 0; i < d; ++i) v(i) = parse_double(parts[i], "--history const");
            return [v](double) { return v; };
        }
        if (kind == "expr") {
            // Expressions see theta, every model parameter and xbar0, xbar1, ... for the equilibrium.
            SymbolTable syms;
            syms.dim = 1;
            syms.nlags = 1;
            std::vector<double> in{0.0};
            syms.params.push_back("theta");
            in.push_back(0.0);
            for (const auto& [k, v] : m.params()) {
                syms.params.push_back(k);
                in.push_back(v);
            }
            for (int i = 0; i < d; ++i) {
                syms.params.push_back("xbar" + std::to_string(i));
                in.push_back(xbar(i));
            }
            std::vector<Program> progs;
            for (const auto& p : expand(split(body, ';'))) progs.push_back(Program::compile(Expr::parse(p), syms));
            return [progs, in](double theta) mutable {
                in[1] = theta;
                Eigen::VectorXd v(static_cast<Eigen::Index>(progs.size()));
                for (std::size_t i = 0; i < progs.size(); ++i)
                    v(static_cast<Eigen::Index>(i)) = progs[i].eval(std::span<const double>(in));
                return v;
            };
        }
        throw Error(ErrorKind::InvalidArgument, "--history must be const:VALUE or expr:TEXT");
    }

    std::string run() const {
        const DdeModel m = load(model);
        const PsSystem ps = PsSystem::build(m, n);
        const Trajectory tr = integrate(ps, sample_history(ps, make_history(m, ps.equilibrium)), t_end, integ);
        const int d = m.dim();
        if (!period_path.empty()) {
            if (component < 0 || component >= d)
                throw Error(ErrorKind::InvalidArgument, "--component out of range");
            const PeriodEstimate p = estimate_period(tr, component, skip);
            emit(Output{period_path, "json"},
                 dump(json{{"period", jnum(p.period)}, {"spread", jnum(p.spread)}, {"grouping", p.grouping},
                           {"crossings", p.crossings}, {"component", component}, {"skip", skip}}),
                 std::cout);
        }
        if (out.format == "json") {
            json t = json::array(), y = json::array();
            for (std::size_t i = 0; i < tr.times.size(); ++i) {
                t.push_back(jnum(tr.times[i]));
                json row = json::array();
                for (int c = 0; c < d; ++c) row.push_back(jnum(tr.states[i](c)));
                y.push_back(row);
            }
            return dump(json{{"n", n}, {"t", t}, {"y0", y}});
        }
        std::vector<std::string> head{"t"};
        for (int c = 0; c < d; ++c) head.push_back("y0_" + std::to_string(c));
        Csv csv(head);
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            std::vector<std::string> r{num(tr.times[i])};
            for (int c = 0; c < d; ++c) r.push_back(num(tr.states[i](c)));
            csv.row(r);
        }
        return csv.str();
    }
};

struct ChartCmd {
    int n = 0;
    double omega_min = 0.0, omega_max = 0.0;
    int steps = 0;
    Output out;
    std::string run() const {
        const auto rows = blowfly::chart(n, omega_min, omega_max, steps);
        if (out.format == "json") {
            json list = json::array();
            for (const auto& r : rows)
                list.push_back(json{{"curve", r.curve}, {"branch", r.branch}, {"omega", jnum(r.omega)},
                                    {"b1", jnum(r.b1)}, {"b2", jnum(r.b2)}, {"mu", jnum(r.mu)},
                                    {"beta_over_mu", jnum(r.beta_over_mu)}, {"re_c", jnum(r.re_c)}});
            return dump(json{{"n", n}, {"rows", list}});
        }
        Csv csv({"curve", "branch", "omega", "b1", "b2", "mu", "beta_over_mu", "re_c"});
        for (const auto& r : rows)
            csv.row({r.curve, std::to_string(r.branch), num(r.omega), num(r.b1), num(r.b2), num(r.mu),
                     num(r.beta_over_mu), num(r.re_c)});
        return csv.str();
    }
};

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Parse:
        case ErrorKind::UnknownSymbol:
        case ErrorKind::Io: return 2;
        default: return 1;
    }
}

void report(std::ostream& err, const std::string& kind, const std::string& message) {
    err << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pseudospectral reduction and Hopf analysis of delay differential equations", "ddeps"};
    app.require_subcommand(1);
    const auto n_range = CLI::Range(1, 1000);

    MeshCmd mesh;
    auto* c_mesh = app.add_subcommand("mesh", "Chebyshev nodes, barycentric weights and differentiation matrix");
    c_mesh->add_option("--n", mesh.n, "polynomial degree")->required()->check(n_range);
    add_output(c_mesh, mesh.out, "csv");

    EigCmd eig;
    auto* c_eig = app.add_subcommand("eig", "eigenvalues of the discretized linearization");
    add_model(c_eig, eig.model, true);
    c_eig->add_option("--n", eig.n, "polynomial degree")->required()->check(n_range);
    add_output(c_eig, eig.out, "csv");

    CharfnCmd chf;
    auto* c_chf = app.add_subcommand("charfn", "discretized and exact characteristic functions at given points");
    add_model(c_chf, chf.model, true);
    c_chf->add_option("--n", chf.n, "polynomial degree")->required()->check(n_range);
    c_chf->add_option("--lambda", chf.lambdas, "complex point, e.g. 0.1+2i (repeatable)")->required();
    add_output(c_chf, chf.out, "csv");

    HopfCmd hopf;
    HopfCmd lyap;
    lyap.lyap_only = true;
    CLI::App* c_hopf = nullptr;
    CLI::App* c_lyap = nullptr;
    for (auto* h : {&hopf, &lyap}) {
        auto* c = app.add_subcommand(h->lyap_only ? "lyap" : "hopf",
                                     h->lyap_only ? "Lyapunov and direction coefficients at a Hopf point"
                                                  : "locate a Hopf point by Newton's method");
        add_model(c, h->model, false);
        c->add_option("--param", h->param, "bifurcation parameter")->required();
        c->add_option("--omega", h->omega, "initial frequency guess")->required()->check(CLI::PositiveNumber);
        c->add_option("--alpha", h->alpha, "initial parameter guess")->required();
        auto* on = c->add_option("--n", h->n, "polynomial degree")->check(n_range);
        c->add_flag("--analytic", h->analytic, "use the exact delay characteristic function")->excludes(on);
        c->add_flag("--fd", h->finite_difference, "finite-difference parameter derivatives");
        add_output(c, h->out, "json");
        (h->lyap_only ? c_lyap : c_hopf) = c;
    }

    CurveCmd curve;
    auto* c_curve = app.add_subcommand("curve", "continue a Hopf curve in two parameters");
    add_model(c_curve, curve.model, false);
    c_curve->add_option("--params", curve.params, "P1,P2")->required();
    c_curve->add_option("--omega", curve.omega, "frequency guess at the start")->required()->check(CLI::PositiveNumber);
    c_curve->add_option("--alpha", curve.alpha, "guess for P2 at the start")->required();
    auto* cn = c_curve->add_option("--n", curve.n, "polynomial degree")->check(n_range);
    c_curve->add_flag("--analytic", curve.analytic, "use the exact delay characteristic function")->excludes(cn);
    c_curve->add_option("--step", curve.step, "initial arclength step")->check(CLI::PositiveNumber);
    c_curve->add_option("--max-points", curve.max_points, "points per direction")->check(CLI::Range(1, 1000000));
    c_curve->add_option("--p1-range", curve.p1_range, "MIN MAX")->expected(2);
    c_curve->add_option("--p2-range", curve.p2_range, "MIN MAX")->expected(2);
    c_curve->add_option("--omega-max", curve.omega_max, "stop above this frequency")->check(CLI::PositiveNumber);
    c_curve->add_option("--direction", curve.direction, "forward, backward or both")
        ->check(CLI::IsMember({"forward", "backward", "both"}));
    add_output(c_curve, curve.out, "csv");

    ConvergeCmd conv;
    auto* c_conv = app.add_subcommand("converge", "Hopf point errors against a reference over several n");
    add_model(c_conv, conv.model, false);
    c_conv->add_option("--param", conv.param, "bifurcation parameter")->required();
    c_conv->add_option("--omega", conv.omega, "frequency guess")->required()->check(CLI::PositiveNumber);
    c_conv->add_option("--alpha", conv.alpha, "parameter guess")->required();
    c_conv->add_option("--n-list", conv.n_list, "comma-separated degrees")->required();
    c_conv->add_option("--reference", conv.reference, "exact or finest")->check(CLI::IsMember({"exact", "finest"}));
    add_output(c_conv, conv.out, "csv");

    SimulateCmd sim;
    auto* c_sim = app.add_subcommand("simulate", "integrate the discretized system");
    add_model(c_sim, sim.model, true);
    c_sim->add_option("--n", sim.n, "polynomial degree")->check(n_range);
    c_sim->add_option("--t-end", sim.t_end, "final time")->required()->check(CLI::PositiveNumber);
    c_sim->add_option("--history", sim.history, "const:VALUE[;VALUE...] or expr:TEXT[;TEXT...] in theta")->required();
    c_sim->add_option("--period", sim.period_path, "write a JSON period report to this file");
    c_sim->add_option("--skip", sim.skip, "fraction of the run treated as transient")->check(CLI::Range(0.0, 0.99));
    c_sim->add_option("--component", sim.component, "component used for the period")->check(CLI::NonNegativeNumber);
    c_sim->add_option("--rtol", sim.integ.rel_tol, "relative tolerance")->check(CLI::Range(1e-12, 1e-2));
    c_sim->add_option("--atol", sim.integ.abs_tol, "absolute tolerance")->check(CLI::Range(1e-12, 1e-2));
    c_sim->add_option("--max-step", sim.integ.max_step, "largest step and output spacing")->check(CLI::PositiveNumber);
    add_output(c_sim, sim.out, "csv");

    ChartCmd chart;
    auto* c_chart = app.add_subcommand("chart-blowfly", "Hopf boundaries of x' = b1 x + b2 x(t-1), exact and discretized");
    c_chart->add_option("--n", chart.n, "polynomial degree")->required()->check(n_range);
    c_chart->add_option("--omega-min", chart.omega_min, "grid start")->required();
    c_chart->add_option("--omega-max", chart.omega_max, "grid end")->required();
    c_chart->add_option("--steps", chart.steps, "grid intervals")->required()->check(CLI::Range(1, 10000000));
    add_output(c_chart, chart.out, "csv");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        report(err, "usage", e.what());
        return 2;
    }

    try {
        std::string content;
        const Output* dest = nullptr;
        if (c_mesh->parsed()) content = mesh.run(), dest = &mesh.out;
        else if (c_eig->parsed()) content = eig.run(), dest = &eig.out;
        else if (c_chf->parsed()) content = chf.run(), dest = &chf.out;
        else if (c_hopf->parsed()) content = hopf.run(), dest = &hopf.out;
        else if (c_lyap->parsed()) content = lyap.run(), dest = &lyap.out;
        else if (c_curve->parsed()) content = curve.run(), dest = &curve.out;
        else if (c_conv->parsed()) content = conv.run(), dest = &conv.out;
        else if (c_sim->parsed()) content = sim.run(), dest = &sim.out;
        else if (c_chart->parsed()) content = chart.run(), dest = &chart.out;
        emit(*dest, content, out);
        return 0;
    } catch (const Error& e) {
        report(err, std::string(kind_name(e.kind())), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        report(err, "internal", e.what());
        return 1;
    }
}

}  // namespace ddeps::cli
