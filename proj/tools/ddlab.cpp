// Command line frontend: evaluate laws on parameter grids, price the two
// drawdown products, run the Monte Carlo oracle, and run verification
// sweeps. Emits a human table, CSV, or versioned JSON.
//
// Exit codes: 0 success, 1 verify comparison failure, 2 validation error,
// 3 numerical failure (rows that failed carry the error variant name and
// the rest of the grid is still written).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <ddlab/ddlab.hpp>

using nlohmann::json;
using namespace ddlab;

namespace {

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------- grids ---

// "0.5" | "0.1,0.5,2" | "lo:hi:n" (inclusive linspace)
std::vector<double> parse_grid(const std::string& spec, const std::string& flag) {
    std::vector<double> out;
    auto parse_one = [&](const std::string& tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception&) {
            throw DomainViolation("--" + flag + ": '" + tok + "' is not a number");
        }
        if (used != tok.size())
            throw DomainViolation("--" + flag + ": '" + tok + "' is not a number");
        return v;
    };
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ':')) parts.push_back(tok);
        if (parts.size() != 3)
            throw DomainViolation("--" + flag + ": range must be lo:hi:n");
        const double lo = parse_one(parts[0]), hi = parse_one(parts[1]);
        const double nd = parse_one(parts[2]);
        if (!(nd >= 1.0) || nd != std::floor(nd))
            throw DomainViolation("--" + flag + ": point count must be a positive integer");
        const std::int64_t n = (std::int64_t)nd;
        if (n == 1) {
            out.push_back(lo);
        } else {
            for (std::int64_t i = 0; i < n; ++i)
                out.push_back(lo + (hi - lo) * (double)i / (double)(n - 1));
        }
        return out;
    }
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(parse_one(tok));
    }
    if (out.empty()) throw DomainViolation("--" + flag + ": empty grid");
    return out;
}

// --------------------------------------------------------------- models ---

struct ModelOpts {
    std::string kind = "bm";
    double mu = 0.0, sigma = 1.0;
    std::string drift_expr, diffusion_expr;
    double left_boundary = -std::numeric_limits<double>::infinity();
    double kappa = 0.0;
    std::string window;  // lo:hi for the custom eigenfunction solver
    int grid_steps = 4000;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--model", kind, "model: bm | bes3 | custom")
            ->check(CLI::IsMember({"bm", "bes3", "custom"}));
        cmd->add_option("--mu", mu, "bm drift");
        cmd->add_option("--sigma", sigma, "bm volatility");
        cmd->add_option("--drift", drift_expr, "custom drift expression in x");
        cmd->add_option("--diffusion", diffusion_expr, "custom diffusion expression in x");
        cmd->add_option("--left-boundary", left_boundary, "custom state space is (l, inf)");
        cmd->add_option("--kappa", kappa, "custom normalization point");
        cmd->add_option("--window", window, "custom solver window lo:hi");
        cmd->add_option("--grid-steps", grid_steps, "custom solver grid intervals");
    }

    DiffusionModel build() const {
        if (kind == "bm") {
            if (!(sigma > 0.0)) throw NonPositiveDiffusion("sigma must be positive");
            return bm_provider({mu, sigma});
        }
        if (kind == "bes3") return bes3_provider();
        if (drift_expr.empty() || diffusion_expr.empty())
            throw DomainViolation("custom model needs --drift and --diffusion expressions");
        if (window.empty())
            throw DomainViolation("custom model needs --window lo:hi for the eigen solver");
        const auto colon = window.find(':');
        if (colon == std::string::npos || window.find(':', colon + 1) != std::string::npos)
            throw DomainViolation("--window must be lo:hi with lo < hi");
        std::vector<double> w;
        try {
            w.push_back(std::stod(window.substr(0, colon)));
            w.push_back(std::stod(window.substr(colon + 1)));
        } catch (const std::exception&) {
            throw DomainViolation("--window must be lo:hi with numeric bounds");
        }
        if (!(w[0] < w[1]))
            throw DomainViolation("--window must be lo:hi with lo < hi");
        auto mu_e = Expression::parse_named(drift_expr);
        auto sig_e = Expression::parse_named(diffusion_expr);
        OdeEigenConfig cfg;
        cfg.x_lo = w[0];
        cfg.x_hi = w[1];
        cfg.n_steps = grid_steps;
        const double kap = kappa;
        return make_custom_model(
            "custom", [mu_e](double x) { return mu_e(x); },
            [sig_e](double x) { return sig_e(x); }, left_boundary, kap, cfg);
    }

    json describe() const {
        json j{{"kind", kind}};
        if (kind == "bm") {
            j["mu"] = mu;
            j["sigma"] = sigma;
        } else if (kind == "custom") {
            j["drift"] = drift_expr;
            j["diffusion"] = diffusion_expr;
            j["left_boundary"] = left_boundary;
            j["kappa"] = kappa;
            j["window"] = window;
        }
        return j;
    }
};

// --------------------------------------------------------------- output ---

struct Row {
    std::vector<std::pair<std::string, double>> inputs;
    std::string label;  // verify rows name the property being checked
    double value = std::numeric_limits<double>::quiet_NaN();
    double error = 0.0;  // quadrature bound, inversion diagnostic, or MC SE
    std::string method;
    std::string status = "ok";
    double elapsed_ms = 0.0;
    std::vector<std::pair<std::string, double>> extras;  // simulate diagnostics
};

struct Report {
    std::string subcommand, target;
    json model;
    std::vector<Row> rows;
    std::vector<std::pair<std::string, std::string>> summary;

    bool any_failure() const {
        for (const auto& r : rows)
            if (r.status != "ok" && r.status != "pass") return true;
        return false;
    }
};

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit_table(const Report& rep, std::ostream& os) {
    std::vector<std::string> cols;
    if (!rep.rows.empty()) {
        for (const auto& kv : rep.rows.front().inputs) cols.push_back(kv.first);
    }
    const bool labeled = !rep.rows.empty() && !rep.rows.front().label.empty();
    os << rep.subcommand << " " << rep.target << "\n";
    if (labeled) os << "  case";
    for (const auto& c : cols) os << "  " << c;
    os << "  value  error  method  status  ms\n";
    char buf[64];
    for (const auto& r : rep.rows) {
        if (labeled) os << "  " << r.label;
        for (const auto& kv : r.inputs) {
            std::snprintf(buf, sizeof buf, "  %.6g", kv.second);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "  %.9g  %.3g", r.value, r.error);
        os << buf << "  " << r.method << "  " << r.status;
        std::snprintf(buf, sizeof buf, "  %.2f", r.elapsed_ms);
        os << buf;
        for (const auto& kv : r.extras) {
            std::snprintf(buf, sizeof buf, "  %s=%.6g", kv.first.c_str(), kv.second);
            os << buf;
        }
        os << "\n";
    }
    for (const auto& kv : rep.summary) os << kv.first << ": " << kv.second << "\n";
}

void emit_csv(const Report& rep, std::ostream& os) {
    if (rep.rows.empty()) return;
    const bool labeled = !rep.rows.front().label.empty();
    if (labeled) os << "case,";
    for (const auto& kv : rep.rows.front().inputs) os << kv.first << ",";
    os << "value,error,method,status,elapsed_ms";
    for (const auto& kv : rep.rows.front().extras) os << "," << kv.first;
    os << "\n";
    for (const auto& r : rep.rows) {
        if (labeled) os << r.label << ",";
        for (const auto& kv : r.inputs) os << fmt17(kv.second) << ",";
        os << fmt17(r.value) << "," << fmt17(r.error) << "," << r.method << "," << r.status << ","
           << fmt17(r.elapsed_ms);
        for (const auto& kv : r.extras) os << "," << fmt17(kv.second);
        os << "\n";
    }
}

void emit_json(const Report& rep, std::ostream& os) {
    json out{{"schema", "drawdown-lab/1"},
             {"subcommand", rep.subcommand},
             {"target", rep.target},
             {"model", rep.model}};
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json inputs;
        for (const auto& kv : r.inputs) inputs[kv.first] = kv.second;
        json jr{{"inputs", inputs},
                {"error", r.error},
                {"method", r.method},
                {"status", r.status},
                {"elapsed_ms", r.elapsed_ms}};
        if (!r.label.empty()) jr["case"] = r.label;
        if (std::isnan(r.value)) jr["value"] = nullptr;
        else jr["value"] = r.value;
        for (const auto& kv : r.extras) jr[kv.first] = kv.second;
        rows.push_back(std::move(jr));
    }
    out["rows"] = std::move(rows);
    json sum;
    for (const auto& kv : rep.summary) sum[kv.first] = kv.second;
    out["summary"] = std::move(sum);
    os << out.dump(2) << "\n";
}

void emit(const Report& rep, const std::string& format, const std::string& path) {
    std::ofstream file;
    std::ostream* os = &std::cout;
    if (!path.empty()) {
        file.open(path);
        if (!file) throw DomainViolation("cannot open output file '" + path + "'");
        os = &file;
    }
    if (format == "csv") emit_csv(rep, *os);
    else if (format == "json") emit_json(rep, *os);
    else emit_table(rep, *os);
}

// deterministic index-ordered parallel map
template <class Fn>
void parallel_rows(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// ------------------------------------------------------------ law specs ---

struct ParamSet {
    double x, q, p, a, b, y, t;
};

struct LawDef {
    std::vector<std::string> params;  // subset of x,q,p,a,b,y,t in output order
    std::function<void(const ParamSet&)> validate;
    std::function<std::pair<double, double>(const DiffusionModel&, const ParamSet&, double tol)>
        eval;  // value, error
    std::string method = "quadrature";
};

void need_positive(double v, const char* name) {
    if (!(v > 0.0)) throw DomainViolation(std::string(name) + " must be positive");
}

const std::map<std::string, LawDef>& law_registry() {
    static const std::map<std::string, LawDef> reg = [] {
        std::map<std::string, LawDef> r;
        r["dd-transform"] = {{"x", "q", "a"},
                             [](const ParamSet& s) {
                                 need_positive(s.a, "a");
                                 if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto lr = drawdown_transform(m, s.q, s.x, s.a, tol);
                                 return std::make_pair(lr.value, lr.error);
                             }};
        r["du-transform"] = {{"x", "q", "b"},
                             [](const ParamSet& s) {
                                 need_positive(s.b, "b");
                                 if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto lr = drawup_transform(m, s.q, s.x, s.b, tol);
                                 return std::make_pair(lr.value, lr.error);
                             }};
        r["dd-before-du"] = {{"x", "q", "a", "b"},
                             [](const ParamSet& s) {
                                 need_positive(s.a, "a");
                                 need_positive(s.b, "b");
                                 if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto orr = dd_before_du(m, s.q, s.x, s.a, s.b, tol);
                                 return std::make_pair(orr.probability.value,
                                                       orr.probability.error);
                             }};
        r["du-before-dd"] = {{"x", "q", "a", "b"},
                             [](const ParamSet& s) {
                                 need_positive(s.a, "a");
                                 need_positive(s.b, "b");
                                 if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto orr = du_before_dd(m, s.q, s.x, s.a, s.b, tol);
                                 return std::make_pair(orr.probability.value,
                                                       orr.probability.error);
                             }};
        r["dd-cdf"] = {{"x", "a", "t"},
                       [](const ParamSet& s) {
                           need_positive(s.a, "a");
                           need_positive(s.t, "t");
                       },
                       [](const DiffusionModel& m, const ParamSet& s, double) {
                           TransformFn F;
                           F.f = [&m, &s](double q) {
                               return drawdown_transform(m, q, s.x, s.a).value / q;
                           };
                           F.is_probability = true;
                           auto inv = invert(F, s.t);
                           return std::make_pair(inv.value, inv.diagnostic);
                       },
                       "inversion"};
        r["occ-exit-up"] = {{"x", "q", "p", "y", "a", "b"},
                            [](const ParamSet& s) {
                                if (!(s.a < s.x && s.x < s.b))
                                    throw DomainViolation("need a < x < b");
                                if (!(s.a <= s.y && s.y <= s.b))
                                    throw DomainViolation("need a <= y <= b");
                                if (s.q < 0.0 || s.p < 0.0)
                                    throw DomainViolation("q, p must be nonnegative");
                            },
                            [](const DiffusionModel& m, const ParamSet& s, double) {
                                return std::make_pair(occ_exit_up(m, s.q, s.p, s.x, s.y, s.a, s.b),
                                                      0.0);
                            }};
        r["occ-exit-down"] = {{"x", "q", "y", "a", "b"},
                              [](const ParamSet& s) {
                                  if (!(s.a < s.x && s.x < s.b))
                                      throw DomainViolation("need a < x < b");
                                  if (!(s.a <= s.y && s.y <= s.b))
                                      throw DomainViolation("need a <= y <= b");
                                  if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                              },
                              [](const DiffusionModel& m, const ParamSet& s, double) {
                                  return std::make_pair(occ_exit_down(m, s.q, s.x, s.y, s.a, s.b),
                                                        0.0);
                              }};
        r["occ-below-until-up"] = {{"x", "q", "p", "y", "b"},
                                   [](const ParamSet& s) {
                                       if (!(s.y < s.x && s.x < s.b))
                                           throw DomainViolation("need y < x < b");
                                       if (s.q < 0.0 || s.p < 0.0)
                                           throw DomainViolation("q, p must be nonnegative");
                                   },
                                   [](const DiffusionModel& m, const ParamSet& s, double) {
                                       return std::make_pair(
                                           occ_below_until_up(m, s.q, s.p, s.x, s.y, s.b), 0.0);
                                   }};
        r["occ-below-start"] = {{"x", "q", "a"},
                                [](const ParamSet& s) {
                                    need_positive(s.a, "a");
                                    need_positive(s.q, "q");
                                },
                                [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                    auto lr = occ_below_start_until_dd(m, s.q, s.x, s.a, tol);
                                    return std::make_pair(lr.value, lr.error);
                                }};
        r["occ-dd-above"] = {{"x", "q", "y", "a"},
                             [](const ParamSet& s) {
                                 need_positive(s.a, "a");
                                 need_positive(s.q, "q");
                                 if (!(s.y > 0.0 && s.y < s.a))
                                     throw DomainViolation("need 0 < y < a");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto lr = occ_dd_above_until_dd(m, s.q, s.x, s.y, s.a, tol);
                                 return std::make_pair(lr.value, lr.error);
                             }};
        r["occ-du-below"] = {{"x", "q", "y", "a"},
                             [](const ParamSet& s) {
                                 need_positive(s.a, "a");
                                 need_positive(s.q, "q");
                                 if (!(s.y >= s.a))
                                     throw DomainViolation("need y >= a (deficit window)");
                             },
                             [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                 auto lr = occ_du_below_until_dd(m, s.q, s.x, s.y, s.a, tol);
                                 return std::make_pair(lr.value, lr.error);
                             }};
        r["occ-dd-above-exp"] = {{"x", "q", "p", "y"},
                                 [](const ParamSet& s) {
                                     need_positive(s.y, "y");
                                     need_positive(s.p, "p");
                                     if (s.q < 0.0) throw DomainViolation("q must be nonnegative");
                                 },
                                 [](const DiffusionModel& m, const ParamSet& s, double tol) {
                                     auto lr = occ_dd_above_at_exp(m, s.q, s.p, s.x, s.y, tol);
                                     return std::make_pair(lr.value, lr.error);
                                 }};
        return r;
    }();
    return reg;
}

// ------------------------------------------------------------------ law ---

struct GridFlags {
    std::string x, q, p, a, b, y, t;

    void add_flags(CLI::App* cmd) {
        cmd->add_option("--x", x, "start point grid (default: model kappa)");
        cmd->add_option("--q", q, "rate / killing parameter grid");
        cmd->add_option("--p", p, "second rate grid");
        cmd->add_option("--a", a, "drawdown threshold grid");
        cmd->add_option("--b", b, "drawup / upper-barrier grid");
        cmd->add_option("--y", y, "occupation level grid");
        cmd->add_option("--t", t, "time horizon grid");
    }

    std::vector<double> get(const std::string& name, bool required,
                            double fallback = 0.0) const {
        const std::string* src = nullptr;
        if (name == "x") src = &x;
        else if (name == "q") src = &q;
        else if (name == "p") src = &p;
        else if (name == "a") src = &a;
        else if (name == "b") src = &b;
        else if (name == "y") src = &y;
        else if (name == "t") src = &t;
        if (!src || src->empty()) {
            if (required) throw DomainViolation("missing required parameter --" + name);
            return {fallback};
        }
        return parse_grid(*src, name);
    }
};

int run_law(const std::string& law_id, const ModelOpts& mopts, const GridFlags& grids, double tol,
            std::int64_t grid_cap, int threads, const std::string& format,
            const std::string& output) {
    const auto& reg = law_registry();
    auto it = reg.find(law_id);
    if (it == reg.end()) {
        std::string known;
        for (const auto& kv : reg) known += kv.first + " ";
        throw DomainViolation("unknown law '" + law_id + "'; available: " + known);
    }
    const LawDef& def = it->second;
    const DiffusionModel model = mopts.build();

    std::vector<std::vector<double>> axes;
    for (const auto& p : def.params)
        axes.push_back(grids.get(p, p != "x", model.kappa));
    std::int64_t total = 1;
    for (const auto& ax : axes) total *= (std::int64_t)ax.size();
    if (total > grid_cap)
        throw DomainViolation("grid has " + std::to_string(total) + " points, cap is " +
                              std::to_string(grid_cap) + " (--grid-cap)");

    // build the full parameter list in input-grid order (last axis fastest)
    std::vector<ParamSet> points((std::size_t)total);
    for (std::int64_t idx = 0; idx < total; ++idx) {
        std::int64_t rest = idx;
        ParamSet s{model.kappa, 0, 0, 0, 0, 0, 0};
        for (std::size_t ai = axes.size(); ai-- > 0;) {
            const double v = axes[ai][(std::size_t)(rest % (std::int64_t)axes[ai].size())];
            rest /= (std::int64_t)axes[ai].size();
            const std::string& name = def.params[ai];
            if (name == "x") s.x = v;
            else if (name == "q") s.q = v;
            else if (name == "p") s.p = v;
            else if (name == "a") s.a = v;
            else if (name == "b") s.b = v;
            else if (name == "y") s.y = v;
            else if (name == "t") s.t = v;
        }
        points[(std::size_t)idx] = s;
    }
    // every grid point must pass the law's preconditions before any work runs
    for (const auto& s : points) def.validate(s);

    Report rep;
    rep.subcommand = "law";
    rep.target = law_id;
    rep.model = mopts.describe();
    rep.rows.resize(points.size());
    std::atomic<bool> numerical_failure{false};
    parallel_rows(points.size(), threads, [&](std::size_t i) {
        const ParamSet& s = points[i];
        Row& row = rep.rows[i];
        for (const auto& name : def.params) {
            double v = 0;
            if (name == "x") v = s.x;
            else if (name == "q") v = s.q;
            else if (name == "p") v = s.p;
            else if (name == "a") v = s.a;
            else if (name == "b") v = s.b;
            else if (name == "y") v = s.y;
            else if (name == "t") v = s.t;
            row.inputs.emplace_back(name, v);
        }
        row.method = def.method;
        const double t0 = now_ms();
        try {
            auto [value, error] = def.eval(model, s, tol);
            row.value = value;
            row.error = error;
        } catch (const NumericalFailure& e) {
            row.status = e.variant();
            numerical_failure = true;
        }
        row.elapsed_ms = now_ms() - t0;
    });
    rep.summary.emplace_back("rows", std::to_string(points.size()));
    rep.summary.emplace_back("status", numerical_failure ? "numerical-failure" : "ok");
    emit(rep, format, output);
    return numerical_failure ? 3 : 0;
}

// ---------------------------------------------------------------- price ---

int run_price(const std::string& product, const ModelOpts& mopts, const GridFlags& grids,
              const std::string& K_s, const std::string& T_s, const std::string& alpha_s,
              double rate, double cap, double tol, const std::string& hazard_kind, double haz_rate,
              double haz_level, std::int64_t grid_cap, int threads, const std::string& format,
              const std::string& output) {
    const DiffusionModel model = mopts.build();
    const double x = grids.get("x", false, model.kappa)[0];

    Report rep;
    rep.subcommand = "price";
    rep.target = product;
    rep.model = mopts.describe();
    std::atomic<bool> numerical_failure{false};

    auto run_grid = [&](const std::vector<std::vector<double>>& axes,
                        const std::vector<std::string>& names,
                        auto&& eval) {
        std::int64_t total = 1;
        for (const auto& ax : axes) total *= (std::int64_t)ax.size();
        if (total > grid_cap)
            throw DomainViolation("grid has " + std::to_string(total) + " points, cap is " +
                                  std::to_string(grid_cap));
        rep.rows.resize((std::size_t)total);
        parallel_rows((std::size_t)total, threads, [&](std::size_t idx) {
            std::int64_t rest = (std::int64_t)idx;
            std::vector<double> vals(axes.size());
            for (std::size_t ai = axes.size(); ai-- > 0;) {
                vals[ai] = axes[ai][(std::size_t)(rest % (std::int64_t)axes[ai].size())];
                rest /= (std::int64_t)axes[ai].size();
            }
            Row& row = rep.rows[idx];
            row.inputs.emplace_back("x", x);
            for (std::size_t ai = 0; ai < names.size(); ++ai)
                row.inputs.emplace_back(names[ai], vals[ai]);
            row.method = "inversion";
            const double t0 = now_ms();
            try {
                row.value = eval(vals);
            } catch (const NumericalFailure& e) {
                row.status = e.variant();
                numerical_failure = true;
            }
            row.elapsed_ms = now_ms() - t0;
        });
    };

    if (product == "parisian-digital") {
        auto ys = grids.get("y", true);
        auto Ks = parse_grid(K_s.empty() ? throw DomainViolation("missing required --K") : K_s,
                             "K");
        auto Ts = parse_grid(T_s.empty() ? "1" : T_s, "T");
        for (double yv : ys) need_positive(yv, "y");
        for (double tv : Ts) need_positive(tv, "T");
        if (rate < 0.0) throw DomainViolation("r must be nonnegative");
        run_grid({ys, Ts, Ks}, {"y", "T", "K"}, [&](const std::vector<double>& v) {
            PricingSpec spec;
            spec.barrier = v[0];
            spec.maturity = v[1];
            spec.strike = v[2];
            spec.rate = rate;
            return parisian_digital_price(model, x, spec);
        });
    } else if (product == "alpha-quantile") {
        auto alphas = parse_grid(alpha_s.empty() ? "1" : alpha_s, "alpha");
        auto Ts = parse_grid(T_s.empty() ? "1" : T_s, "T");
        need_positive(cap, "cap");
        if (rate < 0.0) throw DomainViolation("r must be nonnegative");
        run_grid({alphas, Ts}, {"alpha", "T"}, [&](const std::vector<double>& v) {
            PricingSpec spec;
            spec.alpha = v[0];
            spec.maturity = v[1];
            spec.rate = rate;
            spec.cap = cap;
            const double c = cap;
            spec.payoff = [c](double u) { return std::min(u, c); };
            spec.payoff_deriv = [c](double u) { return u < c ? 1.0 : 0.0; };
            return alpha_quantile_price(model, x, spec, tol);
        });
    } else if (product == "default-digital") {
        auto as = grids.get("a", true);
        for (double av : as) need_positive(av, "a");
        HazardSpec hz;
        hz.rate = haz_rate;
        hz.level = haz_level;
        if (hazard_kind == "constant-rate") hz.variant = HazardSpec::Variant::constant_rate;
        else if (hazard_kind == "drawdown-corridor")
            hz.variant = HazardSpec::Variant::drawdown_corridor;
        else if (hazard_kind == "below-start") hz.variant = HazardSpec::Variant::below_start;
        else if (hazard_kind == "drawup-deficit") hz.variant = HazardSpec::Variant::drawup_deficit;
        else throw DomainViolation("unknown --hazard '" + hazard_kind + "'");
        run_grid({as}, {"a"}, [&](const std::vector<double>& v) {
            return default_before_drawdown(model, x, hz, v[0]);
        });
        for (auto& row : rep.rows) row.method = "quadrature";
    } else {
        throw DomainViolation("unknown product '" + product +
                              "'; available: parisian-digital alpha-quantile default-digital");
    }
    rep.summary.emplace_back("rows", std::to_string(rep.rows.size()));
    rep.summary.emplace_back("status", numerical_failure ? "numerical-failure" : "ok");
    emit(rep, format, output);
    return numerical_failure ? 3 : 0;
}

// ------------------------------------------------------------- simulate ---

Functional::Kind functional_kind(const std::string& id) {
    static const std::map<std::string, Functional::Kind> m = {
        {"dd-transform", Functional::Kind::dd_transform},
        {"du-transform", Functional::Kind::du_transform},
        {"dd-cdf", Functional::Kind::dd_cdf},
        {"dd-before-du", Functional::Kind::dd_before_du},
        {"du-before-dd", Functional::Kind::du_before_dd},
        {"exp-before-both", Functional::Kind::exp_before_both},
        {"occ-exit-up", Functional::Kind::occ_below_exit_up},
        {"occ-exit-down", Functional::Kind::occ_below_exit_down},
        {"occ-below-until-up", Functional::Kind::occ_below_until_up},
        {"occ-below-start", Functional::Kind::occ_below_start_dd},
        {"occ-dd-above", Functional::Kind::occ_dd_above_dd},
        {"occ-du-below", Functional::Kind::occ_du_below_dd},
        {"occ-dd-above-exp", Functional::Kind::occ_dd_above_exp},
        {"parisian-indicator", Functional::Kind::parisian_indicator},
        {"mean-mdd", Functional::Kind::mean_mdd_capped},
        {"quantile", Functional::Kind::quantile_capped},
    };
    auto it = m.find(id);
    if (it == m.end()) {
        std::string known;
        for (const auto& kv : m) known += kv.first + " ";
        throw DomainViolation("unknown functional '" + id + "'; available: " + known);
    }
    return it->second;
}

int run_simulate(const std::string& func_id, const ModelOpts& mopts, const Functional& f,
                 const SimConfig& cfg, const std::string& format, const std::string& output) {
    const DiffusionModel model = mopts.build();
    Report rep;
    rep.subcommand = "simulate";
    rep.target = func_id;
    rep.model = mopts.describe();
    Row row;
    row.inputs = {{"x", cfg.start(model)}, {"q", f.q},      {"p", f.p},
                  {"a", f.a},              {"b", f.b},      {"y", f.y},
                  {"K", f.strike},         {"alpha", f.alpha}};
    row.method = "mc";
    const double t0 = now_ms();
    int code = 0;
    try {
        const SimEstimate est = estimate_law(model, f, cfg);
        row.value = est.estimate;
        row.error = est.standard_error;
        row.extras = {{"n_effective", (double)est.n_effective},
                      {"richardson", est.richardson},
                      {"censored_fraction", est.censored_fraction}};
    } catch (const NumericalFailure& e) {
        row.status = e.variant();
        code = 3;
    }
    row.elapsed_ms = now_ms() - t0;
    rep.rows.push_back(std::move(row));
    rep.summary.emplace_back("status", code == 0 ? "ok" : "numerical-failure");
    emit(rep, format, output);
    return code;
}

// --------------------------------------------------------------- verify ---

int run_verify(const std::string& suite, const ModelOpts& mopts, const GridFlags& grids,
               int cases, std::uint64_t seed, double tol, const std::string& format,
               const std::string& output, int threads) {
    const DiffusionModel model = mopts.build();
    Report rep;
    rep.subcommand = "verify";
    rep.target = suite;
    rep.model = mopts.describe();

    auto add_row = [&](const std::string& label,
                       std::initializer_list<std::pair<std::string, double>> inputs, double value,
                       double err, double lim, const std::string& method) {
        Row r;
        r.label = label;
        r.inputs = inputs;
        r.value = value;
        r.error = err;
        r.method = method;
        r.status = err <= lim ? "pass" : "fail";
        rep.rows.push_back(std::move(r));
    };

    if (suite == "identity-in-law") {
        // occupation of the drawdown above y until sigma_a has the same law
        // as a drawdown time to a-y; compare transforms on the q grid
        const auto qs = grids.get("q", true);
        const auto as = grids.get("a", true);
        const auto ys = grids.get("y", true);
        const double x = grids.get("x", false, model.kappa)[0];
        const double lim = tol > 0 ? tol : 1e-6;
        for (double a : as)
            for (double y : ys) {
                if (!(y > 0.0 && y < a)) throw DomainViolation("need 0 < y < a");
                for (double q : qs) {
                    const double t0 = now_ms();
                    const double lhs = occ_dd_above_until_dd(model, q, x, y, a).value;
                    const double rhs = drawdown_transform(model, q, x, a - y).value;
                    const double rel = std::abs(lhs - rhs) / std::abs(rhs);
                    add_row("occ-dd-above-vs-fresh-dd", {{"x", x}, {"q", q}, {"a", a}, {"y", y}},
                            lhs, rel, lim, "quadrature");
                    rep.rows.back().elapsed_ms = now_ms() - t0;
                }
            }
    } else if (suite == "kernel-laws") {
        // randomized kernel identities: antisymmetry, the diagonal derivative
        // identity, the q -> 0 limit, and Wronskian constancy
        rng::Xoshiro256pp gen(seed, 0, 0);
        const double lo = model.kappa - 1.5, hi = model.kappa + 1.5;
        const bool bounded = std::isfinite(model.left_boundary);
        auto draw_x = [&]() {
            double v = lo + (hi - lo) * gen.uniform();
            if (bounded && v <= model.left_boundary + 0.05) v = model.left_boundary + 0.05;
            return v;
        };
        auto pointwise_wronskian = [](const QKernel& k, double x) {
            return (k.phi_plus_deriv(x) * k.phi_minus(x) -
                    k.phi_minus_deriv(x) * k.phi_plus(x)) / k.s_deriv(x);
        };
        double e_anti = 0, e_diag = 0, e_q0 = 0, e_wron = 0;
        const QKernel k0(model, 1e-9);
        for (int c = 0; c < cases; ++c) {
            const double q = 0.05 * std::pow(100.0, gen.uniform());  // 0.05 .. 5
            const double xa = draw_x(), xb = draw_x();
            const QKernel k(model, q);
            const double wxy = k.w(xa, xb), wyx = k.w(xb, xa);
            e_anti = std::max(e_anti,
                              std::abs(wxy + wyx) / std::max(1e-300, std::abs(wxy)));
            const double sd = k.s_deriv(xa);
            e_diag = std::max(e_diag, std::abs(k.w1(xa, xa) - sd) / std::abs(sd));
            const double w0 = k0.w(xa, xb);
            const double s0 = k0.s(xa) - k0.s(xb);
            if (std::abs(s0) > 1e-6)
                e_q0 = std::max(e_q0, std::abs(w0 - s0) / std::abs(s0));
            e_wron = std::max(e_wron, std::abs(pointwise_wronskian(k, xa) - k.wronskian()) /
                                          k.wronskian());
        }
        auto prop_row = [&](const char* name, double worst, double lim) {
            add_row(name, {{"cases", (double)cases}}, worst, worst, lim, "closed-form");
        };
        prop_row("antisymmetry", e_anti, 1e-12);
        prop_row("diagonal-derivative", e_diag, 1e-9);
        prop_row("q-to-zero-limit", e_q0, 1e-5);
        prop_row("wronskian-constant", e_wron, 1e-7);
    } else if (suite == "closed-vs-quadrature") {
        const auto qs = grids.q.empty() ? std::vector<double>{0.1, 0.5, 1.0, 2.0, 5.0}
                                        : parse_grid(grids.q, "q");
        const double lim = tol > 0 ? tol : 1e-6;
        if (mopts.kind == "bm") {
            const BrownianParams bp{mopts.mu, mopts.sigma};
            for (double q : qs)
                for (double a : {0.5, 1.0, 2.0}) {
                    const double t0 = now_ms();
                    const double gen = drawdown_transform(model, q, 0.0, a).value;
                    const double cf = bm_drawdown_lt(bp, q, a);
                    add_row("dd-transform", {{"q", q}, {"a", a}, {"b", a}}, gen,
                            std::abs(gen - cf) / cf, lim, "quadrature");
                    rep.rows.back().elapsed_ms = now_ms() - t0;
                    const double genu = drawup_transform(model, q, 0.0, a).value;
                    const double cfu = bm_drawup_lt(bp, q, a);
                    add_row("du-transform", {{"q", q}, {"a", a}, {"b", a}}, genu,
                            std::abs(genu - cfu) / cfu, lim, "quadrature");
                    const double geno = dd_before_du(model, q, 0.0, a, a).probability.value;
                    const double cfo = bm_prob_dd_before_du(bp, q, a, a).dd_before_du;
                    add_row("dd-before-du", {{"q", q}, {"a", a}, {"b", a}}, geno,
                            std::abs(geno - cfo) / cfo, lim, "quadrature");
                }
        } else if (mopts.kind == "bes3") {
            for (double q : qs)
                for (double x : {1.5, 2.0, 4.0})
                    for (double a : {0.5, 1.0}) {
                        const double t0 = now_ms();
                        const double gen = drawdown_transform(model, q, x, a).value;
                        const double cf = bes3_drawdown_lt(x, q, a);
                        add_row("dd-transform", {{"q", q}, {"x", x}, {"a", a}}, gen,
                                std::abs(gen - cf) / cf, lim, "quadrature");
                        rep.rows.back().elapsed_ms = now_ms() - t0;
                    }
        } else {
            throw DomainViolation("closed-vs-quadrature supports --model bm or bes3");
        }
    } else {
        throw DomainViolation("unknown suite '" + suite +
                              "'; available: identity-in-law kernel-laws closed-vs-quadrature");
    }

    (void)threads;
    int failures = 0;
    for (const auto& r : rep.rows)
        if (r.status == "fail") ++failures;
    rep.summary.emplace_back("comparisons", std::to_string(rep.rows.size()));
    rep.summary.emplace_back("failures", std::to_string(failures));
    rep.summary.emplace_back("overall", failures == 0 ? "PASS" : "FAIL");
    emit(rep, format, output);
    return failures == 0 ? 0 : 1;
}

// ------------------------------------------------------------ config file --

// JSON config mirrors long flags: {"model": "bm", "q": "0.5,1", "n": 100000}.
// Values already present on the command line win.
std::vector<std::string> inject_config(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;
    std::ifstream in(config_path);
    if (!in) throw DomainViolation("cannot read config file '" + config_path + "'");
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw DomainViolation("config file parse error: " + std::string(e.what()));
    }
    if (!cfg.is_object()) throw DomainViolation("config file must hold a JSON object");
    auto have_flag = [&](const std::string& name) {
        const std::string f = "--" + name;
        for (const auto& a : args)
            if (a == f || a.rfind(f + "=", 0) == 0) return true;
        return false;
    };
    for (const auto& [key, val] : cfg.items()) {
        if (key == "config" || have_flag(key)) continue;
        if (val.is_boolean()) {
            if (val.get<bool>()) args.push_back("--" + key);
            continue;
        }
        std::string sv;
        if (val.is_string()) sv = val.get<std::string>();
        else if (val.is_number_integer()) sv = std::to_string(val.get<std::int64_t>());
        else if (val.is_number()) sv = fmt17(val.get<double>());
        else if (val.is_array()) {
            for (const auto& el : val) {
                if (!sv.empty()) sv += ",";
                sv += el.is_string() ? el.get<std::string>() : fmt17(el.get<double>());
            }
        } else {
            throw DomainViolation("config key '" + key + "' has an unsupported value type");
        }
        args.push_back("--" + key + "=" + sv);
    }
    return args;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"drawdown-lab: drawdown, drawup and occupation-time laws for 1d diffusions"};
    app.require_subcommand(1);

    std::string format = "table", output, config_file;
    int threads = 1;
    std::int64_t grid_cap = 100000;
    double tol = 1e-10;
    app.add_option("--config", config_file, "JSON config file mirroring flags (flags win)");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--format", format, "table | csv | json")
            ->check(CLI::IsMember({"table", "csv", "json"}));
        cmd->add_option("--output", output, "write to file instead of stdout");
        cmd->add_option("--threads", threads, "worker threads")->envname("DDLAB_THREADS");
        cmd->add_option("--grid-cap", grid_cap, "maximum grid evaluations");
        cmd->add_option("--tol", tol, "quadrature / comparison tolerance");
        cmd->add_option("--config", config_file, "JSON config file mirroring flags (flags win)");
    };

    // law
    auto* law = app.add_subcommand("law", "evaluate an analytic law on a parameter grid");
    std::string law_id;
    law->add_option("id", law_id, "law identifier (kebab-case)")->required();
    ModelOpts law_model;
    law_model.add_flags(law);
    GridFlags law_grids;
    law_grids.add_flags(law);
    add_common(law);

    // price
    auto* price = app.add_subcommand("price", "price drawdown products");
    std::string product, K_s, T_s, alpha_s, hazard_kind = "constant-rate";
    double rate = 0.0, cap = std::numeric_limits<double>::infinity();
    double haz_rate = 0.0, haz_level = 0.0;
    price->add_option("product", product, "parisian-digital | alpha-quantile | default-digital")
        ->required();
    ModelOpts price_model;
    price_model.add_flags(price);
    GridFlags price_grids;
    price_grids.add_flags(price);
    price->add_option("--K", K_s, "occupation strike grid (time units)");
    price->add_option("--T", T_s, "maturity grid");
    price->add_option("--alpha", alpha_s, "quantile level grid");
    price->add_option("--r", rate, "discount rate");
    price->add_option("--cap", cap, "payoff cap (capped linear payoff)");
    price->add_option("--hazard", hazard_kind,
                      "constant-rate | drawdown-corridor | below-start | drawup-deficit");
    price->add_option("--rate", haz_rate, "hazard rate");
    price->add_option("--level", haz_level, "hazard level");
    add_common(price);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo estimate of a path functional");
    std::string func_id, scheme_s = "euler";
    Functional func;
    SimConfig scfg;
    sim->add_option("functional", func_id, "functional identifier (kebab-case)")->required();
    ModelOpts sim_model;
    sim_model.add_flags(sim);
    sim->add_option("--x", scfg.x_start, "start point (default: model kappa)");
    sim->add_option("--q", func.q, "rate q");
    sim->add_option("--p", func.p, "rate p");
    sim->add_option("--a", func.a, "drawdown threshold");
    sim->add_option("--b", func.b, "drawup threshold / upper barrier");
    sim->add_option("--y", func.y, "occupation level");
    sim->add_option("--K", func.strike, "parisian occupation strike");
    sim->add_option("--alpha", func.alpha, "quantile level");
    sim->add_option("--cap", func.cap, "sample cap for mdd / quantile means");
    sim->add_option("--dt", scfg.dt, "time step");
    sim->add_option("--horizon", scfg.horizon, "simulation horizon");
    sim->add_option("--n", scfg.n, "number of paths");
    sim->add_option("--seed", scfg.seed, "RNG seed");
    sim->add_option("--scheme", scheme_s, "euler | exact-gaussian | exact-norm3d")
        ->check(CLI::IsMember({"euler", "exact-gaussian", "exact-norm3d"}));
    sim->add_flag("--bridge", scfg.bridge_correction, "bridge corrections for extremes/crossings");
    sim->add_flag("--antithetic", scfg.antithetic, "antithetic pairs");
    bool no_richardson = false;
    sim->add_flag("--no-richardson", no_richardson, "skip the coupled dt/2 diagnostic");
    sim->add_option("--sim-threads", scfg.threads, "simulation worker threads")
        ->envname("DDLAB_THREADS");
    add_common(sim);

    // verify
    auto* verify = app.add_subcommand("verify", "analytic self-checks and cross-validation");
    std::string suite;
    int cases = 1000;
    std::uint64_t vseed = 20240814ULL;
    verify->add_option("suite", suite,
                       "identity-in-law | kernel-laws | closed-vs-quadrature")
        ->required();
    ModelOpts verify_model;
    verify_model.add_flags(verify);
    GridFlags verify_grids;
    verify_grids.add_flags(verify);
    verify->add_option("--cases", cases, "random cases for kernel-laws");
    verify->add_option("--seed", vseed, "RNG seed");
    add_common(verify);

    // tolerate shared flag objects across subcommands: CLI11 parses only the
    // chosen subcommand, so the collisions are never ambiguous
    std::vector<std::string> args;
    try {
        args = inject_config(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    // verify defaults tol to per-suite limits rather than quadrature tol
    const bool tol_given = law->count("--tol") || price->count("--tol") ||
                           verify->count("--tol") || sim->count("--tol");

    try {
        if (app.got_subcommand(law))
            return run_law(law_id, law_model, law_grids, tol, grid_cap, threads, format, output);
        if (app.got_subcommand(price))
            return run_price(product, price_model, price_grids, K_s, T_s, alpha_s, rate, cap,
                             tol_given ? tol : 5e-4, hazard_kind, haz_rate, haz_level, grid_cap,
                             threads, format, output);
        if (app.got_subcommand(sim)) {
            if (scheme_s == "exact-gaussian") scfg.scheme = Scheme::exact_gaussian;
            else if (scheme_s == "exact-norm3d") scfg.scheme = Scheme::exact_norm3d;
            else scfg.scheme = Scheme::euler;
            scfg.richardson = !no_richardson;
            func.kind = functional_kind(func_id);
            return run_simulate(func_id, sim_model, func, scfg, format, output);
        }
        if (app.got_subcommand(verify))
            return run_verify(suite, verify_model, verify_grids, cases, vseed,
                              tol_given ? tol : 0.0, format, output, threads);
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure (" << e.variant() << "): " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
