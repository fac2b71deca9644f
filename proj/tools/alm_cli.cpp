// Batch front end: curves, build, price, mc, calibrate, correlations.
#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#include "alm/analytics.hpp"
#include "alm/io.hpp"
#include "alm/montecarlo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace alm;

namespace {

struct Globals {
    fs::path config;
    fs::path out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

struct Ctx {
    json cfg;
    fs::path base;
    Globals g;
};

std::string error_name(const std::exception& e) {
#define ALM_NAME(T) \
    if (dynamic_cast<const T*>(&e)) return #T;
    ALM_NAME(DomainError) ALM_NAME(FitError) ALM_NAME(OrderingError) ALM_NAME(ConsistencyError)
    ALM_NAME(IndexError) ALM_NAME(AlignmentError) ALM_NAME(IntegrationError) ALM_NAME(BoundaryError)
    ALM_NAME(BoundsError) ALM_NAME(LayoutError) ALM_NAME(SpreadSignError)
    ALM_NAME(UnsupportedDriverError) ALM_NAME(DegenerateError) ALM_NAME(CalibrationError)
    ALM_NAME(ConfigError) ALM_NAME(ParseError)
#undef ALM_NAME
    return "Error";
}

const json& need(const json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing config key '") + key + "'");
    return j.at(key);
}

// A config value that is either inline JSON or a path to a JSON file.
json inline_or_file(const Ctx& c, const json& v) {
    if (v.is_string()) return read_json(c.base / v.get<std::string>());
    return v;
}

CurveSet load_curves(const Ctx& c) { return curves_from_config(inline_or_file(c, need(c.cfg, "curves")), c.base); }

ProcessSpec load_spec(const Ctx& c) { return process_from_json(inline_or_file(c, need(c.cfg, "spec"))); }

FactorLayout load_layout(const Ctx& c, const CurveSet& curves) {
    const json& l = need(c.cfg, "layout");
    std::map<std::string, double> vt;
    for (auto it = need(l, "v_tilde").begin(); it != l.at("v_tilde").end(); ++it) vt[it.key()] = it.value().get<double>();
    return build_factor_layout(need(l, "maturities").get<int>(), curves, need(l, "u_c").get<double>(), vt);
}

FitOptions load_fit(const Ctx& c) {
    FitOptions o;
    o.enforce_ordering = c.cfg.value("enforce_ordering", true);
    const std::string mode = c.cfg.value("mode", "positive-rates");
    if (mode == "negative-rates") o.mode = RateMode::negative;
    else if (mode != "positive-rates") throw ConfigError("mode must be positive-rates or negative-rates");
    return o;
}

ModelParams build_from_config(const Ctx& c) {
    const CurveSet curves = load_curves(c);
    const ProcessSpec spec = load_spec(c);
    const FitOptions fo = load_fit(c);
    if (fo.mode == RateMode::negative) {
        NegativeRateConfig nc;
        if (c.cfg.contains("negative_rates")) nc.u_second = c.cfg.at("negative_rates").value("u_second", 0.0);
        return build_negative_rate_model(spec, curves, nc);
    }
    return build_model(spec, curves, load_layout(c, curves), fo);
}

ModelParams load_model(const Ctx& c) {
    if (c.cfg.contains("model")) return model_from_json(inline_or_file(c, c.cfg.at("model")));
    return build_from_config(c);
}

QuadConfig load_quad(const Ctx& c) {
    QuadConfig q;
    if (!c.cfg.contains("quadrature")) return q;
    const json& j = c.cfg.at("quadrature");
    q.abs_tol = j.value("abs_tol", q.abs_tol);
    q.rel_tol = j.value("rel_tol", q.rel_tol);
    q.max_panels = j.value("max_panels", q.max_panels);
    q.max_depth = j.value("max_depth", q.max_depth);
    return q;
}

SimConfig load_sim(const Ctx& c) {
    SimConfig s;
    if (c.cfg.contains("mc")) {
        const json& j = c.cfg.at("mc");
        s.paths = j.value("paths", s.paths);
        s.steps_per_year = j.value("steps_per_year", s.steps_per_year);
        s.seed = j.value("seed", s.seed);
        const std::string scheme = j.value("scheme", "exact");
        if (scheme == "euler") s.scheme = Scheme::euler_truncated;
        else if (scheme != "exact") throw ConfigError("mc.scheme must be exact or euler");
    }
    if (c.g.seed) s.seed = *c.g.seed;
    if (c.g.threads) s.threads = *c.g.threads;
    return s;
}

BoundaryOptions boundary_options(const json& ins, const Ctx& c) {
    BoundaryOptions o;
    o.designated = ins.value("designated", o.designated);
    o.solved = ins.value("solved", o.solved);
    o.normalize = ins.value("normalize", o.normalize);
    o.q_lo = ins.value("q_lo", o.q_lo);
    o.q_hi = ins.value("q_hi", o.q_hi);
    if (c.g.seed) o.seed = *c.g.seed;
    return o;
}

BoundaryMethod boundary_method(const json& ins) {
    const std::string m = ins.value("boundary", "quantile2d");
    if (m == "quantile2d") return BoundaryMethod::quantile2d;
    if (m == "regression") return BoundaryMethod::regression;
    throw ConfigError("boundary must be quantile2d or regression");
}

CapletSpec caplet_of(const json& j) {
    CapletSpec s{need(j, "tenor").get<std::string>(), need(j, "k").get<int>(), need(j, "strike").get<double>(), {}};
    if (j.contains("damping")) s.damping = j.at("damping").get<double>();
    return s;
}

SwaptionSpec swaption_of(const json& j) {
    return {need(j, "tenor").get<std::string>(), need(j, "p").get<int>(), need(j, "q").get<int>(),
            need(j, "strike").get<double>()};
}

BasisSwaptionSpec basis_of(const json& j) {
    BasisLegs l{need(j, "x1").get<std::string>(), need(j, "x2").get<std::string>(), need(j, "p1").get<int>(),
                need(j, "q1").get<int>(), need(j, "p2").get<int>(), need(j, "q2").get<int>()};
    return {l, need(j, "spread").get<double>()};
}

json boundary_json(const BoundaryCoeffs& b) {
    const char* regime = b.regime == ExerciseRegime::boundary ? "boundary"
                         : b.regime == ExerciseRegime::always ? "always" : "never";
    std::vector<double> d(b.direction.data(), b.direction.data() + b.direction.size());
    return {{"intercept", b.intercept}, {"direction", d}, {"regime", regime}};
}

json price_one(const ModelParams& m, const json& ins, const Ctx& c, const QuadConfig& q) {
    const std::string type = need(ins, "type").get<std::string>();
    json r{{"instrument", type}, {"params", ins}, {"implied_vol", nullptr}, {"boundary", nullptr}};
    if (type == "caplet") {
        const CapletSpec s = caplet_of(ins);
        const double p = caplet_price(m, s, q);
        r["price_bp"] = 1e4 * p;
        const TenorGrid& g = m.grid(s.tenor);
        try {
            r["implied_vol"] = black76_implied_vol(p, libor_rate(m, s.tenor, s.k, 0.0, m.spec.x0()), s.strike,
                                                   g.date(s.k - 1), g.delta * m.discount(s.tenor, s.k));
        } catch (const BoundsError&) {
        }
    } else if (type == "swaption") {
        const SwaptionSpec s = swaption_of(ins);
        const auto b = boundary_or_regime(m, swaption_exercise_fn(m, s), boundary_method(ins), boundary_options(ins, c));
        const double p = swaption_price_approx(m, s, b, q);
        r["price_bp"] = 1e4 * p;
        r["boundary"] = boundary_json(b);
        try {
            r["implied_vol"] = black76_implied_vol(p, model_swap_rate(m, s.tenor, s.p, s.q), s.strike,
                                                   m.grid(s.tenor).date(s.p), model_annuity(m, s.tenor, s.p, s.q));
        } catch (const BoundsError&) {
        }
    } else if (type == "basis_swaption") {
        const BasisSwaptionSpec s = basis_of(ins);
        BoundaryOptions o = boundary_options(ins, c);
        if (!ins.contains("normalize")) o.normalize = 0;
        const auto b = boundary_or_regime(m, basis_exercise_fn(m, s), boundary_method(ins), o);
        r["price_bp"] = 1e4 * basis_swaption_price_approx(m, s, b, q);
        r["boundary"] = boundary_json(b);
    } else {
        throw ConfigError("unknown instrument type '" + type + "'");
    }
    return r;
}

std::string csv_cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    return v.is_string() ? v.get<std::string>() : v.dump();
}

int cmd_curves(const Ctx& c) {
    const CurveSet cs = load_curves(c);
    write_json(c.g.out / "curves.json", to_json(cs));
    std::cout << "curves: " << cs.fine_count() << " fine dates, terminal " << cs.terminal() << "\n";
    return 0;
}

int cmd_build(const Ctx& c) {
    const ModelParams m = build_from_config(c);
    write_json(c.g.out / "model.json", to_json(m));
    std::cout << format_uv_table(m, c.cfg.value("table_column", 1));
    const ModelReport rep = validate_model(m);
    for (const std::string& n : rep.notes) std::cout << "note: " << n << "\n";
    return 0;
}

int cmd_price(const Ctx& c) {
    const ModelParams m = load_model(c);
    const QuadConfig q = load_quad(c);
    json out = json::array();
    bool failed = false;
    for (const json& ins : c.cfg.value("instruments", json::array())) {
        try {
            out.push_back(price_one(m, ins, c, q));
        } catch (const InputError&) {
            throw;
        } catch (const Error& e) {
            failed = true;
            out.push_back({{"instrument", ins.value("type", "")}, {"params", ins},
                           {"error", {{"type", error_name(e)}, {"message", e.what()}}}});
        }
    }
    write_json(c.g.out / "prices.json", out);
    std::ostringstream csv;
    csv << "instrument,price_bp,implied_vol,error\n";
    for (const json& r : out)
        csv << r.at("instrument").get<std::string>() << ',' << csv_cell(r.value("price_bp", json()))
            << ',' << csv_cell(r.value("implied_vol", json())) << ','
            << (r.contains("error") ? r["error"]["type"].get<std::string>() : "") << '\n';
    write_text(c.g.out / "prices.csv", csv.str());
    std::cout << out.size() << " instruments priced" << (failed ? " (with errors)" : "") << "\n";
    return failed ? 1 : 0;
}

json estimate_json(const McEstimate& e, const char* prefix) {
    const std::string p(prefix);
    json j;
    j[p + "mean_bp"] = 1e4 * e.mean;
    j[p + "std_error_bp"] = std::isfinite(e.std_error) ? json(1e4 * e.std_error) : json(nullptr);
    return j;
}

int cmd_mc(const Ctx& c) {
    const ModelParams m = load_model(c);
    const SimConfig sim = load_sim(c);
    const QuadConfig q = load_quad(c);
    json out = json::array();
    for (const json& ins : c.cfg.value("instruments", json::array())) {
        const std::string type = need(ins, "type").get<std::string>();
        json r{{"instrument", type}, {"params", ins}, {"paths", sim.paths}, {"seed", sim.seed}};
        if (type == "caplet") {
            const CapletSpec s = caplet_of(ins);
            r.update(estimate_json(mc_caplet(m, s, sim), ""));
            r["analytic_bp"] = 1e4 * caplet_price(m, s, q);
        } else if (type == "swaption" || type == "basis_swaption") {
            BoundaryStudy st;
            BoundaryCoeffs b;
            double approx = 0.0;
            if (type == "swaption") {
                const SwaptionSpec s = swaption_of(ins);
                b = boundary_or_regime(m, swaption_exercise_fn(m, s), boundary_method(ins), boundary_options(ins, c));
                st = mc_swaption_study(m, s, b, sim);
                approx = swaption_price_approx(m, s, b, q);
            } else {
                const BasisSwaptionSpec s = basis_of(ins);
                BoundaryOptions o = boundary_options(ins, c);
                if (!ins.contains("normalize")) o.normalize = 0;
                b = boundary_or_regime(m, basis_exercise_fn(m, s), boundary_method(ins), o);
                st = mc_basis_swaption_study(m, s, b, sim);
                approx = basis_swaption_price_approx(m, s, b, q);
            }
            r.update(estimate_json(st.true_boundary, ""));
            r.update(estimate_json(st.linear_boundary, "linear_"));
            r.update(estimate_json(st.difference, "difference_"));
            r["analytic_bp"] = 1e4 * approx;
            r["boundary"] = boundary_json(b);
        } else {
            throw ConfigError("unknown instrument type '" + type + "'");
        }
        r["std_error_defined"] = sim.paths >= 2;
        out.push_back(r);
    }
    write_json(c.g.out / "mc.json", out);
    const json& mj = c.cfg.value("mc", json::object());
    if (mj.value("dump_paths", 0) > 0) {
        SimConfig d = sim;
        d.paths = mj.at("dump_paths").get<long>();
        std::vector<double> dates = mj.value("dump_dates", std::vector<double>{m.terminal});
        const auto paths = simulate(m.spec, d, dates);
        std::ostringstream csv;
        csv.precision(17);
        csv << "path,date,factor,value\n";
        for (std::size_t p = 0; p < paths.size(); ++p)
            for (std::size_t t = 0; t < dates.size(); ++t)
                for (int i = 0; i < m.dim(); ++i) csv << p << ',' << dates[t] << ',' << i << ',' << paths[p][t](i) << '\n';
        write_text(c.g.out / "paths.csv", csv.str());
    }
    std::cout << out.size() << " Monte Carlo studies written\n";
    return 0;
}

int cmd_calibrate(const Ctx& c) {
    const CurveSet curves = load_curves(c);
    const ProcessSpec spec = load_spec(c);
    const FactorLayout layout = load_layout(c, curves);
    const CapletSurface surface = read_surface_csv(c.base / need(c.cfg, "surface").get<std::string>());
    CalibrationOptions o;
    o.fit = load_fit(c);
    o.quad = load_quad(c);
    o.strict = false;
    if (c.cfg.contains("calibration")) {
        const json& j = c.cfg.at("calibration");
        o.target_rms = j.value("target_rms", o.target_rms);
        o.max_iterations = j.value("max_iterations", o.max_iterations);
        o.restarts = j.value("restarts", o.restarts);
    }
    const CalibrationResult r = calibrate_sequential(surface, layout, spec, curves, o);
    write_json(c.g.out / "model.json", to_json(r.model));
    write_json(c.g.out / "calibration_report.json", to_json(r));
    for (const MaturityFit& f : r.fits) std::cout << "maturity " << f.maturity << " rms " << f.rms << "\n";
    if (!r.converged) {
        std::cerr << "error: CalibrationError: target RMS not reached\n";
        return 1;
    }
    return 0;
}

int cmd_correlations(const Ctx& c) {
    const ModelParams m = load_model(c);
    const json& j = need(c.cfg, "correlations");
    const double date = need(j, "date").get<double>();
    std::vector<RateIndex> rates;
    for (const json& r : need(j, "rates")) rates.push_back({r.at(0).get<std::string>(), r.at(1).get<int>()});
    std::ostringstream csv;
    csv.precision(17);
    csv << "rate";
    for (const RateIndex& r : rates) csv << ',' << r.tenor << ':' << r.k;
    csv << '\n';
    for (const RateIndex& a : rates) {
        csv << a.tenor << ':' << a.k;
        for (const RateIndex& b : rates) csv << ',' << terminal_correlation(m, a, b, date).value;
        csv << '\n';
    }
    write_text(c.g.out / "correlations.csv", csv.str());
    std::cout << rates.size() << "x" << rates.size() << " correlation matrix written\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiple-curve affine LIBOR model toolkit"};
    Globals g;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", g.config, "JSON configuration file");
    app.add_option("--out", g.out, "output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Monte Carlo seed override");
    auto* thr_opt = app.add_option("--threads", threads, "worker thread cap")->check(CLI::NonNegativeNumber);
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, int (*)(const Ctx&)>> cmds = {
        {"curves", cmd_curves}, {"build", cmd_build},         {"price", cmd_price},
        {"mc", cmd_mc},         {"calibrate", cmd_calibrate}, {"correlations", cmd_correlations}};
    for (const auto& [name, fn] : cmds) app.add_subcommand(name, "run " + name);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed;
    if (*thr_opt) g.threads = threads;
    try {
        if (g.config.empty()) throw ConfigError("--config is required");
        Ctx c{read_json(g.config), g.config.parent_path(), g};
        for (const auto& [name, fn] : cmds)
            if (app.got_subcommand(name)) return fn(c);
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << error_name(e) << ": " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: ConfigError: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << error_name(e) << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
