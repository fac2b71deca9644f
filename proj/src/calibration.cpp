#include "alm/calibration.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

namespace alm {

namespace {

constexpr double kPenalty = 1.0;  // IV error charged for a quote the model cannot price
constexpr int kParams = 6;

double to_box(double y, const ParamBounds& b) { return b.lo + (b.hi - b.lo) / (1.0 + std::exp(-y)); }

double from_box(double x, const ParamBounds& b) {
    const double w = b.hi - b.lo;
    const double s = std::clamp((x - b.lo) / w, 1e-6, 1.0 - 1e-6);
    return std::log(s / (1.0 - s));
}

std::array<ParamBounds, kParams> bounds_of(const CalibrationOptions& o) {
    return {o.x0, o.lambda, o.theta, o.eta, o.nu, o.mu};
}

FactorSpec decode(const double* y, const std::array<ParamBounds, kParams>& b) {
    FactorSpec f;
    f.kind = FactorKind::cirj;
    f.x0 = to_box(y[0], b[0]);
    f.lambda = to_box(y[1], b[1]);
    f.theta = to_box(y[2], b[2]);
    f.eta = to_box(y[3], b[3]);
    f.nu = to_box(y[4], b[4]);
    f.mu = to_box(y[5], b[5]);
    return f;
}

std::array<double, kParams> encode(const FactorSpec& f, const std::array<ParamBounds, kParams>& b) {
    return {from_box(f.x0, b[0]),    from_box(f.lambda, b[1]), from_box(f.theta, b[2]),
            from_box(f.eta, b[3]),   from_box(f.nu, b[4]),     from_box(f.mu, b[5])};
}

struct Problem {
    const std::vector<CapletQuote>* quotes;
    const FactorLayout* layout;
    const CurveSet* curves;
    ProcessSpec spec;
    int coord;
    std::array<ParamBounds, kParams> bounds;
    const CalibrationOptions* opts;
    int evaluations = 0;
};

double objective(const gsl_vector* y, void* p) {
    auto* pr = static_cast<Problem*>(p);
    ++pr->evaluations;
    ProcessSpec spec = pr->spec;
    spec.factors[static_cast<std::size_t>(pr->coord)] = decode(y->data, pr->bounds);
    try {
        const ModelParams m = build_model(spec, *pr->curves, *pr->layout, pr->opts->fit);
        return maturity_rms(m, *pr->quotes, pr->opts->quad);
    } catch (const Error&) {
        return kPenalty;
    }
}

// One Nelder-Mead run from y; returns the best point and appends to the trace.
double run_simplex(Problem& pr, std::array<double, kParams>& y, MaturityFit& fit) {
    gsl_multimin_function fn{&objective, kParams, &pr};
    gsl_vector* x = gsl_vector_alloc(kParams);
    gsl_vector* step = gsl_vector_alloc(kParams);
    for (int i = 0; i < kParams; ++i) gsl_vector_set(x, static_cast<std::size_t>(i), y[static_cast<std::size_t>(i)]);
    gsl_vector_set_all(step, pr.opts->simplex_step);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, kParams);
    gsl_multimin_fminimizer_set(s, &fn, x, step);
    for (int it = 0; it < pr.opts->max_iterations; ++it) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        ++fit.iterations;
        fit.trace.push_back(s->fval);
        if (s->fval < 0.2 * pr.opts->target_rms) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), pr.opts->size_tol) == GSL_SUCCESS) break;
    }
    for (int i = 0; i < kParams; ++i) y[static_cast<std::size_t>(i)] = gsl_vector_get(s->x, static_cast<std::size_t>(i));
    const double best = s->fval;
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return best;
}

}  // namespace

std::vector<int> CapletSurface::maturities() const {
    std::set<int> s;
    for (const CapletQuote& q : quotes) s.insert(static_cast<int>(std::lround(q.maturity)));
    return {s.begin(), s.end()};
}

std::vector<CapletQuote> CapletSurface::at(int maturity) const {
    std::vector<CapletQuote> out;
    for (const CapletQuote& q : quotes)
        if (std::lround(q.maturity) == maturity) out.push_back(q);
    return out;
}

void CapletSurface::check() const {
    if (quotes.empty()) throw ConfigError("caplet surface is empty");
    for (const CapletQuote& q : quotes) {
        if (!(q.maturity >= 1.0) || std::abs(q.maturity - std::round(q.maturity)) > 1e-9)
            throw ConfigError("caplet maturities must be whole years >= 1");
        if (!std::isfinite(q.vol) || q.vol < 0.0) throw ConfigError("caplet vols must be finite and >= 0");
        if (!std::isfinite(q.strike)) throw ConfigError("caplet strike must be finite");
    }
}

int caplet_index(const TenorGrid& g, double expiry) {
    const double r = expiry / g.delta;
    const long k = std::lround(r);
    if (std::abs(r - static_cast<double>(k)) > 1e-9 || k < 0 || k + 1 > g.n_points)
        throw IndexError("caplet expiry is not a fixing date of the tenor grid");
    return static_cast<int>(k) + 1;
}

double caplet_implied_vol(const ModelParams& m, const CapletSpec& c, const QuadConfig& q) {
    const TenorGrid& g = m.grid(c.tenor);
    const double price = caplet_price(m, c, q);
    const double fwd = libor_rate(m, c.tenor, c.k, 0.0, m.spec.x0());
    const double annuity = g.delta * m.discount(c.tenor, c.k);
    // Quadrature noise can leave a price just under intrinsic; lift it onto the bound.
    const double intrinsic = annuity * std::max(fwd - c.strike, 0.0);
    const double noise = 100.0 * q.abs_tol;
    const double p = price < intrinsic && price > intrinsic - noise ? intrinsic : price;
    return black76_implied_vol(p, fwd, c.strike, g.date(c.k - 1), annuity);
}

CapletSurface synthetic_surface(const ModelParams& m, const std::vector<std::string>& tenors,
                                const std::vector<int>& maturities,
                                const std::vector<double>& strike_multiples, const QuadConfig& q) {
    CapletSurface s;
    for (int mat : maturities)
        for (const std::string& x : tenors) {
            const int k = caplet_index(m.grid(x), mat);
            const double fwd = libor_rate(m, x, k, 0.0, m.spec.x0());
            for (double mult : strike_multiples) {
                const CapletSpec c{x, k, mult * fwd, {}};
                s.quotes.push_back({x, static_cast<double>(mat), c.strike, caplet_implied_vol(m, c, q)});
            }
        }
    return s;
}

double maturity_rms(const ModelParams& m, const std::vector<CapletQuote>& quotes, const QuadConfig& q) {
    if (quotes.empty()) return 0.0;
    double ss = 0.0;
    for (const CapletQuote& cq : quotes) {
        double err = kPenalty;
        try {
            const int k = caplet_index(m.grid(cq.tenor), cq.maturity);
            err = caplet_implied_vol(m, {cq.tenor, k, cq.strike, {}}, q) - cq.vol;
        } catch (const Error&) {
        }
        ss += err * err;
    }
    return std::sqrt(ss / static_cast<double>(quotes.size()));
}

CalibrationResult calibrate_sequential(const CapletSurface& surface, const FactorLayout& layout,
                                       const ProcessSpec& spec, const CurveSet& curves,
                                       const CalibrationOptions& opts) {
    surface.check();
    check_spec(spec);
    if (spec.dim() != layout.dim()) throw LayoutError("process dimension does not match the layout");
    for (const CapletQuote& q : surface.quotes) curves.tenor(q.tenor);
    const auto mats = surface.maturities();
    if (mats.back() > layout.maturities()) throw LayoutError("surface maturity beyond the layout");
    CalibrationResult res;
    res.spec = spec;
    const auto bounds = bounds_of(opts);
    for (auto it = mats.rbegin(); it != mats.rend(); ++it) {
        const int mat = *it;
        const auto quotes = surface.at(mat);
        FactorSpec start = res.spec.factors[static_cast<std::size_t>(mat)];
        if (start.kind != FactorKind::cirj) throw ConfigError("idiosyncratic factors must be square-root factors");
        Problem pr{&quotes, &layout, &curves, res.spec, mat, bounds, &opts};
        MaturityFit fit;
        fit.maturity = mat;
        auto y = encode(start, bounds);
        double best = run_simplex(pr, y, fit);
        for (int r = 0; r < opts.restarts && best > 0.2 * opts.target_rms; ++r) {
            const double prev = best;
            best = std::min(best, run_simplex(pr, y, fit));
            if (prev - best < 1e-3 * prev) break;
        }
        fit.factor = decode(y.data(), bounds);
        fit.rms = best;
        fit.evaluations = pr.evaluations;
        res.spec.factors[static_cast<std::size_t>(mat)] = fit.factor;
        if (!(best <= opts.target_rms)) res.converged = false;
        res.fits.push_back(fit);
    }
    res.model = build_model(res.spec, curves, layout, opts.fit);
    if (opts.strict && !res.converged) {
        std::string msg = "calibration missed the target RMS:";
        for (const MaturityFit& f : res.fits)
            if (!(f.rms <= opts.target_rms))
                msg += " maturity " + std::to_string(f.maturity) + " floor " + std::to_string(f.rms);
        throw CalibrationError(msg);
    }
    return res;
}

double variance_share(const ModelParams& m, const std::string& tenor, double expiry) {
    const TenorGrid& g = m.grid(tenor);
    const int k = caplet_index(g, expiry);
    const double tau = m.terminal - expiry;
    const Vec psi = phi_psi(m.spec, tau, m.vk(tenor, k - 1)).psi - phi_psi(m.spec, tau, m.u(tenor, k)).psi;
    double total = 0.0;
    Vec parts(m.dim());
    for (int i = 0; i < m.dim(); ++i) {
        parts(i) = psi(i) * psi(i) * factor_variance(m.spec.factors[static_cast<std::size_t>(i)], expiry);
        total += parts(i);
    }
    if (!(total > 0.0)) throw DegenerateError("rate has zero variance at the expiry");
    return parts(0) / total;
}

nlohmann::json to_json(const CalibrationResult& r) {
    nlohmann::json fits = nlohmann::json::array();
    for (const MaturityFit& f : r.fits)
        fits.push_back({{"maturity", f.maturity},
                        {"rms_vol", f.rms},
                        {"iterations", f.iterations},
                        {"evaluations", f.evaluations},
                        {"x0", f.factor.x0},
                        {"lambda", f.factor.lambda},
                        {"theta", f.factor.theta},
                        {"eta", f.factor.eta},
                        {"nu", f.factor.nu},
                        {"mu", f.factor.mu}});
    return {{"converged", r.converged}, {"maturities", fits}, {"spec", to_json(r.spec)}};
}

}  // namespace alm
