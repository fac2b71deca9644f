#include "alm/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

namespace alm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOrderTol = 1e-13;

double log_m0(const ProcessSpec& spec, double T_N, const Vec& w) {
    const ExpAffine e = phi_psi(spec, T_N, w);
    return e.phi + e.psi.dot(spec.x0());
}

// Admissible open interval of s for base + s dir at the horizon.
std::pair<double, double> ray_limits(const ProcessSpec& spec, double T_N, const FitRay& ray) {
    double lo = -kInf, hi = kInf;
    for (int i = 0; i < spec.dim(); ++i) {
        const double umax = factor_max_u(spec.factors[i], T_N);
        if (!std::isfinite(umax) || ray.dir(i) == 0.0) {
            if (ray.base(i) >= umax) throw FitError("ray base outside the admissible domain");
            continue;
        }
        const double s = (umax - ray.base(i)) / ray.dir(i);
        if (ray.dir(i) > 0.0) hi = std::min(hi, s);
        else lo = std::max(lo, s);
    }
    if (!(lo < 0.0 && hi > 0.0)) throw FitError("ray base outside the admissible domain");
    return {lo, hi};
}

std::string row_tag(const char* what, int i) { return std::string(what) + "[" + std::to_string(i) + "]"; }

void check_ordering_u(const std::vector<Vec>& u) {
    for (std::size_t l = 0; l < u.size(); ++l) {
        if ((u[l].array() < -kOrderTol).any())
            throw OrderingError(row_tag("u", static_cast<int>(l)) + " has a negative component");
        if (l + 1 < u.size() && ((u[l + 1] - u[l]).array() > kOrderTol).any())
            throw OrderingError(row_tag("u", static_cast<int>(l)) + " is below its successor");
    }
}

}  // namespace

const TenorGrid& ModelParams::grid(const std::string& x) const {
    auto it = v.find(x);
    if (it == v.end()) throw IndexError("unknown tenor '" + x + "'");
    return it->second.grid;
}

const Vec& ModelParams::u(const std::string& x, int k) const {
    const int l = grid(x).map_to_fine(k);
    return u_fine.at(static_cast<std::size_t>(l));
}

const Vec& ModelParams::vk(const std::string& x, int k) const {
    const TenorV& tv = v.at(x);
    if (k < 0 || k > tv.grid.n_points) throw IndexError("v index out of range");
    return tv.v[static_cast<std::size_t>(k)];
}

double ModelParams::discount(const std::string& x, int k) const {
    return terminal_discount * m0(u(x, k));
}

double ModelParams::m0(const Vec& w) const { return std::exp(log_m0(spec, terminal, w)); }

Vec solve_on_ray(const ProcessSpec& spec, double T_N, double target, const FitRay& ray) {
    if (!(target > 0.0) || !std::isfinite(target)) throw FitError("fit target must be positive");
    if (ray.base.size() != spec.dim() || ray.dir.size() != spec.dim())
        throw ConfigError("ray dimension does not match process");
    if (ray.dir.norm() == 0.0) throw ConfigError("ray direction is zero");
    const double log_target = std::log(target);
    const auto [s_lo, s_hi] = ray_limits(spec, T_N, ray);
    auto h = [&](double s) { return log_m0(spec, T_N, ray.base + s * ray.dir) - log_target; };

    const double h0 = h(0.0);
    if (std::abs(h0) <= 1e-16) return ray.base;
    // log M is convex in s: search uphill from a negative value, downhill from a
    // positive one.
    const double eps = 1e-7;
    const double slope = (h(std::min(eps, 0.5 * s_hi)) - h(std::max(-eps, 0.5 * s_lo))) /
                         (std::min(eps, 0.5 * s_hi) - std::max(-eps, 0.5 * s_lo));
    if (slope == 0.0 && h0 > 0.0) throw FitError("target below the reachable range");
    double sign = (h0 < 0.0) == (slope > 0.0) ? 1.0 : -1.0;
    if (slope == 0.0) sign = 1.0;
    const double limit = sign > 0.0 ? s_hi : s_lo;
    double a = 0.0, ha = h0, prev = 0.0;
    double step = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        double b = sign * step;
        bool at_edge = false;
        if (std::isfinite(limit) && std::abs(b) >= std::abs(limit) * (1.0 - 1e-12)) {
            b = limit * (1.0 - 1e-12);
            at_edge = true;
        }
        double hb;
        try {
            hb = h(b);
        } catch (const DomainError&) {
            throw FitError("no root before the admissibility boundary");
        }
        if ((hb > 0.0) != (ha > 0.0)) {
            std::uintmax_t max_iter = 200;
            auto r = boost::math::tools::toms748_solve(
                h, std::min(a, b), std::max(a, b), a < b ? ha : hb, a < b ? hb : ha,
                boost::math::tools::eps_tolerance<double>(52), max_iter);
            const double s = 0.5 * (r.first + r.second);
            return ray.base + s * ray.dir;
        }
        if (ha > 0.0 && hb >= ha) {
            // Passed the minimum without crossing; it lies in [prev, b].
            const double lo = std::min(prev, b), hi = std::max(prev, b);
            auto m = boost::math::tools::brent_find_minima(h, lo, hi, 52);
            if (m.second > 0.0) throw FitError("target below the reachable range along the ray");
            const double sm = m.first;
            std::uintmax_t max_iter = 200;
            auto r = boost::math::tools::toms748_solve(
                h, std::min(a, sm), std::max(a, sm), boost::math::tools::eps_tolerance<double>(52),
                max_iter);
            return ray.base + 0.5 * (r.first + r.second) * ray.dir;
        }
        if (at_edge) throw FitError("no root before the admissibility boundary");
        prev = a;
        a = b;
        ha = hb;
        step *= 2.0;
    }
    throw FitError("root bracket could not be established");
}

RayRule constant_ray(const Vec& base, const Vec& dir) {
    return [base, dir](int, const std::vector<Vec>&) { return FitRay{base, dir}; };
}

std::vector<Vec> fit_u_sequence(const ProcessSpec& spec, const CurveSet& curves,
                                const RayRule& rule, const FitOptions& opts) {
    const int N = curves.fine_count();
    const double T_N = curves.terminal();
    const double bN = curves.discount(N);
    std::vector<Vec> u(static_cast<std::size_t>(N) + 1, Vec::Zero(spec.dim()));
    for (int l = N - 1; l >= 0; --l) {
        const double target = curves.discount(l) / bN;
        try {
            u[static_cast<std::size_t>(l)] = solve_on_ray(spec, T_N, target, rule(l, u));
        } catch (const FitError& e) {
            throw FitError(row_tag("u", l) + ": " + e.what());
        }
    }
    if (opts.mode == RateMode::positive && opts.enforce_ordering) check_ordering_u(u);
    return u;
}

std::vector<Vec> fit_v_sequence(const ProcessSpec& spec, const CurveSet& curves,
                                const std::vector<Vec>& u_fine, const std::string& tenor,
                                const RayRule& rule, const FitOptions& opts) {
    const TenorGrid& g = curves.tenor(tenor).grid;
    const double T_N = curves.terminal();
    std::vector<Vec> v(static_cast<std::size_t>(g.n_points) + 1, Vec::Zero(spec.dim()));
    for (int k = g.n_points - 1; k >= 0; --k) {
        const Vec& u_next = u_fine.at(static_cast<std::size_t>(g.map_to_fine(k + 1)));
        const double target =
            (1.0 + g.delta * curves.libor(tenor, k + 1)) * std::exp(log_m0(spec, T_N, u_next));
        try {
            v[static_cast<std::size_t>(k)] = solve_on_ray(spec, T_N, target, rule(k, u_fine));
        } catch (const FitError& e) {
            throw FitError(tenor + " " + row_tag("v", k) + ": " + e.what());
        }
        if (opts.mode == RateMode::positive && opts.enforce_ordering) {
            const Vec& uk = u_fine.at(static_cast<std::size_t>(g.map_to_fine(k)));
            if (((v[static_cast<std::size_t>(k)] - uk).array() < -kOrderTol).any())
                throw OrderingError(tenor + " " + row_tag("v", k) + " is below u");
        }
    }
    return v;
}

FactorLayout::FactorLayout(int maturities, double u_c, std::map<std::string, double> v_tilde)
    : m_(maturities), u_c_(u_c), v_tilde_(std::move(v_tilde)) {
    if (m_ < 1) throw LayoutError("layout needs at least one maturity");
}

double FactorLayout::v_tilde(const std::string& x) const {
    auto it = v_tilde_.find(x);
    if (it == v_tilde_.end()) throw ConfigError("no common-factor value for tenor '" + x + "'");
    return it->second;
}

int FactorLayout::active_column(double T) const {
    const int c = static_cast<int>(std::ceil(T - 1e-9));
    return std::clamp(c, 1, m_);
}

int FactorLayout::first_fine_row(int j, double fine_step) const {
    if (j <= 1) return 0;
    return static_cast<int>(std::floor((j - 1) / fine_step + 1e-9)) + 1;
}

void FactorLayout::check(const ProcessSpec& spec, double terminal) const {
    if (spec.dim() != dim())
        throw LayoutError("process dimension must equal maturities + 1");
    if (m_ > static_cast<int>(std::floor(terminal + 1e-9)))
        throw LayoutError("more maturities than the tenor structure holds");
}

Vec FactorLayout::frozen_base(double T, double col0, const std::vector<Vec>& u_fine,
                              double fine_step) const {
    Vec b = Vec::Zero(dim());
    b(0) = col0;
    const int a = active_column(T);
    for (int j = a + 1; j <= m_; ++j) {
        const auto row = static_cast<std::size_t>(first_fine_row(j, fine_step));
        if (row >= u_fine.size()) throw LayoutError("frozen row beyond the terminal date");
        b(j) = u_fine[row](j);
    }
    return b;
}

RayRule FactorLayout::u_rule(double fine_step) const {
    return [this, fine_step](int l, const std::vector<Vec>& u_fine) {
        const double T = l * fine_step;
        Vec dir = Vec::Zero(dim());
        dir(active_column(T)) = 1.0;
        return FitRay{frozen_base(T, u_c_, u_fine, fine_step), dir};
    };
}

RayRule FactorLayout::v_rule(const std::string& x, const TenorGrid& grid, double fine_step) const {
    const double vt = v_tilde(x);
    return [this, vt, grid, fine_step](int k, const std::vector<Vec>& u_fine) {
        const double T = grid.date(k);
        Vec dir = Vec::Zero(dim());
        dir(active_column(T)) = 1.0;
        return FitRay{frozen_base(T, vt, u_fine, fine_step), dir};
    };
}

FactorLayout build_factor_layout(int maturities, const CurveSet& curves, double u_c,
                                 const std::map<std::string, double>& v_tilde) {
    if (maturities > static_cast<int>(std::floor(curves.terminal() + 1e-9)))
        throw LayoutError("more maturities than the tenor structure holds");
    for (const auto& [name, tc] : curves.tenors()) {
        if (!v_tilde.count(name)) throw ConfigError("no common-factor value for tenor '" + name + "'");
        // Caplet maturities must be tenor dates: whole years are multiples of delta.
        const double per_year = 1.0 / tc.grid.delta;
        if (std::abs(per_year - std::round(per_year)) > 1e-9)
            throw LayoutError("tenor '" + name + "' does not hit whole years");
    }
    return FactorLayout(maturities, u_c, v_tilde);
}

ModelParams build_model(const ProcessSpec& spec, const CurveSet& curves,
                        const FactorLayout& layout, const FitOptions& opts) {
    check_spec(spec);
    layout.check(spec, curves.terminal());
    ModelParams m;
    m.spec = spec;
    m.terminal = curves.terminal();
    m.fine_step = curves.fine_step();
    m.terminal_discount = curves.discount(curves.fine_count());
    m.mode = opts.mode;
    m.u_fine = fit_u_sequence(spec, curves, layout.u_rule(m.fine_step), opts);
    for (const auto& [name, tc] : curves.tenors()) {
        TenorV tv{tc.grid, fit_v_sequence(spec, curves, m.u_fine, name,
                                          layout.v_rule(name, tc.grid, m.fine_step), opts)};
        m.v.emplace(name, std::move(tv));
    }
    return m;
}

ModelParams build_negative_rate_model(const ProcessSpec& spec, const CurveSet& curves,
                                      const NegativeRateConfig& cfg) {
    check_spec(spec);
    if (spec.dim() != 2 || spec.factors[0].kind != FactorKind::ou ||
        spec.factors[1].kind != FactorKind::cirj)
        throw ConfigError("negative-rates model needs an (OU, CIRJ) process");
    if (cfg.u_second < 0.0) throw ConfigError("second coordinate of u must be >= 0");
    // Multiplicative spreads: 1 + delta R = (1 + delta L) / (1 + delta F).
    for (const auto& [name, tc] : curves.tenors())
        for (int k = 1; k <= tc.grid.n_points; ++k) {
            const double d = tc.grid.delta;
            const double R = ((1.0 + d * curves.libor(name, k)) / (1.0 + d * curves.ois_forward(name, k)) - 1.0) / d;
            if (R < 0.0)
                throw SpreadSignError("negative multiplicative spread for tenor '" + name +
                                      "' at index " + std::to_string(k));
        }
    ModelParams m;
    m.spec = spec;
    m.terminal = curves.terminal();
    m.fine_step = curves.fine_step();
    m.terminal_discount = curves.discount(curves.fine_count());
    m.mode = RateMode::negative;
    FitOptions opts{RateMode::negative, false};
    Vec base(2), e1(2), e2(2);
    base << 0.0, cfg.u_second;
    e1 << 1.0, 0.0;
    e2 << 0.0, 1.0;
    m.u_fine = fit_u_sequence(spec, curves, constant_ray(base, e1), opts);
    for (const auto& [name, tc] : curves.tenors()) {
        const TenorGrid g = tc.grid;
        RayRule rule = [g, e2](int k, const std::vector<Vec>& u_fine) {
            Vec b = u_fine.at(static_cast<std::size_t>(g.map_to_fine(k)));
            return FitRay{b, e2};
        };
        TenorV tv{g, fit_v_sequence(spec, curves, m.u_fine, name, rule, opts)};
        for (int k = 0; k < g.n_points; ++k)
            if (tv.v[static_cast<std::size_t>(k)](1) <
                m.u_fine[static_cast<std::size_t>(g.map_to_fine(k))](1) - kOrderTol)
                throw SpreadSignError("fitted spread coordinate below u for tenor '" + name + "'");
        m.v.emplace(name, std::move(tv));
    }
    return m;
}

ModelReport validate_model(const ModelParams& m) {
    ModelReport r;
    const bool positive = m.mode == RateMode::positive;
    for (std::size_t l = 0; l < m.u_fine.size(); ++l) {
        if (!validate_domain(m.spec, m.u_fine[l], m.terminal).admissible) {
            r.admissible = false;
            r.notes.push_back(row_tag("u", static_cast<int>(l)) + " inadmissible");
        }
        if (positive && l + 1 < m.u_fine.size() &&
            (((m.u_fine[l + 1] - m.u_fine[l]).array() > kOrderTol).any() ||
             (m.u_fine[l].array() < -kOrderTol).any())) {
            r.u_decreasing = false;
            r.notes.push_back(row_tag("u", static_cast<int>(l)) + " breaks the decreasing order");
        }
    }
    for (const auto& [name, tv] : m.v) {
        for (int k = 0; k <= tv.grid.n_points; ++k) {
            const Vec& vk = tv.v[static_cast<std::size_t>(k)];
            const Vec& uk = m.u(name, k);
            if (!validate_domain(m.spec, vk, m.terminal).admissible) {
                r.admissible = false;
                r.notes.push_back(name + " " + row_tag("v", k) + " inadmissible");
            }
            if (positive && ((vk - uk).array() < -kOrderTol).any()) {
                r.v_above_u = false;
                r.notes.push_back(name + " " + row_tag("v", k) + " below u");
            }
            if (k >= 1 && k < tv.grid.n_points) {
                const Vec& uprev = m.u(name, k - 1);
                if (((vk - uprev).array() > kOrderTol).any()) {
                    r.extreme_regime = true;
                    r.normal_regime = false;
                    r.notes.push_back(name + " " + row_tag("v", k) + " above u[k-1] (extreme spreads)");
                } else if (((vk - uk).array() < -kOrderTol).any()) {
                    r.normal_regime = false;
                }
            }
        }
    }
    return r;
}

namespace {

nlohmann::json rows_to_json(const std::vector<Vec>& rows) {
    nlohmann::json a = nlohmann::json::array();
    for (const Vec& r : rows) a.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    return a;
}

std::vector<Vec> rows_from_json(const nlohmann::json& a, int dim) {
    std::vector<Vec> out;
    for (const auto& r : a) {
        auto v = r.get<std::vector<double>>();
        if (static_cast<int>(v.size()) != dim) throw ParseError("row dimension mismatch");
        out.push_back(Eigen::Map<Vec>(v.data(), dim));
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const ModelParams& m) {
    nlohmann::json j;
    j["spec"] = to_json(m.spec);
    j["terminal"] = m.terminal;
    j["fine_step"] = m.fine_step;
    j["terminal_discount"] = m.terminal_discount;
    j["mode"] = m.mode == RateMode::positive ? "positive-rates" : "negative-rates";
    j["u"] = rows_to_json(m.u_fine);
    nlohmann::json v = nlohmann::json::object();
    for (const auto& [name, tv] : m.v) v[name] = {{"delta", tv.grid.delta}, {"rows", rows_to_json(tv.v)}};
    j["v"] = v;
    return j;
}

ModelParams model_from_json(const nlohmann::json& j) {
    try {
        ModelParams m;
        m.spec = process_from_json(j.at("spec"));
        m.terminal = j.at("terminal").get<double>();
        m.fine_step = j.at("fine_step").get<double>();
        m.terminal_discount = j.at("terminal_discount").get<double>();
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "positive-rates") m.mode = RateMode::positive;
        else if (mode == "negative-rates") m.mode = RateMode::negative;
        else throw ParseError("unknown mode '" + mode + "'");
        m.u_fine = rows_from_json(j.at("u"), m.spec.dim());
        const TenorGrid fine = make_grid(m.fine_step, m.fine_step, m.terminal);
        if (static_cast<int>(m.u_fine.size()) != fine.n_points + 1)
            throw ParseError("u table length does not match the fine grid");
        for (auto it = j.at("v").begin(); it != j.at("v").end(); ++it) {
            TenorV tv{make_grid(it.value().at("delta").get<double>(), m.fine_step, m.terminal),
                      rows_from_json(it.value().at("rows"), m.spec.dim())};
            if (static_cast<int>(tv.v.size()) != tv.grid.n_points + 1)
                throw ParseError("v table length does not match tenor '" + it.key() + "'");
            m.v.emplace(it.key(), std::move(tv));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model parameters: ") + e.what());
    }
}

std::string format_uv_table(const ModelParams& m, int column) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    std::vector<std::string> names;
    for (const auto& [name, tv] : m.v) names.push_back(name);
    os << "k";
    for (const auto& n : names) os << "\tu_" << n << "\tv_" << n;
    os << "\n";
    int rows = 0;
    for (const auto& n : names) rows = std::max(rows, m.grid(n).n_points + 1);
    for (int k = 0; k < rows; ++k) {
        os << k;
        for (const auto& n : names) {
            const int N = m.grid(n).n_points;
            os << '\t';
            if (k >= 1 && k <= N) os << m.u(n, k)(column);
            else os << '-';
            os << '\t';
            if (k < N) os << m.vk(n, k)(column);
            else os << '-';
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace alm
