#include "alm/curves.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace alm {

namespace {

constexpr double kGridEps = 1e-9;

int round_ratio(double a, double b) {
    const double r = a / b;
    const double n = std::round(r);
    if (n < 1.0 || std::abs(r - n) > kGridEps * std::max(1.0, r))
        throw ConfigError("grid spacing is not an integer multiple of the fine step");
    return static_cast<int>(n);
}

double ns_discount(const NelsonSiegelParams& p, double T) { return std::exp(-zero_rate(p, T) * T); }

}  // namespace

int TenorGrid::ratio() const { return round_ratio(delta, fine_step); }

int TenorGrid::map_to_fine(int k) const {
    if (k < 0 || k > n_points) throw IndexError("tenor index out of range");
    return k * ratio();
}

TenorGrid make_grid(double delta, double fine_step, double terminal) {
    if (!(delta > 0.0) || !(fine_step > 0.0)) throw ConfigError("grid steps must be positive");
    TenorGrid g{delta, 0, fine_step};
    g.ratio();
    g.n_points = round_ratio(terminal, delta);
    return g;
}

double zero_rate(const NelsonSiegelParams& p, double T) {
    if (!(p.gamma > 0.0)) throw ConfigError("Nelson-Siegel gamma must be positive");
    if (T < 0.0) throw ConfigError("negative maturity");
    const double x = p.gamma * T;
    // (1 - e^{-x}) / x with its series near 0.
    const double load = x < 1e-8 ? 1.0 - 0.5 * x : -std::expm1(-x) / x;
    return p.beta0 + p.beta1 * load + p.beta2 * (load - std::exp(-x));
}

CurveSet::CurveSet(double fine_step, std::vector<double> ois_discounts,
                   std::map<std::string, TenorCurve> tenors)
    : fine_step_(fine_step), ois_(std::move(ois_discounts)), tenors_(std::move(tenors)) {
    if (!(fine_step_ > 0.0)) throw ConfigError("fine step must be positive");
    if (ois_.size() < 2) throw ConfigError("discount curve needs at least two grid points");
    for (double b : ois_)
        if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("discount factors must be positive");
    for (const auto& [name, tc] : tenors_) {
        if (std::abs(tc.grid.terminal() - terminal()) > kGridEps)
            throw ConfigError("tenor '" + name + "' does not end at the terminal date");
        if (std::abs(tc.grid.fine_step - fine_step_) > kGridEps)
            throw ConfigError("tenor '" + name + "' uses a different fine grid");
        if (static_cast<int>(tc.libor.size()) != tc.grid.n_points + 1)
            throw ConfigError("tenor '" + name + "' LIBOR table has the wrong length");
    }
}

double CurveSet::discount(int l) const {
    if (l < 0 || l > fine_count()) throw IndexError("fine-grid index out of range");
    return ois_[static_cast<std::size_t>(l)];
}

double CurveSet::discount_at(double T) const {
    const double r = T / fine_step_;
    const double n = std::round(r);
    if (std::abs(r - n) > kGridEps * std::max(1.0, r))
        throw IndexError("date is not on the fine grid");
    return discount(static_cast<int>(n));
}

const TenorCurve& CurveSet::tenor(const std::string& x) const {
    auto it = tenors_.find(x);
    if (it == tenors_.end()) throw IndexError("unknown tenor '" + x + "'");
    return it->second;
}

double CurveSet::libor(const std::string& x, int k) const {
    const TenorCurve& tc = tenor(x);
    if (k < 1 || k > tc.grid.n_points) throw IndexError("LIBOR index out of range");
    return tc.libor[static_cast<std::size_t>(k)];
}

double CurveSet::tenor_discount(const std::string& x, int k) const {
    return discount(tenor(x).grid.map_to_fine(k));
}

double CurveSet::ois_forward(const std::string& x, int k) const {
    const TenorCurve& tc = tenor(x);
    if (k < 1 || k > tc.grid.n_points) throw IndexError("forward index out of range");
    return (tenor_discount(x, k - 1) / tenor_discount(x, k) - 1.0) / tc.grid.delta;
}

void CurveSet::check_positive() const {
    for (std::size_t l = 1; l < ois_.size(); ++l)
        if (ois_[l] > ois_[l - 1])
            throw ConsistencyError("discount factors increase at fine index " + std::to_string(l));
    for (const auto& [name, tc] : tenors_)
        for (int k = 1; k <= tc.grid.n_points; ++k)
            if (libor(name, k) < ois_forward(name, k))
                throw ConsistencyError("LIBOR below OIS forward for tenor '" + name +
                                       "' at index " + std::to_string(k));
}

CurveSet build_curveset(const NelsonSiegelParams& ois,
                        const std::map<std::string, NelsonSiegelParams>& tenor_curves,
                        const std::map<std::string, TenorGrid>& grids, bool require_positive) {
    if (grids.empty()) throw ConfigError("at least one tenor grid is required");
    const TenorGrid& first = grids.begin()->second;
    const double h = first.fine_step;
    const int n_fine = round_ratio(first.terminal(), h);
    std::vector<double> disc(static_cast<std::size_t>(n_fine) + 1);
    for (int l = 0; l <= n_fine; ++l) disc[static_cast<std::size_t>(l)] = ns_discount(ois, l * h);

    std::map<std::string, TenorCurve> tenors;
    for (const auto& [name, grid] : grids) {
        auto it = tenor_curves.find(name);
        if (it == tenor_curves.end()) throw ConfigError("no curve for tenor '" + name + "'");
        if (std::abs(grid.fine_step - h) > kGridEps ||
            std::abs(grid.terminal() - first.terminal()) > kGridEps)
            throw ConfigError("tenor grids do not share the fine grid and terminal date");
        TenorCurve tc{grid, std::vector<double>(static_cast<std::size_t>(grid.n_points) + 1, 0.0)};
        for (int k = 1; k <= grid.n_points; ++k) {
            const double p0 = ns_discount(it->second, grid.date(k - 1));
            const double p1 = ns_discount(it->second, grid.date(k));
            tc.libor[static_cast<std::size_t>(k)] = (p0 / p1 - 1.0) / grid.delta;
        }
        tenors.emplace(name, std::move(tc));
    }
    CurveSet cs(h, std::move(disc), std::move(tenors));
    if (require_positive) cs.check_positive();
    return cs;
}

double fair_swap_rate(const CurveSet& c, const std::string& x, int p, int q) {
    const TenorCurve& tc = c.tenor(x);
    if (p < 0 || q <= p || q > tc.grid.n_points) throw IndexError("swap requires 0 <= p < q <= N");
    double num = 0.0, den = 0.0;
    for (int k = p + 1; k <= q; ++k) {
        const double b = c.tenor_discount(x, k);
        num += b * c.libor(x, k);
        den += b;
    }
    return num / den;
}

double swap_value(const CurveSet& c, const std::string& x, int p, int q, double K) {
    const TenorCurve& tc = c.tenor(x);
    if (p < 0 || q < p || q > tc.grid.n_points) throw IndexError("swap requires 0 <= p <= q <= N");
    double v = 0.0;
    for (int k = p + 1; k <= q; ++k) v += c.tenor_discount(x, k) * (c.libor(x, k) - K);
    return tc.grid.delta * v;
}

void check_alignment(const CurveSet& c, const BasisLegs& legs) {
    const TenorGrid& g1 = c.tenor(legs.x1).grid;
    const TenorGrid& g2 = c.tenor(legs.x2).grid;
    if (legs.p1 < 0 || legs.q1 < legs.p1 || legs.q1 > g1.n_points || legs.p2 < 0 ||
        legs.q2 < legs.p2 || legs.q2 > g2.n_points)
        throw IndexError("basis swap indices out of range");
    if (g1.map_to_fine(legs.p1) != g2.map_to_fine(legs.p2) ||
        g1.map_to_fine(legs.q1) != g2.map_to_fine(legs.q2))
        throw AlignmentError("basis swap legs do not share start and end dates");
    if (g2.ratio() % g1.ratio() != 0)
        throw AlignmentError("long-tenor dates are not a subset of the short-tenor dates");
}

double fair_basis_spread(const CurveSet& c, const BasisLegs& legs) {
    check_alignment(c, legs);
    const double d1 = c.tenor(legs.x1).grid.delta;
    const double d2 = c.tenor(legs.x2).grid.delta;
    double leg2 = 0.0, leg1 = 0.0, annuity = 0.0;
    for (int i = legs.p2 + 1; i <= legs.q2; ++i)
        leg2 += d2 * c.tenor_discount(legs.x2, i) * c.libor(legs.x2, i);
    for (int i = legs.p1 + 1; i <= legs.q1; ++i) {
        const double b = c.tenor_discount(legs.x1, i);
        leg1 += d1 * b * c.libor(legs.x1, i);
        annuity += d1 * b;
    }
    if (annuity == 0.0) throw IndexError("empty short leg");
    return (leg2 - leg1) / annuity;
}

double basis_swap_value(const CurveSet& c, const BasisLegs& legs, double S) {
    check_alignment(c, legs);
    const double d1 = c.tenor(legs.x1).grid.delta;
    const double d2 = c.tenor(legs.x2).grid.delta;
    double v = 0.0;
    for (int i = legs.p2 + 1; i <= legs.q2; ++i)
        v += d2 * c.tenor_discount(legs.x2, i) * c.libor(legs.x2, i);
    for (int i = legs.p1 + 1; i <= legs.q1; ++i)
        v -= d1 * c.tenor_discount(legs.x1, i) * (c.libor(legs.x1, i) + S);
    return v;
}

CurveSet curveset_from_tables(
    const std::vector<std::pair<double, double>>& discounts,
    const std::map<std::string, std::vector<std::pair<double, double>>>& libor_tables,
    double fine_step, double terminal) {
    if (discounts.empty()) throw ConfigError("empty discount table");
    auto pts = discounts;
    std::sort(pts.begin(), pts.end());
    for (const auto& [T, b] : pts)
        if (!(b > 0.0)) throw ConfigError("non-positive discount factor");
    const int n_fine = round_ratio(terminal, fine_step);
    std::vector<double> disc(static_cast<std::size_t>(n_fine) + 1);
    for (int l = 0; l <= n_fine; ++l) {
        const double T = l * fine_step;
        if (l == 0) {
            disc[0] = 1.0;
            continue;
        }
        auto hi = std::lower_bound(pts.begin(), pts.end(), std::make_pair(T - kGridEps, 0.0));
        if (hi == pts.end())
            throw ConfigError("discount table does not reach maturity " + std::to_string(T));
        if (std::abs(hi->first - T) <= kGridEps) {
            disc[static_cast<std::size_t>(l)] = hi->second;
            continue;
        }
        // Log-linear between the bracketing quotes; T = 0 carries B = 1.
        const double T0 = hi == pts.begin() ? 0.0 : std::prev(hi)->first;
        const double b0 = hi == pts.begin() ? 1.0 : std::prev(hi)->second;
        const double w = (T - T0) / (hi->first - T0);
        disc[static_cast<std::size_t>(l)] = std::exp((1.0 - w) * std::log(b0) + w * std::log(hi->second));
    }
    std::map<std::string, TenorCurve> tenors;
    for (const auto& [name, rows] : libor_tables) {
        if (rows.empty()) throw ConfigError("empty LIBOR table for tenor '" + name + "'");
        auto sorted = rows;
        std::sort(sorted.begin(), sorted.end());
        const double delta = sorted.front().first;
        TenorGrid g = make_grid(delta, fine_step, terminal);
        TenorCurve tc{g, std::vector<double>(static_cast<std::size_t>(g.n_points) + 1, 0.0)};
        if (static_cast<int>(sorted.size()) != g.n_points)
            throw ConfigError("LIBOR table for tenor '" + name + "' must list every tenor date");
        for (int k = 1; k <= g.n_points; ++k) {
            const auto& [T, L] = sorted[static_cast<std::size_t>(k - 1)];
            if (std::abs(T - g.date(k)) > kGridEps)
                throw ConfigError("LIBOR table for tenor '" + name + "' is off the tenor grid");
            tc.libor[static_cast<std::size_t>(k)] = L;
        }
        tenors.emplace(name, std::move(tc));
    }
    return CurveSet(fine_step, std::move(disc), std::move(tenors));
}

nlohmann::json to_json(const CurveSet& c) {
    nlohmann::json j;
    j["fine_step"] = c.fine_step();
    j["terminal"] = c.terminal();
    nlohmann::json d = nlohmann::json::array();
    for (int l = 0; l <= c.fine_count(); ++l)
        d.push_back({{"maturity", l * c.fine_step()}, {"discount", c.discount(l)}});
    j["discounts"] = d;
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [name, tc] : c.tenors()) {
        nlohmann::json rows = nlohmann::json::array();
        for (int k = 1; k <= tc.grid.n_points; ++k)
            rows.push_back({{"maturity_end", tc.grid.date(k)}, {"rate", tc.libor[static_cast<std::size_t>(k)]}});
        t[name] = rows;
    }
    j["libor"] = t;
    return j;
}

CurveSet curveset_from_json(const nlohmann::json& j) {
    try {
        std::vector<std::pair<double, double>> disc;
        for (const auto& r : j.at("discounts"))
            disc.emplace_back(r.at("maturity").get<double>(), r.at("discount").get<double>());
        std::map<std::string, std::vector<std::pair<double, double>>> lib;
        for (auto it = j.at("libor").begin(); it != j.at("libor").end(); ++it)
            for (const auto& r : it.value())
                lib[it.key()].emplace_back(r.at("maturity_end").get<double>(),
                                           r.at("rate").get<double>());
        return curveset_from_tables(disc, lib, j.at("fine_step").get<double>(),
                                    j.at("terminal").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("curve set: ") + e.what());
    }
}

NelsonSiegelParams ns_from_json(const nlohmann::json& j) {
    try {
        NelsonSiegelParams p{j.at("beta0").get<double>(), j.at("beta1").get<double>(),
                             j.at("beta2").get<double>(), j.at("gamma").get<double>()};
        if (!(p.gamma > 0.0)) throw ConfigError("Nelson-Siegel gamma must be positive");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("Nelson-Siegel parameters: ") + e.what());
    }
}

}  // namespace alm
