// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "alm/analytics.hpp"
#include "alm/calibration.hpp"
#include "alm/montecarlo.hpp"
#include "fixtures.hpp"

using namespace alm;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0.0 && secs > budget_s) {
        o.pass = false;
        o.detail += " [over time budget " + std::to_string(static_cast<int>(budget_s)) + " s]";
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char b[128];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

int threads() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// Reference second coordinates of u and v, columns 3m u, 3m v, 6m u, 6m v; NaN where absent.
const double kNa = std::nan("");
const double kTable[19][4] = {
    {kNa, 0.008966, kNa, 0.009035},           {0.008638, 0.008641, 0.008286, 0.008358},
    {0.008286, 0.008289, 0.007505, 0.007577}, {0.007908, 0.007911, 0.006625, 0.006697},
    {0.007505, 0.007507, 0.005652, 0.005725}, {0.007077, 0.007079, 0.004591, 0.004664},
    {0.006625, 0.006627, 0.003447, 0.003520}, {0.006150, 0.006152, 0.002225, 0.002298},
    {0.005652, 0.005654, 0.000929, 0.001003}, {0.005132, 0.005135, 0.0, kNa},
    {0.004591, 0.004594, kNa, kNa},           {0.004029, 0.004032, kNa, kNa},
    {0.003447, 0.003450, kNa, kNa},           {0.002847, 0.002848, kNa, kNa},
    {0.002225, 0.002228, kNa, kNa},           {0.001586, 0.001589, kNa, kNa},
    {0.000929, 0.000932, kNa, kNa},           {0.000254, 0.000257, kNa, kNa},
    {0.0, kNa, kNa, kNa}};

Outcome table_reproduction() {
    const ModelParams m = fx::toy_model();
    double worst = 0.0;
    int at_k = -1, at_col = -1;
    for (int k = 0; k <= 18; ++k)
        for (int col = 0; col < 4; ++col) {
            const double want = kTable[k][col];
            if (std::isnan(want)) continue;
            const std::string x = col < 2 ? "3m" : "6m";
            const Vec& w = col % 2 == 0 ? m.u(x, k) : m.vk(x, k);
            const double d = std::abs(w(1) - want);
            if (d > worst) worst = d, at_k = k, at_col = col;
        }
    static const char* names[] = {"u_3m", "v_3m", "u_6m", "v_6m"};
    return {worst <= 5e-7, "max |diff| " + fmt("%.3g", worst) + " at " + names[at_col] + "[" +
                               std::to_string(at_k) + "], tolerance 5e-7"};
}

struct SwaptionRow {
    double strike, price_bp, a, b0;
};
const SwaptionRow kSwaptions[] = {{0.013238, 176.17, -5.5403, 1.1596},
                                  {0.023535, 52.214, -10.2982, 1.1605},
                                  {0.033831, 9.7898, -15.0481, 1.1615},
                                  {0.044128, 1.4016, -19.7899, 1.1625}};

Outcome boundary_coefficients() {
    const ModelParams m = fx::toy_model();
    double worst = 0.0;
    bool unit = true;
    for (const SwaptionRow& r : kSwaptions) {
        const SwaptionSpec s{"3m", 8, 16, r.strike};
        const BoundaryCoeffs c = fit_linear_boundary(m, swaption_exercise_fn(m, s), BoundaryMethod::quantile2d);
        worst = std::max({worst, std::abs(c.intercept / r.a - 1.0), std::abs(c.direction(0) / r.b0 - 1.0)});
        unit = unit && c.direction(1) == 1.0;
    }
    const BoundaryCoeffs c0 = fit_linear_boundary(
        m, swaption_exercise_fn(m, {"3m", 8, 16, kSwaptions[0].strike}), BoundaryMethod::quantile2d);
    return {worst <= 1e-3 && unit, "A=" + fmt("%.4f", c0.intercept) + " B=(" + fmt("%.4f", c0.direction(0)) +
                                       ", " + fmt("%g", c0.direction(1)) + ") at K=0.013238; max relative diff " +
                                       fmt("%.3g", worst) + ", tolerance 1e-3"};
}

SimConfig big_sim(long paths, std::uint64_t seed) {
    SimConfig cfg;
    cfg.paths = paths;
    cfg.seed = seed;
    cfg.steps_per_year = 10;
    cfg.scheme = Scheme::exact_cir;
    cfg.threads = threads();
    return cfg;
}

Outcome swaption_prices() {
    const ModelParams m = fx::toy_model();
    bool ok = true;
    std::string detail;
    for (const SwaptionRow& r : kSwaptions) {
        const SwaptionSpec s{"3m", 8, 16, r.strike};
        const BoundaryCoeffs c = fit_linear_boundary(m, swaption_exercise_fn(m, s), BoundaryMethod::quantile2d);
        const BoundaryStudy st = mc_swaption_study(m, s, c, big_sim(1000000, 7001));
        const double approx = swaption_price_approx(m, s, c);
        const double mc_bp = 1e4 * st.true_boundary.mean, se_bp = 1e4 * st.true_boundary.std_error;
        const bool agree = std::abs(approx - st.linear_boundary.mean) <= 3.0 * st.linear_boundary.std_error;
        const double fwd = model_swap_rate(m, "3m", 8, 16), ann = model_annuity(m, "3m", 8, 16);
        const double iv_gap_bp = 1e4 * std::abs(black76_implied_vol(st.true_boundary.mean, fwd, r.strike, 2.0, ann) -
                                                black76_implied_vol(st.linear_boundary.mean, fwd, r.strike, 2.0, ann));
        ok = ok && agree && iv_gap_bp < 1e-2;
        if (r.strike == kSwaptions[0].strike) {
            const double d = std::abs(mc_bp - r.price_bp);
            ok = ok && d <= 3.0 * se_bp && d <= 5e-3 * r.price_bp;
            detail = "MC " + fmt("%.3f", mc_bp) + " bp (SE " + fmt("%.3f", se_bp) + ") vs 176.17";
        }
        detail += "; K=" + fmt("%g", r.strike) + " approx-linear " +
                  fmt("%.2f", std::abs(approx - st.linear_boundary.mean) / st.linear_boundary.std_error) +
                  " SE, IV gap " + fmt("%.2g", iv_gap_bp) + " bp";
    }
    return {ok, detail};
}

struct BasisRow {
    double spread, price_bp;
};

Outcome basis_prices() {
    const ModelParams m = fx::toy_model();
    const BasisLegs legs{"3m", "6m", 8, 16, 4, 8};
    bool ok = true;
    std::string detail;
    for (const BasisRow& r : {BasisRow{0.0010945, 13.778}, BasisRow{0.0036484, 0.080951}}) {
        const BasisSwaptionSpec s{legs, r.spread};
        BoundaryOptions o;
        o.normalize = 0;
        const BoundaryCoeffs c = fit_linear_boundary(m, basis_exercise_fn(m, s), BoundaryMethod::quantile2d, o);
        const BoundaryStudy st = mc_basis_swaption_study(m, s, c, big_sim(1000000, 7002));
        const double mc_bp = 1e4 * st.true_boundary.mean, se_bp = 1e4 * st.true_boundary.std_error;
        const double d = std::abs(mc_bp - r.price_bp);
        const double gap_bp = 1e4 * std::abs(st.difference.mean);
        ok = ok && d <= 3.0 * se_bp && d <= 1e-2 * r.price_bp && gap_bp < 1e-3;
        detail += (detail.empty() ? "" : "; ") + std::string("S=") + fmt("%g", r.spread) + " MC " +
                  fmt("%.4g", mc_bp) + " bp (SE " + fmt("%.2g", se_bp) + ") vs " + fmt("%g", r.price_bp) +
                  ", shared-path gap " + fmt("%.2g", gap_bp) + " bp";
    }
    return {ok, detail};
}

Outcome riccati_oracle() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<FactorSpec> pool = fx::toy_spec().factors;
    double worst = 0.0, flow = 0.0;
    for (int n = 0; n < 200; ++n) {
        FactorSpec f;
        if (n < 40) {
            f = pool[static_cast<std::size_t>(n % 2)];
        } else {
            f.kind = n % 5 == 4 ? FactorKind::ou : FactorKind::cirj;
            f.x0 = 0.1 + 2.0 * U(rng);
            f.lambda = n % 7 == 0 ? 0.0 : 0.02 + U(rng);
            f.theta = 0.05 + 1.5 * U(rng);
            f.eta = 0.05 + 0.4 * U(rng);
            if (f.kind == FactorKind::cirj && n % 2 == 0) {
                f.nu = 0.3 * U(rng);
                f.mu = 0.3 * U(rng);
            }
        }
        ProcessSpec s;
        s.factors = {f};
        const double t = 0.1 + 4.4 * U(rng);
        const double umax = std::min(factor_max_u(f, t), 5.0);
        Vec u(1);
        u << (U(rng) - 0.4) * 0.9 * umax;
        const ExpAffine a = phi_psi(s, t, u);
        const ExpAffine b = phi_psi_ode(s, t, u, 1e-12);
        worst = std::max({worst, std::abs(a.phi - b.phi), std::abs(a.psi(0) - b.psi(0))});
        const double r = t * U(rng);
        const ExpAffine first = phi_psi(s, r, u);
        const ExpAffine second = phi_psi(s, t - r, first.psi);
        flow = std::max({flow, std::abs(a.phi - first.phi - second.phi), std::abs(a.psi(0) - second.psi(0))});
    }
    return {worst < 1e-8 && flow < 1e-9,
            "closed form vs ODE " + fmt("%.2g", worst) + " (tol 1e-8), flow residual " + fmt("%.2g", flow) + " (tol 1e-9)"};
}

Outcome martingale_positivity() {
    const ModelParams m = fx::toy_model();
    std::vector<Vec> ws(m.u_fine.begin(), m.u_fine.end());
    for (const std::string x : {"3m", "6m"})
        for (int k = 0; k < m.grid(x).n_points; ++k) ws.push_back(m.vk(x, k));
    const double t = 2.0;
    std::vector<ExpAffine> es;
    for (const Vec& w : ws) es.push_back(phi_psi(m.spec, m.terminal - t, w));
    const auto est = mc_expectation(m.spec, big_sim(100000, 7003), {t}, static_cast<int>(ws.size()),
                                    [&](const std::vector<Vec>& x, double* out) {
                                        for (std::size_t i = 0; i < es.size(); ++i)
                                            out[i] = std::exp(es[i].phi + es[i].psi.dot(x[0]));
                                    });
    int misses = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        const double z = est[i].std_error > 0.0 ? std::abs(est[i].mean - m.m0(ws[i])) / est[i].std_error : 0.0;
        worst = std::max(worst, z);
        misses += z > 3.0;
    }
    const std::vector<double> dates{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    const auto paths = simulate(m.spec, big_sim(10000, 7004), dates);
    long violations = 0, checked = 0;
    for (const auto& p : paths)
        for (std::size_t d = 0; d < dates.size(); ++d)
            for (const std::string x : {"3m", "6m"}) {
                const TenorGrid& g = m.grid(x);
                for (int k = 1; k <= g.n_points; ++k) {
                    if (g.date(k - 1) < dates[d] - 1e-12) continue;
                    const double F = ois_rate(m, x, k, dates[d], p[d]);
                    const double L = libor_rate(m, x, k, dates[d], p[d]);
                    violations += F < 0.0 || L < 0.0 || L - F < 0.0;
                    ++checked;
                }
            }
    return {misses == 0 && violations == 0,
            std::to_string(ws.size()) + " martingales, worst " + fmt("%.2f", worst) + " SE; " +
                std::to_string(violations) + " sign violations in " + std::to_string(checked) + " sampled F, L, S"};
}

double sample_corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

ModelParams disjoint_model() {
    ProcessSpec s;
    s.factors = {{FactorKind::cirj, 0.5, 0.1, 1.53, 0.266, 0.0, 0.0},
                 {FactorKind::cirj, 0.8, 0.1, 0.8, 0.3, 0.05, 0.2},
                 {FactorKind::cirj, 0.8, 0.1, 0.8, 0.31, 0.05, 0.2}};
    const NelsonSiegelParams ois{0.02, -0.015, 0.01, 0.5}, c6{0.024, -0.015, 0.01, 0.5};
    const CurveSet c = build_curveset(ois, {{"6m", c6}}, {{"6m", make_grid(0.5, 0.25, 3.0)}});
    FitOptions o;
    o.enforce_ordering = false;
    return build_model(s, c, FactorLayout(2, 0.0065, {{"6m", 0.0065}}), o);
}

Outcome terminal_correlations() {
    const ModelParams m = fx::toy_model();
    const double T = 2.0;
    const std::vector<std::pair<RateIndex, RateIndex>> pairs{
        {{"6m", 5}, {"6m", 6}}, {{"6m", 5}, {"6m", 8}}, {{"6m", 6}, {"6m", 9}}, {{"3m", 9}, {"6m", 5}},
        {{"3m", 9}, {"3m", 16}}, {{"3m", 12}, {"6m", 8}}, {{"3m", 10}, {"3m", 11}}};
    const auto paths = simulate(m.spec, big_sim(100000, 7005), {T});
    int within = 0;
    double worst = 0.0;
    for (const auto& [a, b] : pairs) {
        std::vector<double> la, lb;
        la.reserve(paths.size());
        lb.reserve(paths.size());
        for (const auto& p : paths) {
            la.push_back(libor_rate(m, a.tenor, a.k, T, p[0]));
            lb.push_back(libor_rate(m, b.tenor, b.k, T, p[0]));
        }
        const double rho = terminal_correlation(m, a, b, T).value;
        const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(paths.size()));
        const double z = std::abs(sample_corr(la, lb) - rho) / se;
        worst = std::max(worst, z);
        within += z <= 3.0;
    }
    const double zero = std::abs(terminal_correlation(disjoint_model(), {"6m", 2}, {"6m", 4}, 0.5).value);
    const bool ok = within == static_cast<int>(pairs.size()) && within >= 6 && zero < 1e-12;
    return {ok, std::to_string(within) + "/" + std::to_string(pairs.size()) + " pairs within 3 SE (worst " +
                    fmt("%.2f", worst) + " SE); disjoint-factor value " + fmt("%.2g", zero)};
}

Outcome caplet_fourier() {
    const ModelParams m = fx::toy_model();
    const int k = 8;
    const double atm = libor_rate(m, "6m", k, 0.0, m.spec.x0());
    std::vector<double> strikes;
    for (double f : {0.6, 0.9, 1.2, 1.6, 2.0}) strikes.push_back(f * atm);
    const auto mc = mc_caplets(m, "6m", k, strikes, big_sim(1000000, 7006));
    double worst = 0.0;
    for (std::size_t i = 0; i < strikes.size(); ++i)
        worst = std::max(worst, std::abs(caplet_price(m, {"6m", k, strikes[i], {}}) - mc[i].mean) / mc[i].std_error);
    QuadConfig q;
    q.abs_tol = 1e-12;
    double spread = 0.0;
    for (double K : strikes) {
        std::vector<double> p;
        for (double R : {1.2, 1.5, 2.5}) p.push_back(caplet_price(m, {"6m", k, K, R}, q));
        const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
        spread = std::max(spread, (*hi - *lo) / std::abs(*lo));
    }
    return {worst <= 3.0 && spread < 1e-9, "worst Fourier-MC gap " + fmt("%.2f", worst) +
                                               " SE over 60%-200% of ATM; damping spread " + fmt("%.2g", spread) +
                                               " relative (tol 1e-9)"};
}

Outcome calibration_round_trip() {
    ProcessSpec s;
    s.factors.push_back({FactorKind::cirj, 0.5, 0.1, 1.53, 0.266, 0.0, 0.0});
    for (int i = 1; i <= 10; ++i) s.factors.push_back({FactorKind::cirj, 0.8, 0.1, 0.8, 0.3 + 0.01 * i, 0.05, 0.2});
    const NelsonSiegelParams ois{0.02, -0.015, 0.01, 0.5}, c6{0.024, -0.015, 0.01, 0.5};
    const CurveSet cs = build_curveset(ois, {{"6m", c6}}, {{"6m", make_grid(0.5, 0.5, 10.5)}});
    const FactorLayout lay(10, 0.0065, {{"6m", 0.0075}});
    const ModelParams truth = build_model(s, cs, lay);
    std::vector<int> mats;
    for (int i = 1; i <= 10; ++i) mats.push_back(i);
    std::vector<double> mult;
    for (int j = 0; j < 14; ++j) mult.push_back(0.6 + 1.4 * j / 13.0);
    const CapletSurface surf = synthetic_surface(truth, {"6m"}, mats, mult);
    ProcessSpec start = s;
    for (std::size_t i = 1; i < start.factors.size(); ++i) {
        FactorSpec& f = start.factors[i];
        f.x0 *= 1.3;
        f.lambda *= 0.7;
        f.theta *= 1.2;
        f.eta *= 0.8;
        f.nu = 0.1;
        f.mu = 0.1;
    }
    CalibrationOptions o;
    o.strict = false;
    const CalibrationResult r = calibrate_sequential(surf, lay, start, cs, o);
    double worst = 0.0;
    for (const MaturityFit& f : r.fits) worst = std::max(worst, f.rms);
    return {r.fits.size() == 10 && worst < 1e-3,
            std::to_string(surf.quotes.size()) + " quotes, worst maturity RMS " + fmt("%.2g", worst) +
                " vol (tolerance 1e-3)"};
}

Outcome negative_rates() {
    ProcessSpec s;
    s.factors = {{FactorKind::ou, 1.0, 0.3, 1.0, 0.01, 0.0, 0.0}, {FactorKind::cirj, 0.5, 0.2, 0.5, 0.1, 0.05, 0.1}};
    const NelsonSiegelParams ois{-0.005, 0.0, 0.0, 1.0}, c3{-0.003, 0.0, 0.0, 1.0}, c6{-0.001, 0.0, 0.0, 1.0};
    const CurveSet c = build_curveset(ois, {{"3m", c3}, {"6m", c6}},
                                      {{"3m", make_grid(0.25, 0.25, 3.0)}, {"6m", make_grid(0.5, 0.25, 3.0)}});
    const ModelParams m = build_negative_rate_model(s, c);
    const std::vector<double> dates{0.5, 1.0, 1.5, 2.0, 2.5};
    const auto paths = simulate(m.spec, big_sim(10000, 7007), dates);
    long order = 0, sign = 0, checked = 0;
    for (const auto& p : paths)
        for (std::size_t d = 0; d < dates.size(); ++d)
            for (int k = 1; k <= m.grid("6m").n_points; ++k) {
                if (m.grid("6m").date(k - 1) < dates[d] - 1e-12) continue;
                // The 3m period starting on the same date as the 6m period.
                const int j = 2 * k - 1;
                const double r3 = (spreads(m, "3m", j, dates[d], p[d]).multiplicative - 1.0) / 0.25;
                const double r6 = (spreads(m, "6m", k, dates[d], p[d]).multiplicative - 1.0) / 0.5;
                order += r3 > r6;
                sign += r3 < 0.0 || r6 < 0.0;
                ++checked;
            }
    return {order == 0 && sign == 0, "fit ok; " + std::to_string(order) + " ordering and " + std::to_string(sign) +
                                         " sign violations in " + std::to_string(checked) + " aligned pairs"};
}

}  // namespace

int main() {
    criterion(1, "u/v table reproduction", 10, table_reproduction);
    criterion(2, "exercise boundary coefficients", 5, boundary_coefficients);
    criterion(3, "swaption prices", 300, swaption_prices);
    criterion(4, "basis swaption prices", 300, basis_prices);
    criterion(5, "Riccati oracle", 10, riccati_oracle);
    criterion(6, "martingales and positivity", 0, martingale_positivity);
    criterion(7, "terminal correlations", 0, terminal_correlations);
    criterion(8, "caplet Fourier vs MC", 0, caplet_fourier);
    criterion(9, "calibration round trip", 900, calibration_round_trip);
    criterion(10, "negative-rates variant", 0, negative_rates);
    return failures == 0 ? 0 : 1;
}
