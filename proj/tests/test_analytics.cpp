#include <doctest.h>

#include <cmath>

#include "alm/analytics.hpp"
#include "alm/montecarlo.hpp"
#include "fixtures.hpp"

using namespace alm;

namespace {

// Toy model with the jumps of the second factor switched off.
ModelParams diffusion_model() {
    ProcessSpec s = fx::toy_spec();
    s.factors[1].nu = 0.0;
    s.factors[1].mu = 0.0;
    FitOptions o;
    o.enforce_ordering = false;
    return build_model(s, fx::toy_curves(), fx::toy_layout(), o);
}

// Three factors, two maturity blocks, no common-factor spread: rates fixing
// in different years load disjoint factors.
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

}  // namespace

TEST_CASE("instantaneous correlations: unit diagonal, symmetry and bounds") {
    const ModelParams m = diffusion_model();
    const Vec x = m.spec.x0();
    CHECK(inst_correlation(m, "6m", 5, 5, 0.5, x).value == 1.0);
    for (int k = 3; k <= 8; ++k) {
        const double r = inst_correlation(m, "6m", 3, k, 0.5, x).value;
        CHECK(r == inst_correlation(m, "6m", k, 3, 0.5, x).value);
        CHECK(std::abs(r) <= 1.0);
    }
    // Scaling the whole state scales every square-root loading alike.
    const double r0 = inst_correlation(m, RateIndex{"3m", 9}, RateIndex{"6m", 6}, 1.0, x).value;
    Vec y = x;
    y(0) *= 4.0;
    y(1) *= 4.0;
    CHECK(inst_correlation(m, RateIndex{"3m", 9}, RateIndex{"6m", 6}, 1.0, y).value == doctest::Approx(r0).epsilon(1e-12));
}

TEST_CASE("volatility structures follow the rate loadings") {
    const ModelParams m = diffusion_model();
    const Vec x = m.spec.x0();
    const VolStructure v = vol_structures(m, "6m", 6, 1.0, x);
    CHECK(v.gamma.size() == 2);
    CHECK(v.lambda_vec.norm() > 0.0);
    const Vec zero = Vec::Zero(2);
    const VolStructure z = vol_structures(m, "6m", 6, 1.0, zero);
    CHECK(z.gamma.norm() == 0.0);
    CHECK(z.lambda_vec.norm() == 0.0);
    CHECK_THROWS_AS(vol_structures(fx::toy_model(), "6m", 6, 1.0, x), UnsupportedDriverError);
    CHECK_THROWS_AS(vol_structures(m, "6m", 2, 1.0, x), DomainError);
    CHECK_THROWS_AS(inst_correlation(fx::toy_model(), "6m", 3, 4, 0.5, x), UnsupportedDriverError);
}

TEST_CASE("diffusion loadings") {
    ProcessSpec s = fx::toy_spec();
    s.factors[0].kind = FactorKind::ou;
    Vec x(2);
    x << -0.5, 4.0;
    const Vec l = diffusion_loading(s, x);
    CHECK(l(0) == doctest::Approx(0.266));
    CHECK(l(1) == doctest::Approx(2.0 * 0.4640 * 2.0));
}

TEST_CASE("terminal correlation: unit diagonal, symmetry and disjoint factors") {
    const ModelParams m = fx::toy_model();
    CHECK(terminal_correlation(m, {"6m", 6}, {"6m", 6}, 2.0).value == 1.0);
    const double ab = terminal_correlation(m, {"3m", 10}, {"6m", 6}, 2.0).value;
    const double ba = terminal_correlation(m, {"6m", 6}, {"3m", 10}, 2.0).value;
    CHECK(ab == ba);
    CHECK(ab > 0.0);
    CHECK(ab <= 1.0);
    const ModelParams d = disjoint_model();
    CHECK(std::abs(terminal_correlation(d, {"6m", 2}, {"6m", 4}, 0.5).value) < 1e-12);
    CHECK(terminal_correlation(d, {"6m", 3}, {"6m", 4}, 0.5).value > 0.0);
    CHECK_THROWS_AS(terminal_correlation(m, {"6m", 2}, {"6m", 6}, 2.0), DomainError);
}

TEST_CASE("terminal correlation agrees with sample correlations") {
    const ModelParams m = fx::toy_model();
    const double T = 2.0;
    const std::vector<std::pair<RateIndex, RateIndex>> pairs{
        {{"6m", 5}, {"6m", 6}}, {{"6m", 5}, {"6m", 8}}, {{"3m", 9}, {"6m", 5}}, {{"3m", 9}, {"3m", 16}}};
    SimConfig cfg;
    cfg.paths = 20000;
    cfg.seed = 51;
    const auto paths = simulate(m.spec, cfg, {T});
    for (const auto& [a, b] : pairs) {
        std::vector<double> la, lb;
        for (const auto& p : paths) {
            la.push_back(libor_rate(m, a.tenor, a.k, T, p[0]));
            lb.push_back(libor_rate(m, b.tenor, b.k, T, p[0]));
        }
        const double rho = terminal_correlation(m, a, b, T).value;
        const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(paths.size()));
        CHECK(std::abs(sample_corr(la, lb) - rho) < 4.0 * se);
    }
}
