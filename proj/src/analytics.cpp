#include "alm/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "alm/pricing.hpp"

namespace alm {

namespace {

void require_diffusion(const ProcessSpec& spec) {
    for (const FactorSpec& f : spec.factors)
        if (f.kind == FactorKind::cirj && f.nu > 0.0 && f.mu > 0.0)
            throw UnsupportedDriverError("volatility structures are defined for diffusion drivers only");
}

void check_index(const ModelParams& m, const RateIndex& r, double t) {
    const TenorGrid& g = m.grid(r.tenor);
    if (r.k < 1 || r.k > g.n_points) throw IndexError("rate index out of range");
    if (t < 0.0 || t > g.date(r.k - 1) + 1e-12) throw DomainError("date beyond the fixing date");
}

// psi(v_{k-1}) - psi(u_k) at horizon T_N - t, and the matching phi difference.
std::pair<double, Vec> loading(const ModelParams& m, const RateIndex& r, double t) {
    const double tau = m.terminal - t;
    const ExpAffine ev = phi_psi(m.spec, tau, m.vk(r.tenor, r.k - 1));
    const ExpAffine eu = phi_psi(m.spec, tau, m.u(r.tenor, r.k));
    return {ev.phi - eu.phi, ev.psi - eu.psi};
}

Vec weighted(const Vec& psi_diff, const Vec& sigma) { return psi_diff.cwiseProduct(sigma); }

double ratio(double num, double da, double db) {
    if (!(da > 0.0) || !(db > 0.0)) throw DegenerateError("zero volatility in a correlation denominator");
    return std::clamp(num / std::sqrt(da * db), -1.0, 1.0);
}

// Per-factor log Theta_T(z) for a real argument; summed by the caller.
Vec log_theta_terms(const ProcessSpec& spec, double t, const Vec& z) {
    Vec out(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        const FactorSpec& f = spec.factors[static_cast<std::size_t>(i)];
        if (f.kind == FactorKind::cirj && z(i) > 0.0 && !(z(i) < factor_max_u(f, t)))
            throw DomainError("argument outside the admissible set for the terminal correlation");
        const auto [phi, psi] = factor_phi_psi(f, t, cplx(z(i), 0.0));
        out(i) = phi.real() + psi.real() * f.x0;
    }
    return out;
}

}  // namespace

Vec diffusion_loading(const ProcessSpec& spec, const Vec& state) {
    if (state.size() != spec.dim()) throw DomainError("state dimension mismatch");
    Vec s(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        const FactorSpec& f = spec.factors[static_cast<std::size_t>(i)];
        s(i) = f.kind == FactorKind::ou ? f.eta : 2.0 * f.eta * std::sqrt(std::max(state(i), 0.0));
    }
    return s;
}

Vec upsilon(const ModelParams& m, const Vec& w, const Vec& y, double t, const Vec& state) {
    require_diffusion(m.spec);
    const double tau = m.terminal - t;
    const Vec d = phi_psi(m.spec, tau, w).psi - phi_psi(m.spec, tau, y).psi;
    return weighted(d, diffusion_loading(m.spec, state));
}

VolStructure vol_structures(const ModelParams& m, const std::string& tenor, int k, double t,
                            const Vec& state) {
    require_diffusion(m.spec);
    check_index(m, {tenor, k}, t);
    const double d = m.grid(tenor).delta;
    const double F = ois_rate(m, tenor, k, t, state);
    const double L = libor_rate(m, tenor, k, t, state);
    if (F == 0.0 || L == 0.0) throw DegenerateError("zero rate in the volatility prefactor");
    VolStructure v;
    v.gamma = (1.0 + d * F) / (d * F) * upsilon(m, m.u(tenor, k - 1), m.u(tenor, k), t, state);
    v.lambda_vec = (1.0 + d * L) / (d * L) * upsilon(m, m.vk(tenor, k - 1), m.u(tenor, k), t, state);
    return v;
}

CorrelationReport inst_correlation(const ModelParams& m, const RateIndex& a, const RateIndex& b,
                                   double t, const Vec& state) {
    require_diffusion(m.spec);
    check_index(m, a, t);
    check_index(m, b, t);
    const Vec s = diffusion_loading(m.spec, state);
    const Vec la = weighted(loading(m, a, t).second, s);
    const Vec lb = weighted(loading(m, b, t).second, s);
    CorrelationReport r;
    r.kind = CorrelationKind::instantaneous;
    r.x1 = a.tenor;
    r.k1 = a.k;
    r.x2 = b.tenor;
    r.k2 = b.k;
    r.date = t;
    const double r2 = ratio(la.dot(lb), la.squaredNorm(), lb.squaredNorm());
    r.value = (a.tenor == b.tenor && a.k == b.k) ? 1.0 : r2;
    return r;
}

CorrelationReport inst_correlation(const ModelParams& m, const std::string& tenor, int k, int l,
                                   double t, const Vec& state) {
    return inst_correlation(m, RateIndex{tenor, k}, RateIndex{tenor, l}, t, state);
}

CorrelationReport terminal_correlation(const ModelParams& m, const RateIndex& a,
                                       const RateIndex& b, double date) {
    check_index(m, a, date);
    check_index(m, b, date);
    // Order the pair so the result is symmetric bit for bit.
    const bool swap = std::tie(b.tenor, b.k) < std::tie(a.tenor, a.k);
    const RateIndex& p = swap ? b : a;
    const RateIndex& q = swap ? a : b;
    const Vec psi1 = loading(m, p, date).second;
    const Vec psi2 = loading(m, q, date).second;
    const Vec l1 = log_theta_terms(m.spec, date, psi1);
    const Vec l2 = log_theta_terms(m.spec, date, psi2);
    const Vec l11 = log_theta_terms(m.spec, date, 2.0 * psi1);
    const Vec l22 = log_theta_terms(m.spec, date, 2.0 * psi2);
    const Vec l12 = log_theta_terms(m.spec, date, psi1 + psi2);
    // Cov / Theta1 Theta2 = expm1(log Theta12 - log Theta1 - log Theta2), and
    // similarly for the variances; summing per factor keeps independent blocks exactly zero.
    const double c12 = std::expm1((l12 - l1 - l2).sum());
    const double c11 = std::expm1((l11 - 2.0 * l1).sum());
    const double c22 = std::expm1((l22 - 2.0 * l2).sum());
    CorrelationReport r;
    r.kind = CorrelationKind::terminal;
    r.x1 = a.tenor;
    r.k1 = a.k;
    r.x2 = b.tenor;
    r.k2 = b.k;
    r.date = date;
    if (p.tenor == q.tenor && p.k == q.k) {
        if (!(c11 > 0.0)) throw DegenerateError("rate has zero variance at the date");
        r.value = 1.0;
    } else {
        r.value = ratio(c12, c11, c22);
    }
    return r;
}

}  // namespace alm
