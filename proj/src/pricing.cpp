#include "alm/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "alm/montecarlo.hpp"

namespace alm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;
constexpr double kProbSlack = 1e-10;

double log_mt(const ModelParams& m, const Vec& w, double t, const Vec& x_t) {
    const ExpAffine e = phi_psi(m.spec, m.terminal - t, w);
    return e.phi + e.psi.dot(x_t);
}

void check_rate_time(const ModelParams& m, const std::string& x, int k, double t) {
    const TenorGrid& g = m.grid(x);
    if (k < 1 || k > g.n_points) throw IndexError("rate index out of range");
    if (t < 0.0 || t > g.date(k - 1) + 1e-12) throw DomainError("rate requires t <= T_{k-1}");
}

// Variance of <b, X_t> under the terminal measure.
double linear_variance(const ProcessSpec& spec, const Vec& b, double t) {
    double v = 0.0;
    for (int i = 0; i < spec.dim(); ++i)
        if (b(i) != 0.0) v += b(i) * b(i) * factor_variance(spec.factors[i], t);
    return v;
}

Vec mean_state(const ProcessSpec& spec, double t) {
    Vec y(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) y(i) = factor_mean(spec.factors[i], t);
    return y;
}

bool factor_random(const FactorSpec& f) {
    if (f.eta > 0.0) return true;
    return f.kind == FactorKind::cirj && f.nu > 0.0 && f.mu > 0.0;
}

double panel_scale(double sd) {
    if (!(sd > 0.0) || !std::isfinite(sd)) return 1.0;
    return std::clamp(1.0 / sd, 1e-3, 1e4);
}

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

struct Piece {
    double est, err;
};

Piece gk(const std::function<double(double)>& f, double a, double b) {
    Piece p{0.0, 0.0};
    p.est = GK::integrate(f, a, b, 0, 0.0, &p.err);
    if (!std::isfinite(p.est)) throw IntegrationError("non-finite integrand");
    return p;
}

// A segment is accepted only when the Kronrod error estimate is small and the
// whole-segment rule agrees with the sum over its halves. The second test
// catches oscillations aliased by both node sets.
double adaptive_segment(const std::function<double(double)>& f, double a, double b, const Piece& whole,
                        double tol, double rel_tol, int depth, double& err_total) {
    const double mid = 0.5 * (a + b);
    const Piece l = gk(f, a, mid), r = gk(f, mid, b);
    const double halves = l.est + r.est;
    const double gap = std::abs(whole.est - halves);
    const double err = std::max(gap, l.err + r.err);
    if (err <= std::max(tol, rel_tol * std::abs(halves)) || depth <= 0) {
        err_total += err;
        return halves;
    }
    return adaptive_segment(f, a, mid, l, 0.5 * tol, rel_tol, depth - 1, err_total) +
           adaptive_segment(f, mid, b, r, 0.5 * tol, rel_tol, depth - 1, err_total);
}

// Tail of Im(exp(l(z))) / z over [b, inf). The modulus a(z) = |exp(l)| / z
// decays at least like 1/z^2 beyond the bulk, so b a(b) bounds the tail; when
// the phase rate w = d Im l / dz keeps its sign on [b, 2b], one integration by
// parts gives the sharper 2 a(b) / |w|.
double oscillating_tail(const std::function<cplx(double)>& log_cf, double b) {
    const double a = std::exp(log_cf(b).real()) / b;
    auto rate = [&](double z) {
        const double h = 1e-6 * z;
        return (log_cf(z + h).imag() - log_cf(z - h).imag()) / (2.0 * h);
    };
    const double w1 = rate(b), w2 = rate(2.0 * b);
    double bound = b * a;
    if (w1 * w2 > 0.0) bound = std::min(bound, 2.0 * a / std::min(std::abs(w1), std::abs(w2)));
    return bound;
}

}  // namespace

double integrate_half_line(const std::function<double(double)>& f,
                           const std::function<double(double)>& tail, double scale,
                           const QuadConfig& cfg) {
    double total = 0.0, err_total = 0.0;
    double a = 0.0, b = scale;
    for (int panel = 0; panel < cfg.max_panels; ++panel) {
        const double part =
            adaptive_segment(f, a, b, gk(f, a, b), cfg.abs_tol, cfg.rel_tol, cfg.max_depth, err_total);
        total += part;
        if (panel >= 2 && std::abs(part) < cfg.abs_tol && tail(b) < cfg.abs_tol) {
            if (err_total > 1e3 * cfg.abs_tol)
                throw IntegrationError("quadrature error estimate above tolerance");
            return total;
        }
        a = b;
        b *= 2.0;
    }
    throw IntegrationError("integrand did not decay within the panel budget");
}

double ois_rate(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t) {
    check_rate_time(m, x, k, t);
    const double d = m.grid(x).delta;
    return std::expm1(log_mt(m, m.u(x, k - 1), t, x_t) - log_mt(m, m.u(x, k), t, x_t)) / d;
}

double libor_rate(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t) {
    check_rate_time(m, x, k, t);
    const double d = m.grid(x).delta;
    return std::expm1(log_mt(m, m.vk(x, k - 1), t, x_t) - log_mt(m, m.u(x, k), t, x_t)) / d;
}

Spreads spreads(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t) {
    const double d = m.grid(x).delta;
    const double F = ois_rate(m, x, k, t, x_t);
    const double L = libor_rate(m, x, k, t, x_t);
    return {L - F, (1.0 + d * L) / (1.0 + d * F)};
}

double caplet_damping_limit(const ModelParams& m, const std::string& x, int k) {
    const TenorGrid& g = m.grid(x);
    if (k < 1 || k > g.n_points) throw IndexError("caplet index out of range");
    const double t = g.date(k - 1);
    const double tau = m.terminal - t;
    const ExpAffine eu = phi_psi(m.spec, tau, m.u(x, k));
    const ExpAffine ev = phi_psi(m.spec, tau, m.vk(x, k - 1));
    const Vec B = ev.psi - eu.psi;
    double lim = kInf;
    for (int i = 0; i < m.dim(); ++i) {
        if (!(B(i) > 0.0)) continue;
        const double umax = factor_max_u(m.spec.factors[i], t);
        lim = std::min(lim, (umax - eu.psi(i)) / B(i));
    }
    return lim;
}

double caplet_price(const ModelParams& m, const CapletSpec& c, const QuadConfig& q) {
    const TenorGrid& g = m.grid(c.tenor);
    if (c.k < 1 || c.k > g.n_points) throw IndexError("caplet index out of range");
    const double Kx = 1.0 + g.delta * c.strike;
    if (!(Kx > 0.0)) throw DomainError("strike below -1/delta");
    const double t = g.date(c.k - 1);
    const double tau = m.terminal - t;
    const Vec& uk = m.u(c.tenor, c.k);
    const ExpAffine eu = phi_psi(m.spec, tau, uk);
    const ExpAffine ev = phi_psi(m.spec, tau, m.vk(c.tenor, c.k - 1));
    const double A = ev.phi - eu.phi;
    const Vec B = ev.psi - eu.psi;

    const double lim = caplet_damping_limit(m, c.tenor, c.k);
    double R;
    if (c.damping) {
        R = *c.damping;
        if (!(R > 1.0) || !(R < lim)) throw DomainError("damping outside the admissible strip");
    } else {
        if (!(lim > 1.0)) throw DomainError("admissible strip does not meet (1, inf)");
        R = lim > 1.5 ? 1.5 : 1.0 + 0.5 * (lim - 1.0);
    }
    const ForwardMgf mgf(m.spec, uk, t, m.terminal, m.spec.x0());
    const double lnK = std::log(Kx);
    const CVec Bc = B.cast<cplx>();
    auto log_integrand = [&](double w) {
        const cplx z(R, -w);
        return (1.0 - z) * lnK + z * A + mgf.log_value(z * Bc) - std::log(z * (z - 1.0));
    };
    auto f = [&](double w) { return std::exp(log_integrand(w)).real(); };
    // The modulus decays at least like 1/w^2, so b |f(b)| bounds the tail.
    auto tail = [&](double w) { return w * std::exp(log_integrand(w).real()); };
    const double scale = panel_scale(std::sqrt(linear_variance(m.spec, B, t)));
    const double integral = integrate_half_line(f, tail, scale, q);
    return m.discount(c.tenor, c.k) / kPi * integral;
}

double ExerciseFunction::operator()(const Vec& y) const {
    double s = 0.0;
    for (const ExpTerm& e : terms) s += e.coef * std::exp(e.phi + e.psi.dot(y));
    return s;
}

Vec ExerciseFunction::gradient(const Vec& y) const {
    Vec gr = Vec::Zero(y.size());
    for (const ExpTerm& e : terms) gr += e.coef * std::exp(e.phi + e.psi.dot(y)) * e.psi;
    return gr;
}

ExerciseFunction swaption_exercise_fn(const ModelParams& m, const SwaptionSpec& s) {
    const TenorGrid& g = m.grid(s.tenor);
    if (s.p < 0 || s.q <= s.p || s.q > g.n_points) throw IndexError("swaption requires 0 <= p < q <= N");
    const double Kx = 1.0 + g.delta * s.strike;
    ExerciseFunction f;
    f.date = g.date(s.p);
    const double tau = m.terminal - f.date;
    for (int i = s.p + 1; i <= s.q; ++i) {
        const ExpAffine ev = phi_psi(m.spec, tau, m.vk(s.tenor, i - 1));
        const ExpAffine eu = phi_psi(m.spec, tau, m.u(s.tenor, i));
        f.terms.push_back({1.0, ev.phi, ev.psi});
        f.terms.push_back({-Kx, eu.phi, eu.psi});
    }
    return f;
}

ExerciseFunction basis_exercise_fn(const ModelParams& m, const BasisSwaptionSpec& s) {
    const BasisLegs& l = s.legs;
    const TenorGrid& g1 = m.grid(l.x1);
    const TenorGrid& g2 = m.grid(l.x2);
    if (l.p1 < 0 || l.q1 <= l.p1 || l.q1 > g1.n_points || l.p2 < 0 || l.q2 <= l.p2 ||
        l.q2 > g2.n_points)
        throw IndexError("basis swaption indices out of range");
    if (g1.map_to_fine(l.p1) != g2.map_to_fine(l.p2) || g1.map_to_fine(l.q1) != g2.map_to_fine(l.q2))
        throw AlignmentError("basis swaption legs do not share start and end dates");
    const double Sx = 1.0 - g1.delta * s.spread;
    ExerciseFunction f;
    f.date = g1.date(l.p1);
    const double tau = m.terminal - f.date;
    auto add = [&](double coef, const Vec& w) {
        const ExpAffine e = phi_psi(m.spec, tau, w);
        f.terms.push_back({coef, e.phi, e.psi});
    };
    for (int i = l.p2 + 1; i <= l.q2; ++i) {
        add(1.0, m.vk(l.x2, i - 1));
        add(-1.0, m.u(l.x2, i));
    }
    for (int i = l.p1 + 1; i <= l.q1; ++i) {
        add(-1.0, m.vk(l.x1, i - 1));
        add(Sx, m.u(l.x1, i));
    }
    return f;
}

namespace {

// Zero of x -> f(y with y(j) = x), bracketed outwards from center.
double solve_slice(const ExerciseFunction& f, Vec y, int j, double center, double width) {
    auto h = [&](double x) {
        y(j) = x;
        return f(y);
    };
    double lo = center, hi = center;
    double flo = h(lo), fhi = flo;
    if (flo == 0.0) return center;
    double w = std::max(width, 1e-6);
    for (int it = 0; it < 80; ++it) {
        const double nlo = center - w, nhi = center + w;
        const double fnlo = h(nlo), fnhi = h(nhi);
        if (std::isfinite(fnhi) && (fnhi > 0.0) != (fhi > 0.0)) {
            lo = hi;
            flo = fhi;
            hi = nhi;
            fhi = fnhi;
            break;
        }
        if (std::isfinite(fnlo) && (fnlo > 0.0) != (flo > 0.0)) {
            hi = lo;
            fhi = flo;
            lo = nlo;
            flo = fnlo;
            break;
        }
        if (std::isfinite(fnhi)) { hi = nhi; fhi = fnhi; }
        if (std::isfinite(fnlo)) { lo = nlo; flo = fnlo; }
        w *= 2.0;
        if (it == 79 || w > 1e6) throw BoundaryError("exercise function has no zero on the slice");
    }
    if ((flo > 0.0) == (fhi > 0.0)) throw BoundaryError("exercise function has no zero on the slice");
    if (lo > hi) {
        std::swap(lo, hi);
        std::swap(flo, fhi);
    }
    std::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(h, lo, hi, flo, fhi,
                                               boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

BoundaryCoeffs orient_and_scale(const ExerciseFunction& f, const Vec& normal, double intercept,
                                const Vec& at, int norm_idx) {
    BoundaryCoeffs c{intercept, normal, ExerciseRegime::boundary};
    if (f.gradient(at).dot(c.direction) < 0.0) {
        c.intercept = -c.intercept;
        c.direction = -c.direction;
    }
    double s = std::abs(c.direction(norm_idx));
    if (!(s > 0.0)) s = c.direction.norm();
    if (!(s > 0.0)) throw BoundaryError("degenerate boundary direction");
    c.intercept /= s;
    c.direction /= s;
    return c;
}

}  // namespace

BoundaryCoeffs fit_linear_boundary(const ModelParams& m, const ExerciseFunction& f,
                                   BoundaryMethod method, const BoundaryOptions& o) {
    const int d = m.dim();
    if (o.designated < 0 || o.designated >= d || o.solved < 0 || o.solved >= d ||
        o.designated == o.solved)
        throw ConfigError("invalid boundary coordinates");
    const int norm_idx = o.normalize >= 0 ? o.normalize : o.solved;
    if (norm_idx >= d) throw ConfigError("invalid normalization coordinate");
    const double t = f.date;
    if (method == BoundaryMethod::quantile2d) {
        for (int i = 0; i < d; ++i) {
            if (i == o.designated || i == o.solved) continue;
            for (const ExpTerm& e : f.terms)
                if (e.psi(i) != 0.0)
                    throw ConfigError("quantile boundary needs exactly two effective factors");
        }
        const FactorSpec& fd = m.spec.factors[static_cast<std::size_t>(o.designated)];
        const FactorSpec& fs = m.spec.factors[static_cast<std::size_t>(o.solved)];
        const double mean = factor_mean(fd, t);
        const double sd = std::sqrt(std::max(factor_variance(fd, t), 0.0));
        boost::math::normal_distribution<double> nd(mean, sd > 0.0 ? sd : 1e-300);
        const double ql = sd > 0.0 ? boost::math::quantile(nd, o.q_lo) : mean;
        const double qh = sd > 0.0 ? boost::math::quantile(nd, o.q_hi) : mean;
        if (!(qh > ql)) throw BoundaryError("designated factor has no spread at the exercise date");
        Vec y = mean_state(m.spec, t);
        const double cs = factor_mean(fs, t);
        const double ws = std::sqrt(std::max(factor_variance(fs, t), 1e-12));
        y(o.designated) = ql;
        const double xl = solve_slice(f, y, o.solved, cs, ws);
        y(o.designated) = qh;
        const double xu = solve_slice(f, y, o.solved, cs, ws);
        Vec normal = Vec::Zero(d);
        normal(o.designated) = -(xu - xl);
        normal(o.solved) = qh - ql;
        Vec pl = y;
        pl(o.designated) = ql;
        pl(o.solved) = xl;
        return orient_and_scale(f, normal, -normal.dot(pl), pl, norm_idx);
    }
    // Regression: states close to the boundary, total least squares.
    SimConfig sc;
    sc.paths = o.presample;
    sc.seed = o.seed;
    sc.steps_per_year = o.steps_per_year;
    const auto paths = simulate(m.spec, sc, {t});
    std::vector<double> absf(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) absf[i] = std::abs(f(paths[i][0]));
    std::vector<double> sorted = absf;
    const std::size_t cut = std::max<std::size_t>(static_cast<std::size_t>(d) + 1, sorted.size() / 10);
    if (sorted.size() < cut) throw BoundaryError("presample too small");
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(cut) - 1, sorted.end());
    const double thr = sorted[cut - 1];
    std::vector<Vec> near;
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const double fv = f(paths[i][0]);
        if (fv > 0.0) pos = true;
        else neg = true;
        if (absf[i] <= thr) near.push_back(paths[i][0]);
    }
    if (!(pos && neg)) throw BoundaryError("exercise function does not change sign on the presample");
    Eigen::MatrixXd P(static_cast<Eigen::Index>(near.size()), d);
    for (std::size_t i = 0; i < near.size(); ++i) P.row(static_cast<Eigen::Index>(i)) = near[i].transpose();
    const Vec centroid = P.colwise().mean().transpose();
    P.rowwise() -= centroid.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeThinV);
    const Vec normal = svd.matrixV().col(d - 1);
    return orient_and_scale(f, normal, -normal.dot(centroid), centroid, norm_idx);
}

BoundaryCoeffs boundary_or_regime(const ModelParams& m, const ExerciseFunction& f,
                                  BoundaryMethod method, const BoundaryOptions& o) {
    try {
        return fit_linear_boundary(m, f, method, o);
    } catch (const BoundaryError&) {
        BoundaryCoeffs c;
        c.direction = Vec::Zero(m.dim());
        const bool ex = f(mean_state(m.spec, f.date)) >= 0.0;
        c.regime = ex ? ExerciseRegime::always : ExerciseRegime::never;
        c.intercept = ex ? 1.0 : -1.0;
        return c;
    }
}

bool has_continuous_law(const ProcessSpec& spec) {
    return std::any_of(spec.factors.begin(), spec.factors.end(), factor_random);
}

double exercise_probability(const ModelParams& m, const Vec& w, double t, const BoundaryCoeffs& c,
                            const QuadConfig& q) {
    if (c.regime == ExerciseRegime::always) return 1.0;
    if (c.regime == ExerciseRegime::never) return 0.0;
    bool loaded = false;
    for (int i = 0; i < m.dim(); ++i)
        if (c.direction(i) != 0.0 && factor_random(m.spec.factors[static_cast<std::size_t>(i)]))
            loaded = true;
    if (!loaded)
        throw UnsupportedDriverError("boundary loads no random factor: the state law is not continuous");
    const ForwardMgf mgf(m.spec, w, t, m.terminal, m.spec.x0());
    const CVec Bc = c.direction.cast<cplx>();
    const cplx I(0.0, 1.0);
    auto log_cf = [&](double z) { return I * z * c.intercept + mgf.log_value(I * z * Bc); };
    auto f = [&](double z) { return std::exp(log_cf(z)).imag() / z; };
    auto tail = [&](double z) { return oscillating_tail(log_cf, z); };
    const double scale = panel_scale(std::sqrt(linear_variance(m.spec, c.direction, t)));
    const double p = 0.5 + integrate_half_line(f, tail, scale, q) / kPi;
    if (p < -kProbSlack || p > 1.0 + kProbSlack)
        throw IntegrationError("Gil-Pelaez probability outside [0, 1]");
    return std::clamp(p, 0.0, 1.0);
}

double swaption_price_approx(const ModelParams& m, const SwaptionSpec& s, const BoundaryCoeffs& c,
                             const QuadConfig& q) {
    const TenorGrid& g = m.grid(s.tenor);
    if (s.p < 0 || s.q <= s.p || s.q > g.n_points) throw IndexError("swaption requires 0 <= p < q <= N");
    if (!has_continuous_law(m.spec))
        throw UnsupportedDriverError("deterministic driver: the exercise probability is not continuous");
    const double Kx = 1.0 + g.delta * s.strike;
    const double t = g.date(s.p);
    double price = 0.0;
    for (int i = s.p + 1; i <= s.q; ++i) {
        const Vec& v = m.vk(s.tenor, i - 1);
        const Vec& u = m.u(s.tenor, i);
        price += m.terminal_discount * m.m0(v) * exercise_probability(m, v, t, c, q);
        price -= Kx * m.discount(s.tenor, i) * exercise_probability(m, u, t, c, q);
    }
    return price;
}

double basis_swaption_price_approx(const ModelParams& m, const BasisSwaptionSpec& s,
                                   const BoundaryCoeffs& c, const QuadConfig& q) {
    const BasisLegs& l = s.legs;
    basis_exercise_fn(m, s);  // index and alignment checks
    if (!has_continuous_law(m.spec))
        throw UnsupportedDriverError("deterministic driver: the exercise probability is not continuous");
    const double Sx = 1.0 - m.grid(l.x1).delta * s.spread;
    const double t = m.grid(l.x1).date(l.p1);
    double price = 0.0;
    for (int i = l.p2 + 1; i <= l.q2; ++i) {
        const Vec& v = m.vk(l.x2, i - 1);
        price += m.terminal_discount * m.m0(v) * exercise_probability(m, v, t, c, q);
        price -= m.discount(l.x2, i) * exercise_probability(m, m.u(l.x2, i), t, c, q);
    }
    for (int i = l.p1 + 1; i <= l.q1; ++i) {
        const Vec& v = m.vk(l.x1, i - 1);
        price -= m.terminal_discount * m.m0(v) * exercise_probability(m, v, t, c, q);
        price += Sx * m.discount(l.x1, i) * exercise_probability(m, m.u(l.x1, i), t, c, q);
    }
    return price;
}

double model_annuity(const ModelParams& m, const std::string& x, int p, int q) {
    const TenorGrid& g = m.grid(x);
    if (p < 0 || q <= p || q > g.n_points) throw IndexError("annuity requires 0 <= p < q <= N");
    double a = 0.0;
    for (int i = p + 1; i <= q; ++i) a += g.delta * m.discount(x, i);
    return a;
}

double model_swap_value(const ModelParams& m, const std::string& x, int p, int q, double K) {
    const TenorGrid& g = m.grid(x);
    const Vec x0 = m.spec.x0();
    double v = 0.0;
    for (int i = p + 1; i <= q; ++i) v += g.delta * m.discount(x, i) * (libor_rate(m, x, i, 0.0, x0) - K);
    return v;
}

double model_swap_rate(const ModelParams& m, const std::string& x, int p, int q) {
    return model_swap_value(m, x, p, q, 0.0) / model_annuity(m, x, p, q);
}

double model_basis_swap_value(const ModelParams& m, const BasisSwaptionSpec& s) {
    const BasisLegs& l = s.legs;
    const Vec x0 = m.spec.x0();
    const double d1 = m.grid(l.x1).delta, d2 = m.grid(l.x2).delta;
    double v = 0.0;
    for (int i = l.p2 + 1; i <= l.q2; ++i) v += d2 * m.discount(l.x2, i) * libor_rate(m, l.x2, i, 0.0, x0);
    for (int i = l.p1 + 1; i <= l.q1; ++i)
        v -= d1 * m.discount(l.x1, i) * (libor_rate(m, l.x1, i, 0.0, x0) + s.spread);
    return v;
}

double black76_price(double vol, double forward, double strike, double expiry, double annuity) {
    if (!(forward > 0.0) || !(strike > 0.0) || !(expiry >= 0.0) || !(annuity > 0.0) || vol < 0.0)
        throw BoundsError("Black76 requires positive forward, strike and annuity");
    const double sd = vol * std::sqrt(expiry);
    if (sd == 0.0) return annuity * std::max(forward - strike, 0.0);
    const boost::math::normal_distribution<double> n;
    const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
    return annuity * (forward * boost::math::cdf(n, d1) - strike * boost::math::cdf(n, d1 - sd));
}

double black76_implied_vol(double price, double forward, double strike, double expiry,
                           double annuity) {
    if (!(forward > 0.0) || !(strike > 0.0) || !(expiry > 0.0) || !(annuity > 0.0))
        throw BoundsError("Black76 requires positive forward, strike, expiry and annuity");
    const double intrinsic = annuity * std::max(forward - strike, 0.0);
    const double upper = annuity * forward;
    const double slack = 1e-15 * upper;
    if (!(price >= intrinsic - slack) || !(price < upper))
        throw BoundsError("price outside the Black76 no-arbitrage bounds");
    if (price <= intrinsic + slack) return 0.0;
    const boost::math::normal_distribution<double> n;
    const double sqt = std::sqrt(expiry);
    double hi = 1.0;
    while (black76_price(hi, forward, strike, expiry, annuity) < price) {
        hi *= 2.0;
        if (hi > 1e4) throw BoundsError("implied volatility above search range");
    }
    auto fn = [&](double s) {
        const double v = black76_price(s, forward, strike, expiry, annuity) - price;
        const double sd = std::max(s * sqt, 1e-300);
        const double d1 = (std::log(forward / strike) + 0.5 * sd * sd) / sd;
        return std::make_pair(v, annuity * forward * boost::math::pdf(n, d1) * sqt);
    };
    double guess = std::sqrt(2.0 * kPi / expiry) * (price - intrinsic) / upper;
    guess = std::clamp(guess, 1e-4, 0.5 * hi);
    std::uintmax_t iters = 200;
    return boost::math::tools::newton_raphson_iterate(fn, guess, 0.0, hi, 50, iters);
}

}  // namespace alm
