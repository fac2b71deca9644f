#include "alm/affine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace alm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLambdaEps = 1e-12;

// (1 - e^{-lambda t}) / lambda with the lambda -> 0 limit.
double decay_integral(double lambda, double t) {
    if (std::abs(lambda) < kLambdaEps) return t - 0.5 * lambda * t * t;
    return -std::expm1(-lambda * t) / lambda;
}

// log(1 + x) / x, analytic at x = 0. Principal branch.
cplx log1p_ratio(cplx x) {
    if (std::abs(x) < 1e-3) {
        cplx s = 0.0;
        for (int n = 7; n >= 1; --n) s = 1.0 / static_cast<double>(n) - x * s;
        return s;
    }
    return std::log(1.0 + x) / x;
}

bool jumps_active(const FactorSpec& f) {
    return f.kind == FactorKind::cirj && f.nu > 0.0 && f.mu > 0.0;
}

// Riccati right-hand sides for one factor: returns (F(psi), R(psi)).
std::pair<cplx, cplx> riccati_rhs(const FactorSpec& f, cplx psi) {
    if (f.kind == FactorKind::ou) {
        const double s2 = f.eta * f.eta;
        return {f.lambda * f.theta * psi + 0.5 * s2 * psi * psi, -f.lambda * psi};
    }
    const double a = 2.0 * f.eta * f.eta;
    cplx F = f.lambda * f.theta * psi;
    if (jumps_active(f)) {
        const cplx den = 1.0 - f.mu * psi;
        if (std::real(den) <= 0.0) throw DomainError("jump transform pole reached");
        F += f.nu * f.mu * psi / den;
    }
    return {F, -f.lambda * psi + a * psi * psi};
}

template <class T>
std::pair<T, T> rkf45_factor(const FactorSpec& f, double t, T u, double tol) {
    // Fehlberg 4(5) tableau.
    static constexpr double c2 = 1.0 / 4, c3 = 3.0 / 8, c4 = 12.0 / 13, c6 = 1.0 / 2;
    static constexpr double a21 = 1.0 / 4;
    static constexpr double a31 = 3.0 / 32, a32 = 9.0 / 32;
    static constexpr double a41 = 1932.0 / 2197, a42 = -7200.0 / 2197, a43 = 7296.0 / 2197;
    static constexpr double a51 = 439.0 / 216, a52 = -8.0, a53 = 3680.0 / 513,
                            a54 = -845.0 / 4104;
    static constexpr double a61 = -8.0 / 27, a62 = 2.0, a63 = -3544.0 / 2565,
                            a64 = 1859.0 / 4104, a65 = -11.0 / 40;
    static constexpr double b1 = 16.0 / 135, b3 = 6656.0 / 12825, b4 = 28561.0 / 56430,
                            b5 = -9.0 / 50, b6 = 2.0 / 55;
    static constexpr double d1 = 25.0 / 216, d3 = 1408.0 / 2565, d4 = 2197.0 / 4104,
                            d5 = -1.0 / 5;
    (void)c2; (void)c3; (void)c4; (void)c6;

    constexpr double ceiling = 1e8;
    T phi = 0.0, psi = u;
    if (t <= 0.0) return {phi, psi};
    double s = 0.0;
    double h = std::min(t, 1e-3 * std::max(1.0, t));
    const double h_min = 1e-14 * t;
    auto rhs = [&](T y) {
        auto [F, R] = riccati_rhs(f, cplx(y));
        if constexpr (std::is_same_v<T, double>) return std::pair<T, T>{F.real(), R.real()};
        else return std::pair<T, T>{F, R};
    };
    while (s < t) {
        if (s + h > t) h = t - s;
        auto [kf1, kr1] = rhs(psi);
        auto [kf2, kr2] = rhs(psi + h * a21 * kr1);
        auto [kf3, kr3] = rhs(psi + h * (a31 * kr1 + a32 * kr2));
        auto [kf4, kr4] = rhs(psi + h * (a41 * kr1 + a42 * kr2 + a43 * kr3));
        auto [kf5, kr5] = rhs(psi + h * (a51 * kr1 + a52 * kr2 + a53 * kr3 + a54 * kr4));
        auto [kf6, kr6] =
            rhs(psi + h * (a61 * kr1 + a62 * kr2 + a63 * kr3 + a64 * kr4 + a65 * kr5));
        (void)kf2;
        const T psi5 = psi + h * (b1 * kr1 + b3 * kr3 + b4 * kr4 + b5 * kr5 + b6 * kr6);
        const T psi4 = psi + h * (d1 * kr1 + d3 * kr3 + d4 * kr4 + d5 * kr5);
        const T phi5 = phi + h * (b1 * kf1 + b3 * kf3 + b4 * kf4 + b5 * kf5 + b6 * kf6);
        const T phi4 = phi + h * (d1 * kf1 + d3 * kf3 + d4 * kf4 + d5 * kf5);
        const double err = std::max(std::abs(psi5 - psi4) / (tol * (1.0 + std::abs(psi5))),
                                    std::abs(phi5 - phi4) / (tol * (1.0 + std::abs(phi5))));
        if (!std::isfinite(err)) {
            h *= 0.25;
        } else if (err <= 1.0) {
            s += h;
            psi = psi5;
            phi = phi5;
            if (std::abs(psi) > ceiling) throw DomainError("Riccati solution exceeds ceiling");
            h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(err, -0.25));
        }
        if (s < t && h < h_min) throw DomainError("Riccati step size collapsed (blow-up)");
    }
    return {phi, psi};
}

void check_length(const ProcessSpec& spec, Eigen::Index n) {
    if (n != spec.dim()) throw ConfigError("argument dimension does not match process");
}

void check_domain_real(const ProcessSpec& spec, const Vec& re_u, double horizon) {
    const DomainCheck dc = validate_domain(spec, re_u, horizon);
    if (!dc.admissible) {
        std::ostringstream os;
        os << "argument outside admissible domain at horizon " << horizon
           << " (max safe scale " << dc.max_safe_scale << ")";
        throw DomainError(os.str());
    }
}

}  // namespace

Vec ProcessSpec::x0() const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x(i) = factors[i].x0;
    return x;
}

void check_spec(const ProcessSpec& spec) {
    for (std::size_t i = 0; i < spec.factors.size(); ++i) {
        const FactorSpec& f = spec.factors[i];
        const std::string where = "factor " + std::to_string(i) + ": ";
        for (double v : {f.x0, f.lambda, f.theta, f.eta, f.nu, f.mu})
            if (!std::isfinite(v)) throw ConfigError(where + "non-finite parameter");
        if (f.lambda < 0.0) throw ConfigError(where + "lambda must be >= 0");
        if (f.kind == FactorKind::cirj) {
            if (f.x0 < 0.0) throw ConfigError(where + "CIRJ requires x0 >= 0");
            if (f.theta < 0.0) throw ConfigError(where + "CIRJ requires theta >= 0");
            if (f.eta < 0.0) throw ConfigError(where + "eta must be >= 0");
            if (f.nu < 0.0 || f.mu < 0.0) throw ConfigError(where + "nu, mu must be >= 0");
        } else {
            if (f.nu != 0.0 || f.mu != 0.0) throw ConfigError(where + "OU requires nu = mu = 0");
        }
    }
}

std::pair<cplx, cplx> factor_phi_psi(const FactorSpec& f, double t, cplx u) {
    if (t <= 0.0) return {0.0, u};
    const double e = std::exp(-f.lambda * t);
    const double g = decay_integral(f.lambda, t);
    if (f.kind == FactorKind::ou) {
        const double s2 = f.eta * f.eta;
        const double g2 = decay_integral(2.0 * f.lambda, t);
        return {f.theta * u * (1.0 - e) + 0.5 * s2 * u * u * g2, u * e};
    }
    // psi_s = u e^{-lambda s} / (1 - a u g(s)), with a = 2 eta^2.
    const double a = 2.0 * f.eta * f.eta;
    const cplx q = u * g;
    const cplx D = 1.0 - a * q;
    const cplx psi = u * e / D;
    // int_0^t psi_s ds = -log(1 - a q) / a; the path 1 - a u g(s) is a ray from 1.
    cplx phi = f.lambda * f.theta * q * log1p_ratio(-a * q);
    if (jumps_active(f)) {
        // int_0^t mu psi_s / (1 - mu psi_s) ds in closed form.
        const cplx c = 1.0 - f.mu * u;
        const cplx x = -q * (a - f.mu * f.lambda) / c;
        cplx h;
        if (std::abs(x) < 1e-3) {
            h = log1p_ratio(x);
        } else {
            // 1 + x = (1 - mu psi) D / c; each factor stays in the right half
            // plane along the path, so the split log is the continuous branch.
            h = (std::log(1.0 - f.mu * psi) + std::log(D) - std::log(c)) / x;
        }
        phi += f.nu * f.mu * q / c * h;
    }
    return {phi, psi};
}

double factor_max_u(const FactorSpec& f, double horizon) {
    if (f.kind == FactorKind::ou) return kInf;
    const double a = 2.0 * f.eta * f.eta;
    const double g = decay_integral(f.lambda, std::max(horizon, 0.0));
    double m = a * g;
    if (jumps_active(f)) m = std::max(f.mu, m + f.mu * std::exp(-f.lambda * horizon));
    return m > 0.0 ? 1.0 / m : kInf;
}

double factor_mean(const FactorSpec& f, double t) {
    const double e = std::exp(-f.lambda * t);
    const double g = decay_integral(f.lambda, t);
    // Jumps add the constant drift nu mu.
    const double jump = f.kind == FactorKind::cirj ? f.nu * f.mu : 0.0;
    return f.x0 * e + (f.lambda * f.theta + jump) * g;
}

double factor_variance(const FactorSpec& f, double t) {
    const double e = std::exp(-f.lambda * t);
    const double g = decay_integral(f.lambda, t);
    const double g2 = decay_integral(2.0 * f.lambda, t);
    if (f.kind == FactorKind::ou) return f.eta * f.eta * g2;
    // dV = (-2 lambda V + s2 m(s) + 2 nu mu^2) dt with m(s) = b g(s) + x0 e^{-lambda s}.
    const double s2 = 4.0 * f.eta * f.eta;
    const double b = f.lambda * f.theta + f.nu * f.mu;
    const double jump2 = 2.0 * f.nu * f.mu * f.mu;
    // int_0^t e^{-2 lambda (t-s)} e^{-lambda s} ds = e g
    // int_0^t e^{-2 lambda (t-s)} g(s) ds = (g2 - e g) / lambda, limit t^2/2 at lambda -> 0
    double ig;
    if (std::abs(f.lambda) < 1e-8) ig = 0.5 * t * t;
    else ig = (g2 - e * g) / f.lambda;
    return s2 * (f.x0 * e * g + b * ig) + jump2 * g2;
}

ExpAffine phi_psi(const ProcessSpec& spec, double t, const Vec& u) {
    check_length(spec, u.size());
    if (t < 0.0) throw DomainError("negative horizon");
    check_domain_real(spec, u, t);
    ExpAffine out;
    out.psi.resize(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        auto [ph, ps] = factor_phi_psi(spec.factors[i], t, cplx(u(i)));
        out.phi += ph.real();
        out.psi(i) = ps.real();
    }
    if (!std::isfinite(out.phi) || !out.psi.allFinite())
        throw DomainError("non-finite Riccati exponent");
    return out;
}

ExpAffineC phi_psi(const ProcessSpec& spec, double t, const CVec& u) {
    check_length(spec, u.size());
    if (t < 0.0) throw DomainError("negative horizon");
    check_domain_real(spec, u.real(), t);
    ExpAffineC out;
    out.psi.resize(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        auto [ph, ps] = factor_phi_psi(spec.factors[i], t, u(i));
        out.phi += ph;
        out.psi(i) = ps;
    }
    if (!std::isfinite(out.phi.real()) || !std::isfinite(out.phi.imag()) || !out.psi.allFinite())
        throw DomainError("non-finite Riccati exponent");
    return out;
}

ExpAffine phi_psi_ode(const ProcessSpec& spec, double t, const Vec& u, double tol) {
    check_length(spec, u.size());
    if (tol <= 0.0) throw ConfigError("tolerance must be positive");
    if (t < 0.0) throw DomainError("negative horizon");
    ExpAffine out;
    out.psi.resize(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        auto [ph, ps] = rkf45_factor<double>(spec.factors[i], t, u(i), tol);
        out.phi += ph;
        out.psi(i) = ps;
    }
    return out;
}

ExpAffineC phi_psi_ode(const ProcessSpec& spec, double t, const CVec& u, double tol) {
    check_length(spec, u.size());
    if (tol <= 0.0) throw ConfigError("tolerance must be positive");
    if (t < 0.0) throw DomainError("negative horizon");
    ExpAffineC out;
    out.psi.resize(spec.dim());
    for (int i = 0; i < spec.dim(); ++i) {
        auto [ph, ps] = rkf45_factor<cplx>(spec.factors[i], t, u(i), tol);
        out.phi += ph;
        out.psi(i) = ps;
    }
    return out;
}

DomainCheck validate_domain(const ProcessSpec& spec, const Vec& u, double horizon) {
    check_length(spec, u.size());
    double scale = kInf;
    for (int i = 0; i < spec.dim(); ++i) {
        if (!(u(i) > 0.0)) continue;
        scale = std::min(scale, factor_max_u(spec.factors[i], horizon) / u(i));
    }
    // The admissible set is open: the boundary itself has an infinite moment.
    return {scale > 1.0, scale};
}

FittingCapacity fitting_capacity(const ProcessSpec& spec) {
    if (spec.dim() == 0) return {CapacityKind::finite_bound, 1.0};
    return {CapacityKind::infinite, kInf};
}

double martingale_value(const ProcessSpec& spec, const Vec& u, double t, double T_N,
                        const Vec& x_t) {
    if (t < 0.0 || t > T_N) throw DomainError("martingale_value requires 0 <= t <= T_N");
    check_domain_real(spec, u, T_N);
    const ExpAffine e = phi_psi(spec, T_N - t, u);
    return std::exp(e.phi + e.psi.dot(x_t));
}

ForwardMgf::ForwardMgf(const ProcessSpec& spec, const Vec& u_k, double t, double T_N,
                       const Vec& x0)
    : spec_(spec), t_(t), x0_(x0) {
    if (t < 0.0 || t > T_N) throw DomainError("forward_mgf requires 0 <= t <= T_N");
    shift_ = phi_psi(spec, T_N - t, u_k).psi;
    const ExpAffine b = phi_psi(spec, t, shift_);
    base_ = b.phi + b.psi.dot(x0);
}

cplx ForwardMgf::log_value(const CVec& w) const {
    const CVec arg = shift_.cast<cplx>() + w;
    const ExpAffineC e = phi_psi(spec_, t_, arg);
    return e.phi + x0_.cast<cplx>().dot(e.psi) - base_;  // dot conjugates its first argument
}

cplx ForwardMgf::operator()(const CVec& w) const { return std::exp(log_value(w)); }

cplx forward_mgf(const ProcessSpec& spec, const Vec& u_k, const CVec& w, double t, double T_N,
                 const Vec& x0) {
    return ForwardMgf(spec, u_k, t, T_N, x0)(w);
}

nlohmann::json to_json(const ProcessSpec& spec) {
    nlohmann::json arr = nlohmann::json::array();
    for (const FactorSpec& f : spec.factors) {
        arr.push_back({{"kind", f.kind == FactorKind::cirj ? "cirj" : "ou"},
                       {"x0", f.x0},
                       {"lambda", f.lambda},
                       {"theta", f.theta},
                       {"eta", f.eta},
                       {"nu", f.nu},
                       {"mu", f.mu}});
    }
    return {{"factors", arr}};
}

ProcessSpec process_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("factors") || !j.at("factors").is_array())
        throw ParseError("process spec must be an object with a 'factors' array");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "factors") throw ParseError("unknown process field '" + it.key() + "'");
    ProcessSpec spec;
    static const std::vector<std::string> allowed = {"kind", "x0", "lambda", "theta",
                                                     "eta",  "nu", "mu"};
    for (const auto& fj : j.at("factors")) {
        if (!fj.is_object()) throw ParseError("factor entry must be an object");
        for (auto it = fj.begin(); it != fj.end(); ++it)
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
                throw ParseError("unknown factor field '" + it.key() + "'");
        FactorSpec f;
        const std::string kind = fj.at("kind").get<std::string>();
        if (kind == "cirj") f.kind = FactorKind::cirj;
        else if (kind == "ou") f.kind = FactorKind::ou;
        else throw ParseError("unknown factor kind '" + kind + "'");
        try {
            f.x0 = fj.at("x0").get<double>();
            f.lambda = fj.at("lambda").get<double>();
            f.theta = fj.at("theta").get<double>();
            f.eta = fj.at("eta").get<double>();
            f.nu = fj.value("nu", 0.0);
            f.mu = fj.value("mu", 0.0);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("factor field error: ") + e.what());
        }
        spec.factors.push_back(f);
    }
    check_spec(spec);
    return spec;
}

}  // namespace alm
