#pragma once
// Model-implied rates, caplets by Fourier inversion, swaptions and basis
// swaptions by the linear exercise-boundary approximation, Black76 implied vols.
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "alm/model.hpp"

namespace alm {

// 1 + delta F_k(t) = M_t^{u_{k-1}} / M_t^{u_k}
double ois_rate(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t);
// 1 + delta L_k(t) = M_t^{v_{k-1}} / M_t^{u_k}
double libor_rate(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t);
struct Spreads {
    double additive = 0.0;        // L - F
    double multiplicative = 0.0;  // (1 + delta L) / (1 + delta F) = 1 + delta R
};
Spreads spreads(const ModelParams& m, const std::string& x, int k, double t, const Vec& x_t);

struct QuadConfig {
    double abs_tol = 1e-11;  // per panel and for the truncated tail
    double rel_tol = 1e-12;
    int max_panels = 48;
    int max_depth = 18;  // adaptive bisection depth within a panel
};

// Integral over [0, inf) split into panels [0, s], [s, 2s], [2s, 4s], ...
// stopping once a panel contributes less than abs_tol and tail(b), a bound on
// the remaining integral over [b, inf), is below abs_tol.
double integrate_half_line(const std::function<double(double)>& f,
                           const std::function<double(double)>& tail, double scale,
                           const QuadConfig& cfg);

struct CapletSpec {
    std::string tenor;
    int k = 1;  // pays delta (L(T_{k-1}, T_k) - K)^+ at T_k
    double strike = 0.0;
    std::optional<double> damping;  // default 1.5, shrunk into the admissible strip
};

// Largest admissible damping (supremum of the strip), +inf when unbounded.
double caplet_damping_limit(const ModelParams& m, const std::string& x, int k);
double caplet_price(const ModelParams& m, const CapletSpec& c, const QuadConfig& q = {});

// f(y) = sum_j coef_j exp(phi_j + <psi_j, y>), evaluated at the exercise date.
struct ExpTerm {
    double coef = 0.0;
    double phi = 0.0;
    Vec psi;
};
struct ExerciseFunction {
    double date = 0.0;
    std::vector<ExpTerm> terms;
    double operator()(const Vec& y) const;
    Vec gradient(const Vec& y) const;
};

struct SwaptionSpec {
    std::string tenor;
    int p = 0, q = 1;
    double strike = 0.0;
};
struct BasisSwaptionSpec {
    BasisLegs legs;
    double spread = 0.0;
};

ExerciseFunction swaption_exercise_fn(const ModelParams& m, const SwaptionSpec& s);
ExerciseFunction basis_exercise_fn(const ModelParams& m, const BasisSwaptionSpec& s);

enum class BoundaryMethod { quantile2d, regression };
enum class ExerciseRegime { boundary, always, never };

struct BoundaryCoeffs {
    double intercept = 0.0;
    Vec direction;
    ExerciseRegime regime = ExerciseRegime::boundary;
    double operator()(const Vec& y) const { return intercept + direction.dot(y); }
};

struct BoundaryOptions {
    int designated = 0;  // coordinate whose quantiles are taken
    int solved = 1;      // coordinate solved for on each slice
    int normalize = -1;  // coordinate scaled to 1; -1 means the solved one
    double q_lo = 0.05;
    double q_hi = 0.95;
    int presample = 10000;
    std::uint64_t seed = 20240601;
    int steps_per_year = 10;
};

// Throws BoundaryError when f has no zero on a slice.
BoundaryCoeffs fit_linear_boundary(const ModelParams& m, const ExerciseFunction& f,
                                   BoundaryMethod method, const BoundaryOptions& o = {});

// Fit the boundary, falling back to the always/never regime when f does not change sign.
BoundaryCoeffs boundary_or_regime(const ModelParams& m, const ExerciseFunction& f,
                                  BoundaryMethod method, const BoundaryOptions& o = {});

// Gil-Pelaez probability of {A + <B, X_t> >= 0} under the measure with
// density M_t^w / M_0^w.
double exercise_probability(const ModelParams& m, const Vec& w, double t,
                            const BoundaryCoeffs& c, const QuadConfig& q = {});

double swaption_price_approx(const ModelParams& m, const SwaptionSpec& s,
                             const BoundaryCoeffs& c, const QuadConfig& q = {});
double basis_swaption_price_approx(const ModelParams& m, const BasisSwaptionSpec& s,
                                   const BoundaryCoeffs& c, const QuadConfig& q = {});

// Model-implied linear products at t = 0.
double model_swap_rate(const ModelParams& m, const std::string& x, int p, int q);
double model_annuity(const ModelParams& m, const std::string& x, int p, int q);
double model_swap_value(const ModelParams& m, const std::string& x, int p, int q, double K);
double model_basis_swap_value(const ModelParams& m, const BasisSwaptionSpec& s);

// Black76 with an OIS annuity: price = annuity (F N(d1) - K N(d2)).
double black76_price(double vol, double forward, double strike, double expiry, double annuity);
double black76_implied_vol(double price, double forward, double strike, double expiry,
                           double annuity);

// True if some factor carries randomness (continuous law for the state).
bool has_continuous_law(const ProcessSpec& spec);

}  // namespace alm
