#pragma once
// Fitting of the ordered sequences u_l (fine grid) and v_k^x (per tenor) to
// the initial term structures, the "diagonal plus common" factor layout and
// the negative-rates construction.
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "alm/affine.hpp"
#include "alm/curves.hpp"

namespace alm {

enum class RateMode { positive, negative };

struct TenorV {
    TenorGrid grid;
    std::vector<Vec> v;  // k = 0..n_points, v[n_points] = 0
};

struct ModelParams {
    ProcessSpec spec;
    double terminal = 0.0;
    double fine_step = 0.25;
    double terminal_discount = 1.0;  // B(0, T_N)
    std::vector<Vec> u_fine;         // l = 0..N, u_fine[N] = 0
    std::map<std::string, TenorV> v;
    RateMode mode = RateMode::positive;

    int dim() const { return spec.dim(); }
    const TenorGrid& grid(const std::string& x) const;
    const Vec& u(const std::string& x, int k) const;
    const Vec& vk(const std::string& x, int k) const;
    // B(0, T_k^x) = B(0, T_N) M_0^{u_k^x}.
    double discount(const std::string& x, int k) const;
    // M_0^w for an arbitrary admissible vector.
    double m0(const Vec& w) const;
};

// Solve M_0^{base + s dir} = target for the scalar s. The root nearest to
// s = 0 is returned (log M is convex along the ray, so it is unique on the
// side that is searched).
struct FitRay {
    Vec base;
    Vec dir;
};
Vec solve_on_ray(const ProcessSpec& spec, double T_N, double target, const FitRay& ray);

// Rules may read rows that are already fitted (fitting runs backwards in the index).
using RayRule = std::function<FitRay(int index, const std::vector<Vec>& u_fine)>;
RayRule constant_ray(const Vec& base, const Vec& dir);

struct FitOptions {
    RateMode mode = RateMode::positive;
    bool enforce_ordering = true;  // positive mode only
};

// u_l with M_0^{u_l} = B(0,T_l)/B(0,T_N), l = 0..N-1, and u_N = 0.
std::vector<Vec> fit_u_sequence(const ProcessSpec& spec, const CurveSet& curves,
                                const RayRule& rule, const FitOptions& opts = {});

// v_k^x with M_0^{v_k} = (1 + delta L_{k+1}(0)) M_0^{u_{k+1}}, k = 0..N^x-1,
// and v_{N^x} = 0. The rule receives u_fine.
std::vector<Vec> fit_v_sequence(const ProcessSpec& spec, const CurveSet& curves,
                                const std::vector<Vec>& u_fine, const std::string& tenor,
                                const RayRule& rule, const FitOptions& opts = {});

// Coordinate 0 is the common factor, coordinate i the idiosyncratic factor of
// maturity i (years). A row dated T is driven by column a(T) = clamp(ceil(T), 1, M);
// columns beyond a(T) hold the value of u in the first row of their block,
// columns before it are 0.
class FactorLayout {
public:
    FactorLayout(int maturities, double u_c, std::map<std::string, double> v_tilde);

    int maturities() const { return m_; }
    int dim() const { return m_ + 1; }
    double u_c() const { return u_c_; }
    double v_tilde(const std::string& x) const;
    int active_column(double T) const;
    // First fine-grid index whose active column is j.
    int first_fine_row(int j, double fine_step) const;

    void check(const ProcessSpec& spec, double terminal) const;
    RayRule u_rule(double fine_step) const;
    RayRule v_rule(const std::string& x, const TenorGrid& grid, double fine_step) const;

private:
    Vec frozen_base(double T, double col0, const std::vector<Vec>& u_fine, double fine_step) const;

    int m_;
    double u_c_;
    std::map<std::string, double> v_tilde_;
};

FactorLayout build_factor_layout(int maturities, const CurveSet& curves, double u_c,
                                 const std::map<std::string, double>& v_tilde);

// Fit u and every tenor's v with the layout rules.
ModelParams build_model(const ProcessSpec& spec, const CurveSet& curves,
                        const FactorLayout& layout, const FitOptions& opts = {});

// Two-factor model with an R-valued first factor (OU) and an R>=0 second factor.
// OIS discounts are fitted through the first coordinate with the second held at
// u_second; v keeps v_1 = u_1 and solves the second coordinate.
struct NegativeRateConfig {
    double u_second = 0.0;
};
ModelParams build_negative_rate_model(const ProcessSpec& spec, const CurveSet& curves,
                                      const NegativeRateConfig& cfg = {});

struct ModelReport {
    bool u_decreasing = true;
    bool v_above_u = true;
    bool admissible = true;
    bool normal_regime = true;    // v_k in [u_k, u_{k-1}] componentwise
    bool extreme_regime = false;  // some v_k > u_{k-1}
    std::vector<std::string> notes;
    bool ok() const { return u_decreasing && v_above_u && admissible; }
};
ModelReport validate_model(const ModelParams& m);

nlohmann::json to_json(const ModelParams& m);
ModelParams model_from_json(const nlohmann::json& j);

// Human-readable table of the second-or-later coordinates, 6 decimals.
std::string format_uv_table(const ModelParams& m, int column);

}  // namespace alm
