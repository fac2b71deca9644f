#pragma once
// Tenor grids, Nelson-Siegel curves and the initial OIS/LIBOR term structures.
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "alm/errors.hpp"

namespace alm {

// Equidistant tenor structure T_k = k * delta, k = 0..n_points, embedded in
// a fine grid of step fine_step. All tenors share T_N = n_points * delta.
struct TenorGrid {
    double delta = 0.25;
    int n_points = 0;
    double fine_step = 0.25;

    int ratio() const;  // delta / fine_step
    int map_to_fine(int k) const;
    double date(int k) const { return k * delta; }
    double terminal() const { return n_points * delta; }
};

// Throws ConfigError unless delta is an integer multiple of fine_step.
TenorGrid make_grid(double delta, double fine_step, double terminal);

struct NelsonSiegelParams {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;
    double gamma = 1.0;
};

double zero_rate(const NelsonSiegelParams& p, double T);

struct TenorCurve {
    TenorGrid grid;
    std::vector<double> libor;  // L_k(0) at index k = 1..n_points; index 0 unused
};

class CurveSet {
public:
    CurveSet() = default;
    CurveSet(double fine_step, std::vector<double> ois_discounts,
             std::map<std::string, TenorCurve> tenors);

    double terminal() const { return fine_step_ * (static_cast<double>(ois_.size()) - 1.0); }
    double fine_step() const { return fine_step_; }
    int fine_count() const { return static_cast<int>(ois_.size()) - 1; }

    // B(0, T_l) on the fine grid.
    double discount(int l) const;
    // B(0, T) for a fine-grid date; off-grid dates raise IndexError.
    double discount_at(double T) const;
    const std::vector<double>& discounts() const { return ois_; }

    const TenorCurve& tenor(const std::string& x) const;
    const std::map<std::string, TenorCurve>& tenors() const { return tenors_; }

    double libor(const std::string& x, int k) const;
    double ois_forward(const std::string& x, int k) const;
    double tenor_discount(const std::string& x, int k) const;

    // Throws ConsistencyError when B is not non-increasing or L < F somewhere.
    void check_positive() const;

private:
    double fine_step_ = 0.25;
    std::vector<double> ois_;
    std::map<std::string, TenorCurve> tenors_;
};

// B(0,T_l) = exp(-R_ois(T_l) T_l); L_k(0) from the tenor curve's discount ratio.
CurveSet build_curveset(const NelsonSiegelParams& ois,
                        const std::map<std::string, NelsonSiegelParams>& tenor_curves,
                        const std::map<std::string, TenorGrid>& grids,
                        bool require_positive = false);

double fair_swap_rate(const CurveSet& c, const std::string& x, int p, int q);
double swap_value(const CurveSet& c, const std::string& x, int p, int q, double K);

// Basis swap receiving the x2 leg and paying the x1 leg plus the spread S.
struct BasisLegs {
    std::string x1, x2;
    int p1 = 0, q1 = 0, p2 = 0, q2 = 0;
};
double fair_basis_spread(const CurveSet& c, const BasisLegs& legs);
double basis_swap_value(const CurveSet& c, const BasisLegs& legs, double S);
void check_alignment(const CurveSet& c, const BasisLegs& legs);

// Ingestion from raw tables. Discount maturities must cover the fine grid
// T_l = l * fine_step up to the terminal date; missing grid dates are filled by
// log-linear interpolation between the nearest quoted grid neighbours.
CurveSet curveset_from_tables(const std::vector<std::pair<double, double>>& discounts,
                              const std::map<std::string, std::vector<std::pair<double, double>>>&
                                  libor_tables,
                              double fine_step, double terminal);

nlohmann::json to_json(const CurveSet& c);
CurveSet curveset_from_json(const nlohmann::json& j);
NelsonSiegelParams ns_from_json(const nlohmann::json& j);

}  // namespace alm
