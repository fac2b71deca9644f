#pragma once
// Sequential caplet calibration of the idiosyncratic factors, longest maturity
// first, with the initial term structures refitted exactly at every iterate.
#include <string>
#include <vector>

#include "alm/pricing.hpp"

namespace alm {

struct CapletQuote {
    std::string tenor;
    double maturity = 1.0;  // caplet expiry (fixing date) in years
    double strike = 0.0;
    double vol = 0.0;
};

struct CapletSurface {
    std::vector<CapletQuote> quotes;
    std::vector<int> maturities() const;  // sorted, integral years
    std::vector<CapletQuote> at(int maturity) const;
    void check() const;                   // ConfigError on malformed quotes
};

// Caplet index k with T_{k-1} = expiry on the tenor grid.
int caplet_index(const TenorGrid& g, double expiry);

// Model Black76 implied vol of a caplet (OIS annuity delta B(0,T_k), forward L_k(0)).
double caplet_implied_vol(const ModelParams& m, const CapletSpec& c, const QuadConfig& q = {});

CapletSurface synthetic_surface(const ModelParams& m, const std::vector<std::string>& tenors,
                                const std::vector<int>& maturities,
                                const std::vector<double>& strike_multiples,
                                const QuadConfig& q = {});

struct ParamBounds {
    double lo = 0.0, hi = 1.0;
};

struct CalibrationOptions {
    double target_rms = 1e-3;  // vol units: 0.1 vol points
    int max_iterations = 600;  // per optimizer run
    int restarts = 3;
    double simplex_step = 0.5;  // initial simplex size in transformed coordinates
    double size_tol = 1e-6;
    bool strict = true;         // throw CalibrationError when target_rms is missed
    FitOptions fit;
    QuadConfig quad;
    ParamBounds lambda{1e-4, 5.0}, theta{1e-6, 50.0}, eta{1e-6, 5.0}, nu{0.0, 5.0}, mu{0.0, 5.0},
        x0{1e-6, 50.0};
};

struct MaturityFit {
    int maturity = 0;
    FactorSpec factor;
    double rms = 0.0;
    int iterations = 0;
    int evaluations = 0;
    std::vector<double> trace;  // best objective after each accepted step
};

struct CalibrationResult {
    ProcessSpec spec;
    ModelParams model;
    std::vector<MaturityFit> fits;  // in calibration order (longest first)
    bool converged = true;
};

// Factor of maturity i is coordinate i of the layout. Starting values are taken
// from spec; the common factor and the layout constants stay fixed.
CalibrationResult calibrate_sequential(const CapletSurface& surface, const FactorLayout& layout,
                                       const ProcessSpec& spec, const CurveSet& curves,
                                       const CalibrationOptions& opts = {});

// RMS implied-vol error of the quotes of one maturity under a model.
double maturity_rms(const ModelParams& m, const std::vector<CapletQuote>& quotes,
                    const QuadConfig& q = {});

// Share of Var[log(1 + delta L)] at the caplet expiry carried by the common factor.
double variance_share(const ModelParams& m, const std::string& tenor, double expiry);

nlohmann::json to_json(const CalibrationResult& r);

}  // namespace alm
