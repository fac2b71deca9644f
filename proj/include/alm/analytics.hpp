#pragma once
// Volatility structures of the embedded LIBOR market model, instantaneous
// correlations (diffusion drivers) and terminal correlations (any driver).
#include <string>

#include "alm/model.hpp"

namespace alm {

struct VolStructure {
    Vec gamma;       // OIS rate volatility
    Vec lambda_vec;  // LIBOR rate volatility
};

enum class CorrelationKind { instantaneous, terminal };

struct CorrelationReport {
    double value = 0.0;
    CorrelationKind kind = CorrelationKind::terminal;
    std::string x1, x2;
    int k1 = 0, k2 = 0;
    double date = 0.0;
};

struct RateIndex {
    std::string tenor;
    int k = 1;
};

// Diffusion loading of factor i: 2 eta sqrt(x) for square-root factors, eta for OU.
Vec diffusion_loading(const ProcessSpec& spec, const Vec& state);

// sum_i (psi^i_{T_N-t}(w) - psi^i_{T_N-t}(y)) sqrt(X^i) sigma_i
Vec upsilon(const ModelParams& m, const Vec& w, const Vec& y, double t, const Vec& state);

// Throws UnsupportedDriverError when a jump component is active.
VolStructure vol_structures(const ModelParams& m, const std::string& tenor, int k, double t,
                            const Vec& state);

CorrelationReport inst_correlation(const ModelParams& m, const RateIndex& a, const RateIndex& b,
                                   double t, const Vec& state);
CorrelationReport inst_correlation(const ModelParams& m, const std::string& tenor, int k, int l,
                                   double t, const Vec& state);

// Correlation of L_{k1}^{x1}(T) and L_{k2}^{x2}(T) under the terminal measure.
CorrelationReport terminal_correlation(const ModelParams& m, const RateIndex& a,
                                       const RateIndex& b, double date);

}  // namespace alm
