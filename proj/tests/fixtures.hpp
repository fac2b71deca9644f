#pragma once
// Shared fixtures: the two-factor toy model with 3m/6m curves over 4.5 years.
#include "alm/model.hpp"

namespace fx {

using namespace alm;

inline ProcessSpec toy_spec() {
    ProcessSpec s;
    s.factors = {{FactorKind::cirj, 0.5, 0.1, 1.53, 0.266, 0.0, 0.0},
                 {FactorKind::cirj, 9.4531, 0.0407, 0.0591, 0.4640, 0.0074, 0.2499}};
    return s;
}

inline CurveSet toy_curves() {
    const NelsonSiegelParams ois{0.0003, 0.01, 0.07, 0.06}, c3{0.0032, 0.01, 0.07, 0.06},
        c6{0.0050, 0.01, 0.07, 0.06};
    return build_curveset(ois, {{"3m", c3}, {"6m", c6}},
                          {{"3m", make_grid(0.25, 0.25, 4.5)}, {"6m", make_grid(0.5, 0.25, 4.5)}});
}

inline FactorLayout toy_layout() { return FactorLayout(1, 0.0065, {{"3m", 0.007}, {"6m", 0.0075}}); }

// The last 3m entry of u dips below zero with these inputs, so ordering is not enforced.
inline ModelParams toy_model() {
    FitOptions o;
    o.enforce_ordering = false;
    return build_model(toy_spec(), toy_curves(), toy_layout(), o);
}

constexpr double kAtmStrike = 0.02206396;
constexpr double kAtmSpread = 0.0018242;

}  // namespace fx
