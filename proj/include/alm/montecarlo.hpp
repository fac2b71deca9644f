#pragma once
// Simulation of the driver under the terminal measure and Monte Carlo price
// estimators used as the oracle for the analytic formulas.
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "alm/pricing.hpp"

namespace alm {

enum class Scheme { exact_cir, euler_truncated };

struct SimConfig {
    long paths = 100000;
    int steps_per_year = 10;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::exact_cir;
    int threads = 1;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // NaN when paths_used < 2
    long paths_used = 0;
};

// Counter-based generator: every (seed, path, step, factor, channel) key gives
// an independent SplitMix64 stream, so results do not depend on scheduling.
class CounterRng {
public:
    using result_type = std::uint64_t;
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t factor,
               std::uint64_t channel);
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }
    result_type operator()();
    double uniform();  // in (0, 1)

private:
    std::uint64_t state_;
};

// Simulation time grid: requested dates plus intermediate steps.
std::vector<double> simulation_grid(const std::vector<double>& dates, int steps_per_year);

// States of one path at the requested dates (sorted, within [0, T]).
void simulate_path(const ProcessSpec& spec, const SimConfig& cfg, const std::vector<double>& grid,
                   const std::vector<int>& date_slots, long path, std::vector<Vec>& out);

// Full array [path][date]. Intended for moderate path counts.
std::vector<std::vector<Vec>> simulate(const ProcessSpec& spec, const SimConfig& cfg,
                                       const std::vector<double>& dates);

// Mean and standard error of payoff(states, out) per output component. Paths
// are processed in fixed blocks whose statistics are merged in block order.
using Payoff = std::function<void(const std::vector<Vec>& states, double* out)>;
std::vector<McEstimate> mc_expectation(const ProcessSpec& spec, const SimConfig& cfg,
                                       const std::vector<double>& dates, int outputs,
                                       const Payoff& payoff);

McEstimate mc_caplet(const ModelParams& m, const CapletSpec& c, const SimConfig& cfg);
std::vector<McEstimate> mc_caplets(const ModelParams& m, const std::string& tenor, int k,
                                   const std::vector<double>& strikes, const SimConfig& cfg);

// Shared-path study: true exercise set, linear boundary and their difference.
struct BoundaryStudy {
    McEstimate true_boundary;
    McEstimate linear_boundary;
    McEstimate difference;  // true - linear on the same paths
};

McEstimate mc_swaption(const ModelParams& m, const SwaptionSpec& s, const SimConfig& cfg,
                       const std::optional<BoundaryCoeffs>& linear = std::nullopt);
BoundaryStudy mc_swaption_study(const ModelParams& m, const SwaptionSpec& s,
                                const BoundaryCoeffs& c, const SimConfig& cfg);

McEstimate mc_basis_swaption(const ModelParams& m, const BasisSwaptionSpec& s,
                             const SimConfig& cfg,
                             const std::optional<BoundaryCoeffs>& linear = std::nullopt);
BoundaryStudy mc_basis_swaption_study(const ModelParams& m, const BasisSwaptionSpec& s,
                                      const BoundaryCoeffs& c, const SimConfig& cfg);

}  // namespace alm
