#include "alm/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace alm {

namespace {

constexpr long kBlock = 4096;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    std::uint64_t s = h ^ (v + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2));
    return splitmix(s);
}

// Welford accumulator with Chan's pairwise merge.
struct Stats {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void add(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    void merge(const Stats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
        const double d = o.mean - mean;
        const double nt = na + nb;
        mean += d * nb / nt;
        m2 += o.m2 + d * d * na * nb / nt;
        n += o.n;
    }
    McEstimate estimate() const {
        McEstimate e;
        e.mean = n > 0 ? mean : kNaN;
        e.paths_used = n;
        e.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : kNaN;
        return e;
    }
};

double gfun(double lambda, double t) {
    const double x = lambda * t;
    if (std::abs(x) < 1e-8) return t * (1.0 - 0.5 * x);
    return -std::expm1(-x) / lambda;
}

// Exact CIR transition over dt without jumps (diffusion coefficient 2 eta sqrt(x)).
double cir_exact(const FactorSpec& f, double x, double dt, CounterRng& rng) {
    if (f.eta == 0.0) return f.theta + (x - f.theta) * std::exp(-f.lambda * dt);
    const double sigma2 = 4.0 * f.eta * f.eta;
    const double c = sigma2 * gfun(f.lambda, dt) / 4.0;
    const double d = 4.0 * f.lambda * f.theta / sigma2;
    const double zeta = std::max(x, 0.0) * std::exp(-f.lambda * dt) / c;
    double shape = 0.5 * d;
    if (zeta > 0.0) {
        std::poisson_distribution<long> pois(0.5 * zeta);
        shape += static_cast<double>(pois(rng));
    }
    if (!(shape > 0.0)) return 0.0;
    std::gamma_distribution<double> gam(shape, 1.0);
    return 2.0 * c * gam(rng);
}

double ou_exact(const FactorSpec& f, double x, double dt, CounterRng& rng) {
    const double e = std::exp(-f.lambda * dt);
    const double mean = f.theta + (x - f.theta) * e;
    if (f.eta == 0.0) return mean;
    std::normal_distribution<double> n;
    return mean + f.eta * std::sqrt(gfun(2.0 * f.lambda, dt)) * n(rng);
}

double cir_euler(const FactorSpec& f, double x, double dt, CounterRng& rng) {
    const double xp = std::max(x, 0.0);
    std::normal_distribution<double> n;
    return x + f.lambda * (f.theta - xp) * dt + 2.0 * f.eta * std::sqrt(xp * dt) * n(rng);
}

double ou_euler(const FactorSpec& f, double x, double dt, CounterRng& rng) {
    std::normal_distribution<double> n;
    return x + f.lambda * (f.theta - x) * dt + f.eta * std::sqrt(dt) * n(rng);
}

double step_factor(const FactorSpec& f, Scheme scheme, double x, double dt, CounterRng& diff,
                   CounterRng& jump) {
    if (f.kind == FactorKind::ou)
        return scheme == Scheme::exact_cir ? ou_exact(f, x, dt, diff) : ou_euler(f, x, dt, diff);
    const bool jumps = f.nu > 0.0 && f.mu > 0.0;
    if (scheme == Scheme::euler_truncated) {
        double y = cir_euler(f, x, dt, diff);
        if (jumps) {
            std::poisson_distribution<long> pois(f.nu * dt);
            std::exponential_distribution<double> size(1.0 / f.mu);
            for (long n = pois(jump); n > 0; --n) y += size(jump);
        }
        return y;
    }
    if (!jumps) return cir_exact(f, x, dt, diff);
    // Jump times within the step, exact diffusion between them.
    std::poisson_distribution<long> pois(f.nu * dt);
    const long n = pois(jump);
    std::vector<double> times(static_cast<std::size_t>(n));
    for (double& t : times) t = dt * jump.uniform();
    std::sort(times.begin(), times.end());
    std::exponential_distribution<double> size(1.0 / f.mu);
    double prev = 0.0;
    for (double t : times) {
        if (t > prev) x = cir_exact(f, x, t - prev, diff);
        x += size(jump);
        prev = t;
    }
    if (dt > prev) x = cir_exact(f, x, dt - prev, diff);
    return x;
}

std::vector<int> slots_for(const std::vector<double>& grid, const std::vector<double>& dates) {
    std::vector<int> slots;
    for (double d : dates) {
        auto it = std::lower_bound(grid.begin(), grid.end(), d - 1e-12);
        slots.push_back(static_cast<int>(it - grid.begin()));
    }
    return slots;
}

void check_dates(const std::vector<double>& dates) {
    for (std::size_t i = 0; i < dates.size(); ++i) {
        if (!(dates[i] >= 0.0) || !std::isfinite(dates[i])) throw ConfigError("dates must be finite and >= 0");
        if (i > 0 && dates[i] < dates[i - 1]) throw ConfigError("dates must be sorted");
    }
}

void check_config(const SimConfig& cfg) {
    if (cfg.paths < 1) throw ConfigError("paths must be positive");
    if (cfg.steps_per_year < 1) throw ConfigError("steps_per_year must be positive");
    if (cfg.threads < 0) throw ConfigError("threads must be >= 0");
}

double mt_value(const ExpAffine& e, const Vec& y) {
    return std::exp(e.phi + e.psi.dot(y));
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                       std::uint64_t factor, std::uint64_t channel) {
    std::uint64_t h = mix(0x243F6A8885A308D3ull, seed);
    h = mix(h, path);
    h = mix(h, step);
    h = mix(h, factor);
    state_ = mix(h, channel);
}

CounterRng::result_type CounterRng::operator()() { return splitmix(state_); }

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

std::vector<double> simulation_grid(const std::vector<double>& dates, int steps_per_year) {
    if (steps_per_year < 1) throw ConfigError("steps_per_year must be positive");
    double end = 0.0;
    for (double d : dates) end = std::max(end, d);
    std::vector<double> g{0.0};
    const double h = 1.0 / steps_per_year;
    for (long i = 1; i * h < end + 1e-12; ++i) g.push_back(static_cast<double>(i) * h);
    g.insert(g.end(), dates.begin(), dates.end());
    std::sort(g.begin(), g.end());
    std::vector<double> out;
    for (double t : g)
        if (t <= end + 1e-12 && (out.empty() || t - out.back() > 1e-12)) out.push_back(t);
    return out;
}

void simulate_path(const ProcessSpec& spec, const SimConfig& cfg, const std::vector<double>& grid,
                   const std::vector<int>& date_slots, long path, std::vector<Vec>& out) {
    const int d = spec.dim();
    Vec x = spec.x0();
    out.resize(date_slots.size());
    std::size_t next = 0;
    auto record = [&](int slot) {
        while (next < date_slots.size() && date_slots[next] == slot) {
            Vec y = x;
            if (cfg.scheme == Scheme::euler_truncated)
                for (int i = 0; i < d; ++i)
                    if (spec.factors[static_cast<std::size_t>(i)].kind == FactorKind::cirj) y(i) = std::max(y(i), 0.0);
            out[next++] = y;
        }
    };
    record(0);
    for (std::size_t s = 1; s < grid.size() && next < date_slots.size(); ++s) {
        const double dt = grid[s] - grid[s - 1];
        for (int i = 0; i < d; ++i) {
            const auto p = static_cast<std::uint64_t>(path);
            CounterRng diff(cfg.seed, p, s, static_cast<std::uint64_t>(i), 0);
            CounterRng jump(cfg.seed, p, s, static_cast<std::uint64_t>(i), 1);
            x(i) = step_factor(spec.factors[static_cast<std::size_t>(i)], cfg.scheme, x(i), dt, diff, jump);
        }
        record(static_cast<int>(s));
    }
}

std::vector<std::vector<Vec>> simulate(const ProcessSpec& spec, const SimConfig& cfg,
                                       const std::vector<double>& dates) {
    check_spec(spec);
    check_config(cfg);
    check_dates(dates);
    const auto grid = simulation_grid(dates, cfg.steps_per_year);
    const auto slots = slots_for(grid, dates);
    std::vector<std::vector<Vec>> res(static_cast<std::size_t>(cfg.paths));
    for (long p = 0; p < cfg.paths; ++p) simulate_path(spec, cfg, grid, slots, p, res[static_cast<std::size_t>(p)]);
    return res;
}

std::vector<McEstimate> mc_expectation(const ProcessSpec& spec, const SimConfig& cfg,
                                       const std::vector<double>& dates, int outputs,
                                       const Payoff& payoff) {
    check_spec(spec);
    check_config(cfg);
    check_dates(dates);
    if (outputs < 1) throw ConfigError("at least one output required");
    const auto grid = simulation_grid(dates, cfg.steps_per_year);
    const auto slots = slots_for(grid, dates);
    const long nblocks = (cfg.paths + kBlock - 1) / kBlock;
    std::vector<std::vector<Stats>> blocks(static_cast<std::size_t>(nblocks),
                                           std::vector<Stats>(static_cast<std::size_t>(outputs)));
    std::atomic<long> next{0};
    auto worker = [&]() {
        std::vector<Vec> states;
        std::vector<double> vals(static_cast<std::size_t>(outputs));
        for (long b = next++; b < nblocks; b = next++) {
            auto& st = blocks[static_cast<std::size_t>(b)];
            const long end = std::min(cfg.paths, (b + 1) * kBlock);
            for (long p = b * kBlock; p < end; ++p) {
                simulate_path(spec, cfg, grid, slots, p, states);
                payoff(states, vals.data());
                for (int o = 0; o < outputs; ++o) st[static_cast<std::size_t>(o)].add(vals[static_cast<std::size_t>(o)]);
            }
        }
    };
    int nt = cfg.threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : cfg.threads;
    nt = static_cast<int>(std::min<long>(nt, nblocks));
    if (nt <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<McEstimate> res;
    for (int o = 0; o < outputs; ++o) {
        Stats total;
        for (const auto& b : blocks) total.merge(b[static_cast<std::size_t>(o)]);
        res.push_back(total.estimate());
    }
    return res;
}

std::vector<McEstimate> mc_caplets(const ModelParams& m, const std::string& tenor, int k,
                                   const std::vector<double>& strikes, const SimConfig& cfg) {
    const TenorGrid& g = m.grid(tenor);
    if (k < 1 || k > g.n_points) throw IndexError("caplet index out of range");
    const double t = g.date(k - 1);
    const double tau = m.terminal - t;
    const ExpAffine ev = phi_psi(m.spec, tau, m.vk(tenor, k - 1));
    const ExpAffine eu = phi_psi(m.spec, tau, m.u(tenor, k));
    std::vector<double> kx;
    for (double s : strikes) kx.push_back(1.0 + g.delta * s);
    const double bn = m.terminal_discount;
    return mc_expectation(m.spec, cfg, {t}, static_cast<int>(strikes.size()),
                          [&](const std::vector<Vec>& st, double* out) {
                              const double mv = mt_value(ev, st[0]);
                              const double mu = mt_value(eu, st[0]);
                              for (std::size_t j = 0; j < kx.size(); ++j)
                                  out[j] = bn * std::max(mv - kx[j] * mu, 0.0);
                          });
}

McEstimate mc_caplet(const ModelParams& m, const CapletSpec& c, const SimConfig& cfg) {
    return mc_caplets(m, c.tenor, c.k, {c.strike}, cfg)[0];
}

namespace {

double linear_indicator(const BoundaryCoeffs& c, const Vec& y) {
    if (c.regime == ExerciseRegime::always) return 1.0;
    if (c.regime == ExerciseRegime::never) return 0.0;
    return c(y) >= 0.0 ? 1.0 : 0.0;
}

McEstimate mc_exercise(const ModelParams& m, const ExerciseFunction& f, const SimConfig& cfg,
                       const std::optional<BoundaryCoeffs>& linear) {
    const double bn = m.terminal_discount;
    return mc_expectation(m.spec, cfg, {f.date}, 1, [&](const std::vector<Vec>& st, double* out) {
        const double v = f(st[0]);
        out[0] = linear ? bn * v * linear_indicator(*linear, st[0]) : bn * std::max(v, 0.0);
    })[0];
}

BoundaryStudy mc_study(const ModelParams& m, const ExerciseFunction& f, const BoundaryCoeffs& c,
                       const SimConfig& cfg) {
    const double bn = m.terminal_discount;
    const auto r = mc_expectation(m.spec, cfg, {f.date}, 3, [&](const std::vector<Vec>& st, double* out) {
        const double v = f(st[0]);
        out[0] = bn * std::max(v, 0.0);
        out[1] = bn * v * linear_indicator(c, st[0]);
        out[2] = out[0] - out[1];
    });
    return {r[0], r[1], r[2]};
}

}  // namespace

McEstimate mc_swaption(const ModelParams& m, const SwaptionSpec& s, const SimConfig& cfg,
                       const std::optional<BoundaryCoeffs>& linear) {
    return mc_exercise(m, swaption_exercise_fn(m, s), cfg, linear);
}

BoundaryStudy mc_swaption_study(const ModelParams& m, const SwaptionSpec& s,
                                const BoundaryCoeffs& c, const SimConfig& cfg) {
    return mc_study(m, swaption_exercise_fn(m, s), c, cfg);
}

McEstimate mc_basis_swaption(const ModelParams& m, const BasisSwaptionSpec& s,
                             const SimConfig& cfg, const std::optional<BoundaryCoeffs>& linear) {
    return mc_exercise(m, basis_exercise_fn(m, s), cfg, linear);
}

BoundaryStudy mc_basis_swaption_study(const ModelParams& m, const BasisSwaptionSpec& s,
                                      const BoundaryCoeffs& c, const SimConfig& cfg) {
    return mc_study(m, basis_exercise_fn(m, s), c, cfg);
}

}  // namespace alm
