#pragma once
// Affine driver: CIR with exponential jumps (CIRJ) and Ornstein-Uhlenbeck
// factors, mutually independent. Exponents phi_t(u), psi_t(u) of
// E[exp(<u, X_t>)] = exp(phi_t(u) + <psi_t(u), x>).
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "alm/errors.hpp"

namespace alm {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

enum class FactorKind { cirj, ou };

// CIRJ: dX = -lambda (X - theta) dt + 2 eta sqrt(X) dW + dZ, where Z is
// compound Poisson with intensity nu and exponential jumps of mean mu.
// OU:   dX = -lambda (X - theta) dt + eta dW (eta holds the constant sigma).
struct FactorSpec {
    FactorKind kind = FactorKind::cirj;
    double x0 = 0.0;
    double lambda = 0.0;
    double theta = 0.0;
    double eta = 0.0;
    double nu = 0.0;
    double mu = 0.0;
};

struct ProcessSpec {
    std::vector<FactorSpec> factors;
    int dim() const { return static_cast<int>(factors.size()); }
    Vec x0() const;
};

struct ExpAffine {
    double phi = 0.0;
    Vec psi;
};

struct ExpAffineC {
    cplx phi = 0.0;
    CVec psi;
};

struct DomainCheck {
    bool admissible = true;
    double max_safe_scale = 0.0;
};

enum class CapacityKind { infinite, finite_bound };

struct FittingCapacity {
    CapacityKind kind = CapacityKind::infinite;
    double bound = 0.0;  // meaningful for finite_bound only
};

// Throws ConfigError when parameters violate the factor invariants.
void check_spec(const ProcessSpec& spec);

// Single factor exponents, closed form. The domain is not checked here.
std::pair<cplx, cplx> factor_phi_psi(const FactorSpec& f, double t, cplx u);

// Supremum of admissible real u > 0 for one factor at the horizon
// (+inf when unrestricted).
double factor_max_u(const FactorSpec& f, double horizon);

// First two moments of a factor at time t started from x0.
double factor_mean(const FactorSpec& f, double t);
double factor_variance(const FactorSpec& f, double t);

ExpAffine phi_psi(const ProcessSpec& spec, double t, const Vec& u);
ExpAffineC phi_psi(const ProcessSpec& spec, double t, const CVec& u);

// Adaptive Runge-Kutta-Fehlberg 4(5) integration of the Riccati system.
ExpAffine phi_psi_ode(const ProcessSpec& spec, double t, const Vec& u, double tol);
ExpAffineC phi_psi_ode(const ProcessSpec& spec, double t, const CVec& u, double tol);

DomainCheck validate_domain(const ProcessSpec& spec, const Vec& u, double horizon);

FittingCapacity fitting_capacity(const ProcessSpec& spec);

// M_t^u = exp(phi_{T_N-t}(u) + <psi_{T_N-t}(u), x_t>).
double martingale_value(const ProcessSpec& spec, const Vec& u, double t, double T_N,
                        const Vec& x_t);

// E_k[exp(<w, X_t>)] under the measure with density M^{u_k}_t / M^{u_k}_0.
cplx forward_mgf(const ProcessSpec& spec, const Vec& u_k, const CVec& w, double t,
                 double T_N, const Vec& x0);

// forward_mgf with the shift psi_{T_N-t}(u_k) precomputed, for quadrature loops.
class ForwardMgf {
public:
    ForwardMgf(const ProcessSpec& spec, const Vec& u_k, double t, double T_N, const Vec& x0);
    cplx operator()(const CVec& w) const;
    cplx log_value(const CVec& w) const;

private:
    ProcessSpec spec_;
    double t_;
    Vec shift_;
    Vec x0_;
    double base_;  // phi_t(shift) + <psi_t(shift), x0>
};

nlohmann::json to_json(const ProcessSpec& spec);
ProcessSpec process_from_json(const nlohmann::json& j);

}  // namespace alm
