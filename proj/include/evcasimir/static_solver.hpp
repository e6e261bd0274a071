#pragma once

#include <string>
#include <vector>

#include "evcasimir/core_model.hpp"
#include "evcasimir/functional.hpp"

namespace evc {

// Polytropic ansatz (1 - ε √(1+ξ²))_+^k integrated over velocity space.
// Node arrays hold the values at the build nodes; the member functions
// evaluate by adaptive quadrature at any ε.
struct AnsatzTables {
    double k = 1.0;
    std::vector<double> eps, G_tab, Gp_tab, rho_tab, p_tab;

    double G(double e) const;        // ∫ ξ² (1 - εE)_+^{k+1} dξ
    double Gp(double e) const;       // dG/dε
    double rho(double e) const;      // ∫ E (1 - εE)_+^k dv = -4π G'/(k+1)
    double p(double e) const;        // (4π/3) ∫ ξ⁴/E (1 - εE)_+^k dξ
    double n(double e) const;        // ∫ (1 - εE)_+^k dv
    double casimir_density(double e) const;  // ∫ χ((1 - εE)_+^k) dv
};

AnsatzTables build_ansatz(double k, std::size_t n_eps = 64);
// Largest representable |v| for cutoff ε: √(1/ε² - 1).
double xi_max(double e);
double invert_Gprime(double target, const AnsatzTables& t);

struct StaticSolution {
    double k = 1.0;
    double central_eps = 0;
    double C = 0;               // e^{-μ₀(R₀)}
    double R0 = 0;
    double M = 0;
    double mu_shift = 0;        // μ₀ = μ_raw + mu_shift, μ_raw(0) = 0
    double compactness = 0;     // 2M/R₀
    double mass_identity_integral = 0;    // 4π ∫ r²(ρ + 3p) e^{μ₀+λ₀} dr
    double d_integral = 0;      // 4π ∫ r²(ρ + p) e^{μ₀+λ₀} dr
    double max_two_m_over_r = 0;
    FunctionalReport report;
    RadialProfile profile;
    // Accepted ODE steps for dense evaluation: r, m, μ_raw and their slopes.
    std::vector<double> knot_r, knot_m, knot_mu, knot_dm, knot_dmu;
    AnsatzTables tables;

    double mu_raw(double r) const;
    double m_of(double r) const;
    // ε̃(r) = e^{μ₀(r) - μ₀(R₀)}
    double eps_tilde(double r) const;
};

struct StaticOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    std::size_t n_profile = 400;
};

StaticSolution integrate_static(double k, double central_eps, const StaticOptions& opt = {});
StaticSolution integrate_static(const AnsatzTables& t, double central_eps,
                                const StaticOptions& opt = {});
FunctionalReport functional_of_static(const StaticSolution& sol);

// Cell-averaged f₀ on an isotropic grid covering [0, R₀] x [0, ξ_max(ε_c)].
DistributionFunction sample_static(const StaticSolution& sol, std::size_t nr, std::size_t nv);

struct CbecVerdict {
    bool cbec = false;       // D < -M
    bool E_b_positive = false;
    double E_Cb = 0;
    double E_b = 0;
};
CbecVerdict check_cbec(const FunctionalReport& rep);

struct Witness {
    DistributionFunction f;
    double A = 0, a = 0, b = 0, c = 0, theta_b = 0;
    double D_closed = 0;
    double mass_ratio_lhs = 0, mass_ratio_rhs = 0;
    bool exceeds_mass = false;       // |D| > M
};
Witness cbec_witness(double k, double M, double sigma0, double b, std::size_t nr = 64,
                     std::size_t nv = 16);

struct SweepRow {
    double central_eps = 0;
    double M = 0, R0 = 0, compactness = 0, D = 0, E_b = 0, E_Cb = 0;
    double C = 0, mass_identity_residual = 0;
    bool cbec = false;
    std::string error;       // empty on success
};
std::vector<SweepRow> sweep_family(double k, double eps_lo, double eps_hi, std::size_t n,
                                   const StaticOptions& opt = {});
std::string sweep_csv(const std::vector<SweepRow>& rows);

} // namespace evc
