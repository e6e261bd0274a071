#pragma once

#include "evcasimir/core_model.hpp"

namespace evc {

// χ(s) = k/(k+1) s^{1+1/k}
double casimir(double s, double k);
// φ(s) = χ(s) - s
double phi(double s, double k);
double casimir_d1(double s, double k);
double casimir_d2(double s, double k);

struct FunctionalReport {
    double D = 0;
    double M = 0;
    double M0 = 0;
    double E_b = 0;
    double E_Cb = 0;
    double Psi = 0;
    double max_two_m_over_r = 0;
};

FunctionalReport evaluate(const DistributionFunction& f, double k);

// Per r cell: Σ_q vol_v[q] φ(f), Σ_q vol_v[q] χ(f), Σ_q vol_v[q] f.
struct ShellSums {
    std::vector<double> phi, chi, n;
};
ShellSums shell_sums(const DistributionFunction& f, double k);

// f_γ(x, v) = γ² f(γx, v) on the grid with r edges divided by γ.
DistributionFunction scale(const DistributionFunction& f, double gamma);

struct ConvexityProbe {
    double psi_f = 0, psi_g = 0, psi_mid = 0;
    double slack() const { return 0.5 * (psi_f + psi_g) - psi_mid; }
};
ConvexityProbe midpoint_convexity_probe(const DistributionFunction& f,
                                        const DistributionFunction& g, double k);

// Second variation integrand of Ψ at one phase-space point, for perturbation
// value h and its mass function m_h.  The first form is the raw expansion,
// the second the rearranged sum of squares; both must agree and the second
// is manifestly non-negative for k <= 2.
double d2psi_integrand(double f, double h, double m_h, double r, double lam, double k);
double d2psi_sum_of_squares(double f, double h, double m_h, double r, double lam, double k);

} // namespace evc
