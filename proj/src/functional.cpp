#include "evcasimir/functional.hpp"

#include <cmath>

#include "evcasimir/errors.hpp"
#include "evcasimir/parallel.hpp"

namespace evc {

double casimir(double s, double k)
{
    if (s < 0.0) throw DomainError("casimir: negative argument");
    if (s == 0.0) return 0.0;
    return k / (k + 1.0) * std::pow(s, 1.0 + 1.0 / k);
}

double phi(double s, double k) { return casimir(s, k) - s; }

double casimir_d1(double s, double k)
{
    if (s < 0.0) throw DomainError("casimir: negative argument");
    return s == 0.0 ? 0.0 : std::pow(s, 1.0 / k);
}

double casimir_d2(double s, double k)
{
    if (s < 0.0) throw DomainError("casimir: negative argument");
    return std::pow(s, 1.0 / k - 1.0) / k;
}

ShellSums shell_sums(const DistributionFunction& f, double k)
{
    const auto& g = f.grid;
    std::size_t nvc = g.ncell_v();
    ShellSums s;
    s.phi.assign(g.nr(), 0.0);
    s.chi.assign(g.nr(), 0.0);
    s.n.assign(g.nr(), 0.0);
    parallel_for(g.nr(), [&](std::size_t i) {
        const double* fi = &f.f[i * nvc];
        double c = 0.0, n = 0.0;
        for (std::size_t q = 0; q < nvc; ++q) {
            if (fi[q] < 0.0) throw DomainError("distribution has negative values");
            if (fi[q] == 0.0) continue;
            c += g.vol_v[q] * casimir(fi[q], k);
            n += g.vol_v[q] * fi[q];
        }
        s.chi[i] = c;
        s.n[i] = n;
        s.phi[i] = c - n;
    });
    return s;
}

FunctionalReport evaluate(const DistributionFunction& f, double k)
{
    MassModel mm = mass_model(f);
    FunctionalReport rep;
    rep.M = mm.total();
    rep.max_two_m_over_r = mm.max_two_m_over_r();
    if (rep.max_two_m_over_r >= 1.0) throw HorizonError("2m/r >= 1");
    std::vector<double> W = mm.elam_weights();
    ShellSums s = shell_sums(f, k);
    for (std::size_t i = 0; i < W.size(); ++i) {
        rep.Psi += W[i] * s.chi[i];
        rep.M0 += W[i] * s.n[i];
    }
    rep.D = rep.Psi - rep.M0;
    rep.E_b = rep.M0 - rep.M;
    rep.E_Cb = -rep.D - rep.M;
    return rep;
}

DistributionFunction scale(const DistributionFunction& f, double gamma)
{
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("scale: gamma must lie in (0, 1]");
    if (gamma == 1.0) return f;
    std::vector<double> r = f.grid.r;
    for (double& x : r) x /= gamma;
    std::vector<double> vals = f.f;
    double g2 = gamma * gamma;
    for (double& x : vals) x *= g2;
    return DistributionFunction(PhaseGrid(std::move(r), f.grid.v, f.grid.c), std::move(vals));
}

ConvexityProbe midpoint_convexity_probe(const DistributionFunction& f,
                                        const DistributionFunction& g, double k)
{
    if (!f.grid.same_as(g.grid)) throw GridMismatchError("convexity probe: grids differ");
    DistributionFunction mid(f.grid);
    for (std::size_t q = 0; q < mid.f.size(); ++q) mid.f[q] = 0.5 * (f.f[q] + g.f[q]);
    ConvexityProbe p;
    p.psi_f = evaluate(f, k).Psi;
    p.psi_g = evaluate(g, k).Psi;
    p.psi_mid = evaluate(mid, k).Psi;
    return p;
}

double d2psi_integrand(double f, double h, double m_h, double r, double lam, double k)
{
    return 3.0 / (r * r) * std::exp(5.0 * lam) * m_h * m_h * casimir(f, k)
           + 2.0 / r * std::exp(3.0 * lam) * m_h * casimir_d1(f, k) * h
           + std::exp(lam) * casimir_d2(f, k) * h * h;
}

double d2psi_sum_of_squares(double f, double h, double m_h, double r, double lam, double k)
{
    double a = 1.0 + 1.0 / k;
    double sq = a / std::sqrt(3.0) * h + std::sqrt(3.0) / r * std::exp(2.0 * lam) * m_h * f;
    return k / (k + 1.0) * std::exp(lam) * std::pow(f, 1.0 / k - 1.0)
           * (sq * sq + (2.0 - k) / (3.0 * k) * a * h * h);
}

} // namespace evc
