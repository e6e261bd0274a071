#include "evcasimir/random_fields.hpp"

#include <algorithm>
#include <cmath>

#include "evcasimir/errors.hpp"

namespace evc {

namespace {

// 53-bit uniform in [0, 1); identical on every platform for a given engine state.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace

DistributionFunction random_field(std::mt19937_64& rng, const RandomFieldSpec& spec, double M,
                                  double beta, double cap)
{
    if (!(M > 0.0 && beta > 0.0 && cap > 0.0)) throw ParameterError("random_field: bad targets");
    double vmax = spec.vmax_lo + (spec.vmax_hi - spec.vmax_lo) * unit(rng);
    std::vector<double> v = uniform_edges(0.0, vmax, spec.nv);
    bool tail = spec.tail_fraction > 0.0;
    if (tail) {
        if (!(spec.tail_lo > vmax && spec.tail_hi > spec.tail_lo))
            throw ParameterError("random_field: tail band must lie beyond the body");
        std::vector<double> t = uniform_edges(spec.tail_lo, spec.tail_hi, spec.tail_cells);
        v.insert(v.end(), t.begin(), t.end());
    }
    PhaseGrid g(uniform_edges(0.0, 1.0, spec.nr), v, uniform_edges(-1.0, 1.0, spec.nc));
    DistributionFunction u(g);
    std::size_t nq = g.ncell_v();
    double body = 0.0, far = 0.0;
    for (std::size_t i = 0; i < g.nr(); ++i) {
        bool gap = i >= spec.gap_lo && i < spec.gap_hi;
        for (std::size_t j = 0; j < g.nv(); ++j) {
            bool in_body = j < spec.nv;
            bool in_tail = tail && j > spec.nv;
            for (std::size_t l = 0; l < g.nc(); ++l) {
                double x = unit(rng);
                double y = unit(rng);
                if (gap || !(in_body || in_tail) || x >= spec.fill) continue;
                double val = in_tail ? 0.5 + 0.5 * y : y;
                u.at(i, j, l) = val;
                double w = g.vol_x[i] * g.e_w[j * g.nc() + l] * val;
                (in_tail ? far : body) += w;
            }
        }
    }
    // keep both sides of a gap and the body non-empty
    auto seed_cell = [&](std::size_t i) {
        if (u.at(i, 0, 0) == 0.0) {
            u.at(i, 0, 0) = 0.5;
            body += g.vol_x[i] * g.e_w[0] * 0.5;
        }
    };
    if (spec.gap_hi > spec.gap_lo) {
        seed_cell(0);
        seed_cell(g.nr() - 1);
    }
    if (body == 0.0) seed_cell(0);
    if (tail) {
        if (far == 0.0) {
            u.at(0, spec.nv + 1, 0) = 1.0;
            far = g.vol_x[0] * g.e_w[(spec.nv + 1) * g.nc()];
        }
        double s = spec.tail_fraction / (1.0 - spec.tail_fraction) * body / far;
        for (std::size_t i = 0; i < g.nr(); ++i)
            for (std::size_t j = spec.nv + 1; j < g.nv(); ++j)
                for (std::size_t l = 0; l < g.nc(); ++l) u.at(i, j, l) *= s;
    }
    (void)nq;

    MassModel mm = mass_model(u);
    double mu = mm.total();
    double rho_max = *std::max_element(mm.rho.begin(), mm.rho.end());
    double mr_max = 0.5 * mm.max_two_m_over_r();
    double L1 = std::cbrt(M * rho_max / (mu * cap));
    double L2 = M * mr_max / (mu * beta);
    double L = std::max(L1, L2) * (1.0 + 1e-9) * (1.0 + spec.slack_max * unit(rng));
    double A = M / (mu * L * L * L);
    std::vector<double> r = g.r;
    for (double& x : r) x *= L;
    std::vector<double> vals = u.f;
    for (double& x : vals) x *= A;
    return DistributionFunction(PhaseGrid(std::move(r), g.v, g.c), std::move(vals));
}

} // namespace evc
