#include "doctest.h"

#include <algorithm>

#include "evcasimir/checks.hpp"
#include "evcasimir/errors.hpp"
#include "evcasimir/minimizer.hpp"
#include "oracles.hpp"

using namespace evc;

namespace {

struct Case {
    StaticSolution sol;
    AdmissibleParams p;
    PhaseGrid grid;
    MinimizerState from_flat;
};

// Static member of mass 0.1 (k = 1) and the minimizer run from a flat start.
const Case& small_mass()
{
    static const Case c = [] {
        Case c;
        double lo = 0.9, hi = 0.999;
        for (int i = 0; i < 50; ++i) {
            double m = 0.5 * (lo + hi);
            (integrate_static(1.0, m).M > 0.1 ? lo : hi) = m;
        }
        c.sol = integrate_static(1.0, 0.5 * (lo + hi));
        c.p.M = c.sol.M;
        c.p.beta = 0.3;
        c.p.k = 1.0;
        c.p = c.p.validated();
        c.grid = make_grid(1.6 * c.sol.R0, 64, 1.3 * xi_max(c.sol.central_eps), 200, 1);
        c.from_flat = minimize(c.p, c.grid, flat_profile(c.grid, c.p.M, 0.8 * c.sol.R0));
        return c;
    }();
    return c;
}

// Random non-negative field on the support of f, rescaled to mass M.
DistributionFunction random_on_support(std::mt19937_64& rng, const DistributionFunction& f, double M,
                                       double blend)
{
    DistributionFunction g(f.grid);
    for (std::size_t q = 0; q < f.f.size(); ++q)
        if (f.f[q] > 0.0) g.f[q] = oracle::unit(rng) * f.f[q] * 2.0;
    for (std::size_t q = 0; q < f.f.size(); ++q) g.f[q] = (1 - blend) * f.f[q] + blend * g.f[q];
    double m = evaluate(g, 1.0).M;
    for (double& x : g.f) x *= M / m;
    return g;
}

} // namespace

TEST_SUITE("minimizer") {

TEST_CASE("project_shell: empty shell, constraint and optimality")
{
    for (double k : {0.5, 1.0, 2.0}) {
        AnsatzTables t = build_ansatz(k, 8);
        PhaseGrid g = make_grid(1.0, 1, 3.0, 64, 2);
        auto z = project_shell({0.4, 0.0, k}, t, g);
        for (double x : z.psi) CHECK(x == 0.0);
        CHECK_THROWS_AS(project_shell({0.4, -1.0, k}, t, g), DomainError);

        double cap = 0;
        for (double w : g.e_w) cap += w;
        std::mt19937_64 rng(50);
        for (int s = 0; s < 20; ++s) {
            double a = 0.4 * cap * oracle::unit(rng);
            auto sol = project_shell({0.1 + 0.05 * s, a, k}, t, g);
            double c = 0;
            for (std::size_t q = 0; q < sol.psi.size(); ++q) c += g.e_w[q] * sol.psi[q];
            CHECK(std::fabs(c - a) <= 1e-8 * a);
            for (const auto& psi : shell_competitors(rng, g, a, sol.psi, 50))
                CHECK(shell_casimir(psi, k, g) >= sol.H - 1e-9);
        }
    }
}

TEST_CASE("reduced functional")
{
    const Case& c = small_mass();
    auto z = reduced_functional(std::vector<double>(c.grid.nr(), 0.0), c.grid, 1.0);
    CHECK(z.D == 0.0);
    auto rv = reduced_functional(profile_from_static(c.sol, c.grid), c.grid, 1.0);
    CHECK(rv.D == doctest::Approx(c.sol.report.D).epsilon(1e-4));
    auto adm = check_admissible(rv.f, c.p);
    CHECK(adm.admissible);
    // reconstructed f has the requested shell densities
    auto rho = density(rv.f), want = profile_from_static(c.sol, c.grid);
    for (std::size_t i = 0; i < rho.size(); ++i) CHECK(rho[i] == doctest::Approx(want[i]).epsilon(1e-8));
}

TEST_CASE("minimize from a flat start")
{
    const Case& c = small_mass();
    const MinimizerState& s = c.from_flat;
    CHECK(s.converged);
    CHECK(s.D <= c.sol.report.D + 1e-6);
    CHECK(std::fabs(s.D / c.sol.report.D - 1.0) <= 1e-3);
    for (std::size_t i = 1; i < s.D_history.size(); ++i) CHECK(s.D_history[i] <= s.D_history[i - 1]);
    double m = 0;
    for (std::size_t i = 0; i < s.rho.size(); ++i) m += c.grid.vol_x[i] * s.rho[i];
    CHECK(std::fabs(m - c.p.M) <= 1e-8 * c.p.M);
    CHECK(*std::max_element(s.rho.begin(), s.rho.end()) <= c.p.sigma0);
    auto dg = convergence_diagnostics(s);
    CHECK(dg.u_cv <= 1e-2);
    CHECK(dg.v_support_ok);
    CHECK_FALSE(dg.saturation_applicable);
}

TEST_CASE("minimize from the static profile is a fixed point")
{
    const Case& c = small_mass();
    auto s = minimize(c.p, c.grid, profile_from_static(c.sol, c.grid));
    CHECK(s.iter <= 2);
    CHECK(s.D == doctest::Approx(c.from_flat.D).epsilon(1e-6));
    CHECK(convergence_diagnostics(s).u_cv <= 1e-2);
}

TEST_CASE("minimize rejects inadmissible starts")
{
    const Case& c = small_mass();
    auto rho = flat_profile(c.grid, c.p.M, 0.8 * c.sol.R0);
    auto heavy = rho;
    for (double& x : heavy) x *= 1.1;
    CHECK_THROWS_AS(minimize(c.p, c.grid, heavy), InitError);
    CHECK_THROWS_AS(minimize(c.p, c.grid, std::vector<double>(3, 0.0)), InitError);
    auto neg = rho;
    neg[0] = -1.0;
    CHECK_THROWS_AS(minimize(c.p, c.grid, neg), InitError);
}

TEST_CASE("variational residuals at the minimizer")
{
    const Case& c = small_mass();
    const MinimizerState& s = c.from_flat;
    auto self = variational_residual(s, s.f);
    CHECK(std::fabs(self.slim) <= 1e-12);
    CHECK(std::fabs(self.unslimmed) <= 1e-12);

    std::mt19937_64 rng(60);
    for (int n = 0; n < 40; ++n) {
        auto g = random_on_support(rng, s.f, c.p.M, n % 2 ? 1.0 : 0.1);
        REQUIRE(check_admissible(g, c.p).admissible);
        auto r = variational_residual(s, g);
        CHECK(r.slim >= -1e-8);
        CHECK(r.unslimmed >= -1e-8);
    }

    // equal-density competitor: per shell a feasible ψ' with the same Σ e_w ψ'
    DistributionFunction g = s.f;
    std::size_t nq = c.grid.ncell_v();
    for (std::size_t i = 0; i < c.grid.nr(); ++i) {
        double a = 0, b = 0;
        std::vector<double> w(nq, 0.0);
        for (std::size_t q = 0; q < nq; ++q) {
            double f0 = s.f.f[i * nq + q];
            a += c.grid.e_w[q] * f0;
            if (f0 > 0) w[q] = f0 * (0.5 + oracle::unit(rng));
            b += c.grid.e_w[q] * w[q];
        }
        if (b > 0)
            for (std::size_t q = 0; q < nq; ++q) g.f[i * nq + q] = w[q] * a / b;
    }
    auto r = variational_residual(s, g);
    CHECK(std::fabs(r.slim) <= 1e-12);
    CHECK(r.unslimmed >= -1e-8);

    DistributionFunction out = s.f;
    out.f.back() = 1.0;
    CHECK_THROWS_AS(variational_residual(s, out), SupportError);
}

TEST_CASE("small-mass saturation constant")
{
    double K = 12.0 / 25.0, q = 1.0 / std::sqrt(1.0 + K * K);
    double want = 21.0 / 20.0 * q + 21.0 / 40.0 * (1.0 - q);
    CHECK(small_mass_saturation_bound() == doctest::Approx(want).epsilon(1e-15));
    CHECK(std::fabs(small_mass_saturation_bound() - 0.998302) <= 1e-5);
}

}
