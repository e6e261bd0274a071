#include "doctest.h"

#include <algorithm>

#include "evcasimir/errors.hpp"
#include "evcasimir/random_fields.hpp"
#include "evcasimir/rearrangement.hpp"
#include "oracles.hpp"

using namespace evc;

namespace {

AdmissibleParams params(double M = 1.0, double beta = 0.3, double k = 1.0)
{
    AdmissibleParams p;
    p.M = M;
    p.beta = beta;
    p.k = k;
    return p.validated();
}

double max_dev(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

// Body in |v| <= vmax plus a band [lo, 1.5 lo] holding `frac` of the mass.
DistributionFunction tailed(std::uint64_t seed, double lo, double frac, const AdmissibleParams& p)
{
    std::mt19937_64 rng(seed);
    RandomFieldSpec s;
    s.vmax_lo = 0.05;
    s.vmax_hi = 0.5;
    s.tail_lo = lo;
    s.tail_hi = 1.5 * lo;
    s.tail_fraction = frac;
    return random_field(rng, s, p.M, p.beta, 1.0);
}

} // namespace

TEST_SUITE("rearrangement") {

TEST_CASE("annulus has measure 8")
{
    double a = annulus_inner(), b = annulus_outer();
    CHECK(a == doctest::Approx(std::cbrt(1.0 / (4.0 * oracle::pi))).epsilon(1e-14));
    CHECK(b == doctest::Approx(std::cbrt(25.0 / (4.0 * oracle::pi))).epsilon(1e-14));
    CHECK(a == doctest::Approx(0.43013).epsilon(1e-5));
    CHECK(4.0 * oracle::pi / 3.0 * (b * b * b - a * a * a) == doctest::Approx(8.0).epsilon(1e-14));

    PhaseGrid g = make_grid(0.1, 2, 3.0, 7, 3);
    DistributionFunction f(g);
    f.at(0, 0, 1) = 2.0;
    auto [out, tr] = cap_excess(f, 1.0);
    CHECK(std::fabs(tr.info.at("H_measure") - 8.0) / 8.0 <= 1e-8);
}

TEST_CASE("cap_excess: fixed point, ball uplift and idempotence")
{
    std::mt19937_64 rng(41);
    RandomFieldSpec s;
    auto f = random_field(rng, s, 1.0, 0.3, 0.9);
    for (double& x : f.f) x = std::min(x, 1.0);
    auto [same, t0] = cap_excess(f, 1.0);
    CHECK(same.f == f.f);
    CHECK(t0.D_after == t0.D_before);

    // f = 2 on a small |v| ball in one shell
    PhaseGrid g = make_grid(0.5, 4, 2.0, 16, 2);
    DistributionFunction h(g);
    h.at(1, 0, 0) = 2.0;
    h.at(1, 0, 1) = 2.0;
    h.at(2, 3, 1) = 0.3;
    REQUIRE(density(h)[1] <= 1.0);
    auto [out, tr] = cap_excess(h, 1.0);
    CHECK(out.max_value() <= 1.0 + 1e-12);
    CHECK(tr.D_after < tr.D_before);
    CHECK(max_dev(density(out), density(h)) <= 1e-9);

    // uplift: Δf · E on H_< is the constant ρ_D / |H_<|
    const auto& go = out.grid;
    DistributionFunction hr = refine_v(h, {annulus_inner(), annulus_outer()});
    REQUIRE(hr.grid.same_as(go));
    double rhoD = 0, Hlt = 0;
    std::vector<std::size_t> cells;
    for (std::size_t j = 0; j < go.nv(); ++j)
        for (std::size_t l = 0; l < go.nc(); ++l) {
            std::size_t q = j * go.nc() + l;
            double v = hr.at(1, j, l);
            if (v > 1.0) rhoD += go.e_w[q] * (v - 1.0);
            bool inH = go.v[j] >= annulus_inner() * (1 - 1e-12) &&
                       go.v[j + 1] <= annulus_outer() * (1 + 1e-12);
            if (inH && v < 0.5) {
                Hlt += go.vol_v[q];
                cells.push_back(q);
            }
        }
    REQUIRE(!cells.empty());
    for (std::size_t q : cells) {
        std::size_t j = q / go.nc(), l = q % go.nc();
        double lift = (out.at(1, j, l) - hr.at(1, j, l)) * go.e_w[q] / go.vol_v[q];
        CHECK(lift == doctest::Approx(rhoD / Hlt).epsilon(1e-12));
    }

    auto [again, t2] = cap_excess(out, 1.0);
    CHECK(again.f == out.f);

    DistributionFunction dense(make_grid(0.5, 2, 2.0, 4));
    for (double& x : dense.f) x = 2.0;
    CHECK_THROWS_AS(cap_excess(dense, 1.0), PreconditionError);
}

TEST_CASE("unit-shell root at P = 10")
{
    double xi = solve_unit_theta(10.0, 11.0);
    CHECK(xi == doctest::Approx(oracle::unit_shell(10.0)).epsilon(1e-13));
    // frozen from the quadrature oracle
    CHECK(xi == doctest::Approx(10.0000791816).epsilon(1e-10));
    CHECK_THROWS_AS(solve_unit_theta(0.0, 0.1), RangeError);
}

TEST_CASE("tail_rearrange on a heavy tail at P0")
{
    AdmissibleParams p = params();
    double P = p.P0();
    auto f0 = tailed(3, 1.2 * P, 0.4, p);
    auto [f, cap] = cap_excess(f0, p.k);
    REQUIRE(std::pow(P, 0.25) * velocity_tail_mass(f, P) >= 1.0);
    auto [g, tr] = tail_rearrange(f, P, p);
    CHECK(tr.D_after <= tr.D_before + 1e-10);
    CHECK(tr.rho_max_dev <= 1e-9);
    CHECK(max_dev(density(g), density(f)) <= 1e-9);
    CHECK(g.max_value() <= 1.0 + 1e-12);
    CHECK(velocity_tail_mass(g, P + 1.0) == 0.0);
    CHECK(std::pow(P, 0.25) * velocity_band_mass(g, P, P + 1.0) <= 1.0);
    // the trace's D values match a fresh evaluation
    CHECK(evaluate(g, p.k).D == tr.D_after);

    auto body = tailed(3, 1.2 * P, 0.001, p);
    auto [bc, t2] = cap_excess(body, p.k);
    CHECK_THROWS_AS(tail_rearrange(bc, P, p), PreconditionError);
    CHECK_THROWS_AS(tail_rearrange(f, 0.5 * P, p), PreconditionError);
}

TEST_CASE("improve_tail cases")
{
    AdmissibleParams p = params();
    double P0 = p.P0();

    SUBCASE("compact support is left alone")
    {
        std::mt19937_64 rng(8);
        auto f = random_field(rng, RandomFieldSpec{}, p.M, p.beta, 1.0);
        for (double& x : f.f) x = std::min(x, 1.0);
        auto [g, tr] = improve_tail(f, p);
        CHECK(tr.branch == 2);
        CHECK(g.f == f.f);
    }
    SUBCASE("tail at the first trigger lands inside P0 + 1")
    {
        double frac = std::pow(P0, -0.25) / p.M * (1.0 + 1e-6);
        auto f = tailed(9, P0, frac, p);
        auto [g, tr] = improve_tail(f, p);
        CHECK(tr.branch == 1);
        CHECK(velocity_tail_mass(g, P0 + 1.0) == 0.0);
        CHECK(tr.D_after <= tr.D_before + 1e-10);
    }
    SUBCASE("sub-trigger tail far out uses a later P")
    {
        auto f = tailed(10, 5.0 * P0, 0.09, p);
        auto [g, tr] = improve_tail(f, p);
        CHECK(tr.branch == 3);
        CHECK(tr.P_used > P0);
        CHECK(tr.D_after <= tr.D_before + 1e-10);
        CHECK(tr.rho_max_dev <= 1e-9);
    }
}

TEST_CASE("improve_tail: descent, density and tail decay on random fields")
{
    AdmissibleParams p = params();
    double P0 = p.P0();
    std::mt19937_64 rng(12);
    int counts[4] = {0, 0, 0, 0};
    for (int n = 0; n < 60; ++n) {
        RandomFieldSpec s;
        s.vmax_lo = 0.02;
        s.vmax_hi = 2.0;
        s.tail_lo = P0 * (0.5 + 5.0 * oracle::unit(rng));
        s.tail_hi = 1.5 * s.tail_lo;
        s.tail_fraction = 0.02 + 0.4 * oracle::unit(rng);
        auto f = random_field(rng, s, p.M, p.beta, 1.0);
        auto [g, tr] = improve_tail(f, p);
        ++counts[tr.branch];
        CHECK(tr.D_after <= tr.D_before + 1e-10);
        CHECK(tr.rho_max_dev <= 1e-9);
        CHECK(g.max_value() <= 1.0 + 1e-12);
        for (double P : {P0 + 1.0, 2.0 * P0, 4.0 * P0})
            CHECK(velocity_tail_mass(g, P + 1.0) <= 2.0 * std::pow(P, -0.25));
    }
    CHECK(counts[1] > 0);
    CHECK(counts[2] > 0);
    CHECK(counts[3] > 0);
}

TEST_CASE("remove_gap")
{
    AdmissibleParams p = params(1.0, 0.3, 1.0);
    std::mt19937_64 rng(14);
    RandomFieldSpec s;
    s.gap_lo = 3;
    s.gap_hi = 6;
    s.vmax_lo = 0.05;
    s.vmax_hi = 2.0;
    for (double k : {0.5, 1.0, 2.0}) {
        AdmissibleParams pk = params(1.0, 0.3, k);
        for (int n = 0; n < 20; ++n) {
            auto f = random_field(rng, s, pk.M, pk.beta, 0.9 * pk.sigma0);
            auto [g, tr] = remove_gap(f, f.grid.r[3], f.grid.r[6], pk);
            CHECK(tr.D_after < tr.D_before);
            CHECK(evaluate(g, k).D == doctest::Approx(tr.D_after).epsilon(1e-14));
            auto rho = density(g);
            CHECK(*std::max_element(rho.begin(), rho.end()) <= pk.sigma0 + 1e-12);
            CHECK(tr.info.at("delta") > 0.0);
        }
    }

    // nothing beyond the gap
    auto f = random_field(rng, s, p.M, p.beta, 0.9 * p.sigma0);
    DistributionFunction inner = f;
    std::size_t nvc = f.grid.ncell_v();
    for (std::size_t i = 3; i < f.grid.nr(); ++i)
        for (std::size_t q = 0; q < nvc; ++q) inner.f[i * nvc + q] = 0.0;
    AdmissibleParams pi = p;
    pi.M = evaluate(inner, 1.0).M;
    pi.sigma0 = 0;
    pi = pi.validated();
    auto [same, t0] = remove_gap(inner, f.grid.r[3], f.grid.r[6], pi);
    CHECK(t0.D_after == t0.D_before);

    CHECK_THROWS_AS(remove_gap(f, f.grid.r[2], f.grid.r[6], p), PreconditionError);
}

TEST_CASE("restrict_rescale")
{
    std::mt19937_64 rng(15);
    for (int n = 0; n < 20; ++n) {
        auto f = random_field(rng, RandomFieldSpec{}, 1.0, 0.3, 0.006);
        double R = f.grid.r[5];
        auto [g, tr] = restrict_rescale(f, R, 1.0);
        double gamma = tr.info.at("gamma");
        CHECK(tr.info.at("mass_after") == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(tr.D_after <= tr.info.at("bound") + 1e-12);
        // the output is f restricted to R and scaled: m_out(r) = m_f(γr)/γ for γr <= R
        MassModel mf = mass_model(f), mo = mass_model(g);
        for (std::size_t i = 0; i <= 5; ++i)
            CHECK(mo.m[i] == doctest::Approx(mf.m[i] / gamma).epsilon(1e-12));
        CHECK(g.grid.r[5] == doctest::Approx(R / gamma).epsilon(1e-14));
    }
    auto f = random_field(rng, RandomFieldSpec{}, 1.0, 0.3, 0.006);
    CHECK_THROWS_AS(restrict_rescale(f, f.grid.r.back(), 1.0), PreconditionError);
}

}
