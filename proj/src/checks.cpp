#include "evcasimir/checks.hpp"

#include <algorithm>
#include <cmath>

#include "evcasimir/errors.hpp"
#include "evcasimir/random_fields.hpp"

namespace evc {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Worst {
    double v = -INFINITY;
    void add(double x) { v = std::max(v, x); }
    double get() const { return std::isfinite(v) ? v : 0.0; }
};

struct Least {
    double v = INFINITY;
    void add(double x) { v = std::min(v, x); }
    double get() const { return std::isfinite(v) ? v : 0.0; }
};

json error_json(const Error& e) { return json{{"kind", e.kind()}, {"message", e.what()}}; }

json annulus_check()
{
    PhaseGrid g = make_grid(0.1, 1, 2.0, 8, 1, {}, {annulus_inner(), annulus_outer()});
    DistributionFunction f(g);
    f.at(0, 0, 0) = 2.0;   // one capped cell so the annulus is built
    auto [out, tr] = cap_excess(f, 1.0);
    double rel = std::fabs(tr.info.at("H_measure") - 8.0) / 8.0;
    return json{{"H_measure", tr.info.at("H_measure")}, {"rel_err", rel}, {"pass", rel <= 1e-8}};
}

json machine_suite(const AdmissibleParams& p, std::mt19937_64& rng, std::size_t count)
{
    double P0 = p.P0();
    Worst cap_dD, cap_rho, imp_dD, imp_rho, rr_dD, rg_dD, rg_mass;
    std::size_t cap_fail = 0, imp_fail = 0, decay_fail = 0, rr_fail = 0, rr_bound_fail = 0;
    std::size_t rg_fail = 0, rg_cases = 0;
    std::size_t branches[4] = {0, 0, 0, 0};
    json errors = json::array();
    for (std::size_t n = 0; n < count; ++n) {
        RandomFieldSpec s;
        s.vmax_lo = 0.02;
        s.vmax_hi = n % 3 == 0 ? 0.1 : (n % 3 == 1 ? 0.5 : 3.0);
        if (n % 2 == 0) {
            s.tail_lo = P0 * double(1 + n % 5);
            s.tail_hi = 1.5 * s.tail_lo;
            s.tail_fraction = 0.1 + 0.05 * double((n * 7) % 10);
        }
        DistributionFunction f = random_field(rng, s, p.M, p.beta, 1.0);
        try {
            auto [g1, t1] = cap_excess(f, p.k);
            cap_dD.add(t1.D_after - t1.D_before);
            cap_rho.add(t1.rho_max_dev);
            if (t1.D_after > t1.D_before + 1e-10 || t1.rho_max_dev > 1e-9) ++cap_fail;

            auto [g2, t2] = improve_tail(f, p);
            imp_dD.add(t2.D_after - t2.D_before);
            imp_rho.add(t2.rho_max_dev);
            if (t2.D_after > t2.D_before + 1e-10 || t2.rho_max_dev > 1e-9) ++imp_fail;
            ++branches[std::clamp(t2.branch, 0, 3)];
            for (double P : {P0 + 1.0, 2.0 * P0, 4.0 * P0})
                if (!(velocity_tail_mass(g2, P + 1.0) <= 2.0 * std::pow(P, -0.25))) ++decay_fail;

            auto [g3, t3] = restrict_rescale(f, f.grid.r[f.grid.nr() / 2], p.k);
            rr_dD.add(t3.D_after - t3.D_before);
            if (t3.D_after > t3.D_before + 1e-10) ++rr_fail;
            if (t3.D_after > t3.info.at("bound") + 1e-10 * (1.0 + std::fabs(t3.D_after)))
                ++rr_bound_fail;
        } catch (const Error& e) {
            errors.push_back(error_json(e));
        }
    }
    for (std::size_t n = 0; n < count; ++n) {
        RandomFieldSpec s;
        s.gap_lo = 3;
        s.gap_hi = 6;
        s.vmax_lo = 0.05;
        s.vmax_hi = 2.0;
        DistributionFunction f = random_field(rng, s, p.M, p.beta, 0.9 * p.sigma0);
        try {
            auto [g, t] = remove_gap(f, f.grid.r[3], f.grid.r[6], p);
            ++rg_cases;
            rg_dD.add(t.D_after - t.D_before);
            rg_mass.add(t.info.at("mass_after") / t.info.at("mass_before") - 1.0);
            if (t.D_after > t.D_before + 1e-10) ++rg_fail;
        } catch (const Error& e) {
            errors.push_back(error_json(e));
        }
    }
    bool pass = cap_fail + imp_fail + decay_fail + rg_fail == 0 && errors.empty();
    return json{
        {"cases", count},
        {"cap_excess", {{"worst_dD", cap_dD.get()}, {"worst_rho_dev", cap_rho.get()}, {"fails", cap_fail}}},
        {"improve_tail",
         {{"worst_dD", imp_dD.get()},
          {"worst_rho_dev", imp_rho.get()},
          {"fails", imp_fail},
          {"tail_decay_fails", decay_fail},
          {"case_counts", {branches[1], branches[2], branches[3]}}}},
        {"restrict_rescale",
         {{"worst_dD", rr_dD.get()}, {"descent_fails", rr_fail}, {"bound_fails", rr_bound_fail}}},
        {"remove_gap",
         {{"cases", rg_cases},
          {"worst_dD", rg_dD.get()},
          {"fails", rg_fail},
          {"max_mass_change", rg_mass.get()}}},
        {"errors", errors},
        {"pass", pass}};
}

json convexity_suite(const AdmissibleParams& p, std::mt19937_64& rng, std::size_t count)
{
    Least slack;
    for (std::size_t n = 0; n < count; ++n) {
        RandomFieldSpec s;
        DistributionFunction f = random_field(rng, s, p.M, p.beta, p.sigma0);
        DistributionFunction g(f.grid);
        for (std::size_t q = 0; q < f.f.size(); ++q) g.f[q] = f.f[q] * 1.5 * unit(rng);
        slack.add(midpoint_convexity_probe(f, g, p.k).slack());
    }
    return json{{"pairs", count}, {"min_slack", slack.get()}, {"pass", slack.get() >= -1e-10}};
}

json scaling_suite(const AdmissibleParams& p, std::mt19937_64& rng, std::size_t count)
{
    Worst mass_err, D_excess, lam_err;
    for (std::size_t n = 0; n < count; ++n) {
        RandomFieldSpec s;
        DistributionFunction f = random_field(rng, s, p.M, p.beta, p.sigma0);
        FunctionalReport rf = evaluate(f, p.k);
        MassModel mf = mass_model(f);
        std::vector<double> lf = lambda_of_m(mf.r, mf.m);
        for (double gamma : {0.5, 0.9}) {
            DistributionFunction fg = scale(f, gamma);
            FunctionalReport rg = evaluate(fg, p.k);
            mass_err.add(std::fabs(rg.M * gamma / rf.M - 1.0));
            D_excess.add(rg.D - rf.D / gamma);
            MassModel mg = mass_model(fg);
            std::vector<double> lg = lambda_of_m(mg.r, mg.m);
            for (std::size_t i = 0; i < lg.size(); ++i) lam_err.add(std::fabs(lg[i] - lf[i]));
        }
    }
    bool pass = mass_err.get() <= 1e-6 && D_excess.get() <= 1e-9 && lam_err.get() <= 1e-8;
    return json{{"cases", count},
                {"worst_mass_rel_err", mass_err.get()},
                {"worst_D_excess", D_excess.get()},
                {"worst_lambda_err", lam_err.get()},
                {"pass", pass}};
}

json shell_suite(const AdmissibleParams& p, std::mt19937_64& rng, std::size_t count)
{
    AnsatzTables t = build_ansatz(p.k, 16);
    PhaseGrid g = make_grid(1.0, 1, 2.0, 48, 4);
    double cap = 0.0;
    for (double w : g.e_w) cap += w;
    Least margin;
    Worst constraint;
    for (std::size_t n = 0; n < count; ++n) {
        double a = 0.5 * cap * unit(rng);
        ShellSolution sol = project_shell({0.5, a, p.k}, t, g);
        constraint.add(std::fabs(sol.constraint_residual));
        for (const auto& psi : shell_competitors(rng, g, a, sol.psi, 10))
            margin.add(shell_casimir(psi, p.k, g) - sol.H);
    }
    bool pass = margin.get() >= -1e-9 && constraint.get() <= 1e-8;
    return json{{"shells", count},
                {"competitors_per_shell", 10},
                {"min_margin", margin.get()},
                {"worst_constraint_residual", constraint.get()},
                {"pass", pass}};
}

json static_check(const AdmissibleParams& p)
{
    StaticSolution sol = integrate_static(p.k, 0.9);
    double absD = std::fabs(sol.report.D);
    double mass_id = std::fabs(sol.mass_identity_integral - sol.M) / sol.M;
    bool sandwich = 0.5 * sol.C * sol.M <= absD && absD <= sol.C * sol.M;
    bool pass = mass_id <= 1e-4 && sandwich && sol.compactness < 8.0 / 9.0;
    return json{{"central_eps", 0.9},        {"M", sol.M},       {"R0", sol.R0},
                {"compactness", sol.compactness}, {"D", sol.report.D}, {"mass_identity_residual", mass_id},
                {"sandwich", sandwich},      {"pass", pass}};
}

json uniform_ball_check(const AdmissibleParams& p)
{
    double sigma = 0.5 * p.sigma_M();
    double r1 = std::cbrt(3.0 * p.M / (4.0 * 3.14159265358979323846 * sigma));
    PhaseGrid g = make_grid(2.0 * r1, 64, 1.0, 1, 1, {r1});
    std::vector<double> rho(g.nr(), 0.0);
    for (std::size_t i = 0; i < g.nr(); ++i)
        if (g.r[i + 1] <= r1 * (1.0 + 1e-14)) rho[i] = sigma;
    MassModel mm(g.r, rho);
    double got = mm.max_two_m_over_r();
    double want = two_m_over_r_bound(sigma, p.M);
    double rel = std::fabs(got / want - 1.0);
    return json{{"sigma", sigma}, {"max_two_m_over_r", got}, {"bound", want}, {"rel_err", rel},
                {"pass", rel <= 1e-8}};
}

} // namespace

std::vector<std::vector<double>> shell_competitors(std::mt19937_64& rng, const PhaseGrid& grid,
                                                   double a, const std::vector<double>& around,
                                                   std::size_t n)
{
    std::vector<std::vector<double>> out;
    std::size_t nq = grid.ncell_v();
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> psi(nq);
        for (double& x : psi) x = unit(rng);
        double w = 0.0;
        for (std::size_t q = 0; q < nq; ++q) w += grid.e_w[q] * psi[q];
        for (double& x : psi) x *= a / w;
        if (c % 2 == 1 && around.size() == nq) {
            double t = 0.2 * unit(rng);
            for (std::size_t q = 0; q < nq; ++q) psi[q] = (1.0 - t) * around[q] + t * psi[q];
        }
        out.push_back(std::move(psi));
    }
    return out;
}

json property_suite(const AdmissibleParams& params, std::uint64_t seed, std::size_t count)
{
    AdmissibleParams p = params.validated();
    std::mt19937_64 rng(seed);
    json rep;
    rep["seed"] = seed;
    rep["count"] = count;
    rep["params"] = to_json(p);
    rep["annulus"] = annulus_check();
    rep["machines"] = machine_suite(p, rng, count);
    rep["convexity"] = convexity_suite(p, rng, count);
    rep["scaling"] = scaling_suite(p, rng, count);
    rep["shell_optimality"] = shell_suite(p, rng, count);
    rep["uniform_ball"] = uniform_ball_check(p);
    rep["static"] = static_check(p);
    rep["saturation_bound"] = small_mass_saturation_bound();
    bool all = true;
    for (const char* key : {"annulus", "machines", "convexity", "scaling", "shell_optimality",
                            "uniform_ball", "static"})
        all = all && rep[key]["pass"].get<bool>();
    rep["pass"] = all;
    return rep;
}

} // namespace evc
