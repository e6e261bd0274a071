#include "evcasimir/static_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/numeric/odeint.hpp>

#include "evcasimir/errors.hpp"
#include "evcasimir/parallel.hpp"

namespace evc {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class F>
double integrate_to_cutoff(F&& fn, double e)
{
    if (e >= 1.0) return 0.0;
    thread_local boost::math::quadrature::tanh_sinh<double> ts;
    double top = xi_max(e);
    return ts.integrate(fn, 0.0, top, 1e-14);
}

double base(double e, double xi)
{
    double b = 1.0 - e * std::sqrt(1.0 + xi * xi);
    return b > 0.0 ? b : 0.0;
}

} // namespace

double xi_max(double e)
{
    if (e >= 1.0) return 0.0;
    return std::sqrt((1.0 - e) * (1.0 + e)) / e;
}

double AnsatzTables::G(double e) const
{
    return integrate_to_cutoff(
        [&](double x) { return x * x * std::pow(base(e, x), k + 1.0); }, e);
}

double AnsatzTables::Gp(double e) const
{
    return -(k + 1.0) * integrate_to_cutoff(
        [&](double x) { return x * x * std::sqrt(1.0 + x * x) * std::pow(base(e, x), k); }, e);
}

double AnsatzTables::rho(double e) const { return -4.0 * kPi * Gp(e) / (k + 1.0); }

double AnsatzTables::p(double e) const
{
    return 4.0 * kPi / 3.0 * integrate_to_cutoff(
        [&](double x) {
            double x2 = x * x;
            return x2 * x2 / std::sqrt(1.0 + x2) * std::pow(base(e, x), k);
        }, e);
}

double AnsatzTables::n(double e) const
{
    return 4.0 * kPi * integrate_to_cutoff(
        [&](double x) { return x * x * std::pow(base(e, x), k); }, e);
}

double AnsatzTables::casimir_density(double e) const
{
    return k / (k + 1.0) * 4.0 * kPi * G(e);
}

AnsatzTables build_ansatz(double k, std::size_t n_eps)
{
    if (!(k > 0.0 && k <= 2.0)) throw DomainError("ansatz exponent k must lie in (0, 2]");
    if (n_eps < 2) throw DomainError("ansatz table needs at least two nodes");
    AnsatzTables t;
    t.k = k;
    for (std::size_t i = 1; i <= n_eps; ++i) {
        double e = static_cast<double>(i) / static_cast<double>(n_eps);
        t.eps.push_back(e);
        t.G_tab.push_back(t.G(e));
        t.Gp_tab.push_back(t.Gp(e));
        t.rho_tab.push_back(t.rho(e));
        t.p_tab.push_back(t.p(e));
    }
    return t;
}

double invert_Gprime(double target, const AnsatzTables& t)
{
    if (target > 0.0) throw RangeError("G' target must be <= 0");
    if (target == 0.0) return 1.0;
    // geometric bracket first; G' ~ -ε^-4 as ε -> 0
    double lo = 0.5, hi = 1.0;
    while (t.Gp(lo) > target) {
        hi = lo;
        lo *= 0.5;
        if (lo < 1e-20) throw RangeError("density exceeds the ansatz range");
    }
    for (;;) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (t.Gp(mid) < target) lo = mid; else hi = mid;
    }
    return std::abs(t.Gp(lo) - target) < std::abs(t.Gp(hi) - target) ? lo : hi;
}

// ---------------------------------------------------------------------------
// Shooting

namespace {

// y = {m, μ_raw, ∫(ρ+3p), ∫(ρ+p), particle number, ∫χ}
using State = std::array<double, 6>;

struct Rhs {
    const AnsatzTables* t;
    double eps_c;
    void operator()(const State& y, State& dy, double r) const
    {
        double tm = 2.0 * y[0] / r;
        if (tm >= 1.0) throw HorizonError("2m/r reached 1 during the static solve");
        double e2l = 1.0 / (1.0 - tm);
        double el = std::sqrt(e2l);
        double e = eps_c * std::exp(y[1]);
        double rho = 0, p = 0, n = 0, chi = 0;
        if (e < 1.0) {
            rho = t->rho(e);
            p = t->p(e);
            n = t->n(e);
            chi = t->casimir_density(e);
        }
        double w = 4.0 * kPi * r * r;
        double eml = std::exp(y[1]) * el;
        dy[0] = w * rho;
        dy[1] = e2l * (y[0] / (r * r) + 4.0 * kPi * r * p);
        dy[2] = w * (rho + 3.0 * p) * eml;
        dy[3] = w * (rho + p) * eml;
        dy[4] = w * el * n;
        dy[5] = w * el * chi;
    }
};

double hermite(const std::vector<double>& x, const std::vector<double>& y,
               const std::vector<double>& d, double r)
{
    if (r <= x.front()) return y.front() + d.front() * (r - x.front());
    if (r >= x.back()) return y.back() + d.back() * (r - x.back());
    std::size_t i = std::upper_bound(x.begin(), x.end(), r) - x.begin() - 1;
    double h = x[i + 1] - x[i];
    double s = (r - x[i]) / h;
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * d[i]
           + (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * d[i + 1];
}

} // namespace

double StaticSolution::mu_raw(double r) const
{
    if (r < knot_r.front()) {
        // regular series at the centre
        double a = knot_mu.front() / (knot_r.front() * knot_r.front());
        return a * r * r;
    }
    return hermite(knot_r, knot_mu, knot_dmu, r);
}

double StaticSolution::m_of(double r) const
{
    if (r >= R0) return M;
    if (r < knot_r.front()) {
        double r0 = knot_r.front();
        return knot_m.front() * (r / r0) * (r / r0) * (r / r0);
    }
    return hermite(knot_r, knot_m, knot_dm, r);
}

double StaticSolution::eps_tilde(double r) const
{
    if (r >= R0) return 1.0;
    return std::min(1.0, central_eps * std::exp(mu_raw(r)));
}

StaticSolution integrate_static(double k, double central_eps, const StaticOptions& opt)
{
    return integrate_static(build_ansatz(k, 8), central_eps, opt);
}

StaticSolution integrate_static(const AnsatzTables& t, double central_eps, const StaticOptions& opt)
{
    namespace ode = boost::numeric::odeint;
    if (!(central_eps > 0.0)) throw DomainError("central_eps must be positive");
    if (central_eps >= 1.0) throw NoSupportError("central_eps >= 1 gives the vacuum");

    StaticSolution sol;
    sol.k = t.k;
    sol.central_eps = central_eps;
    sol.tables = t;
    Rhs rhs{&t, central_eps};

    double rho_c = t.rho(central_eps), p_c = t.p(central_eps);
    double n_c = t.n(central_eps), chi_c = t.casimir_density(central_eps);
    double L = 1.0 / std::sqrt(4.0 * kPi * (rho_c + 3.0 * p_c));
    double r0 = 1e-5 * L;
    double r03 = r0 * r0 * r0;
    State y{4.0 * kPi / 3.0 * rho_c * r03,
            2.0 * kPi / 3.0 * (rho_c + 3.0 * p_c) * r0 * r0,
            4.0 * kPi / 3.0 * (rho_c + 3.0 * p_c) * r03,
            4.0 * kPi / 3.0 * (rho_c + p_c) * r03,
            4.0 * kPi / 3.0 * n_c * r03,
            4.0 * kPi / 3.0 * chi_c * r03};
    const double mu_end = -std::log(central_eps);

    auto push_knot = [&](double r, const State& s) {
        State d;
        rhs(s, d, r);
        sol.knot_r.push_back(r);
        sol.knot_m.push_back(s[0]);
        sol.knot_mu.push_back(s[1]);
        sol.knot_dm.push_back(d[0]);
        sol.knot_dmu.push_back(d[1]);
        sol.max_two_m_over_r = std::max(sol.max_two_m_over_r, 2.0 * s[0] / r);
    };

    auto stepper = ode::make_dense_output(opt.atol, opt.rtol, ode::runge_kutta_dopri5<State>());
    stepper.initialize(y, r0, 1e-3 * L);
    push_knot(r0, y);
    State ys = y;
    const int kSub = 4;
    for (std::size_t it = 0;; ++it) {
        if (it > 2000000) throw RangeError("static solve did not reach the support edge");
        auto [ta, tb] = stepper.do_step(rhs);
        const State& yb = stepper.current_state();
        if (!std::isfinite(yb[0]) || !std::isfinite(yb[1]))
            throw HorizonError("static solve diverged");
        if (yb[1] < mu_end) {
            for (int s = 1; s < kSub; ++s) {
                double rr = ta + (tb - ta) * s / kSub;
                stepper.calc_state(rr, ys);
                push_knot(rr, ys);
            }
            push_knot(tb, yb);
            continue;
        }
        // event inside (ta, tb]: bisection on the dense output
        double lo = ta, hi = tb;
        while (hi - lo > 1e-12 * hi) {
            double mid = 0.5 * (lo + hi);
            stepper.calc_state(mid, ys);
            if (ys[1] < mu_end) lo = mid; else hi = mid;
        }
        for (int s = 1; s < kSub; ++s) {
            double rr = ta + (hi - ta) * s / kSub;
            if (rr <= sol.knot_r.back()) continue;
            stepper.calc_state(rr, ys);
            push_knot(rr, ys);
        }
        stepper.calc_state(hi, ys);
        ys[1] = mu_end;
        push_knot(hi, ys);
        sol.R0 = hi;
        break;
    }

    sol.M = ys[0];
    sol.compactness = 2.0 * sol.M / sol.R0;
    double one_m = 1.0 - sol.compactness;
    sol.C = 1.0 / std::sqrt(one_m);
    sol.mu_shift = 0.5 * std::log(one_m) - mu_end;
    double es = std::exp(sol.mu_shift);
    sol.mass_identity_integral = es * ys[2];
    sol.d_integral = es * ys[3];

    FunctionalReport& rep = sol.report;
    rep.M = sol.M;
    rep.D = -sol.C * sol.d_integral;
    rep.M0 = ys[4];
    rep.Psi = ys[5];
    rep.E_b = rep.M0 - rep.M;
    rep.E_Cb = -rep.D - rep.M;
    rep.max_two_m_over_r = sol.max_two_m_over_r;

    RadialProfile& pr = sol.profile;
    std::size_t np = std::max<std::size_t>(opt.n_profile, 2);
    for (std::size_t i = 0; i < np; ++i) {
        double r = sol.R0 * (static_cast<double>(i) + 0.5) / static_cast<double>(np);
        double e = sol.eps_tilde(r);
        double m = sol.m_of(r);
        pr.r.push_back(r);
        pr.rho.push_back(t.rho(e));
        pr.p.push_back(t.p(e));
        pr.m.push_back(m);
        pr.lam.push_back(-0.5 * std::log(1.0 - 2.0 * m / r));
        pr.mu.push_back(sol.mu_raw(r) + sol.mu_shift);
    }
    return sol;
}

FunctionalReport functional_of_static(const StaticSolution& sol) { return sol.report; }

DistributionFunction sample_static(const StaticSolution& sol, std::size_t nr, std::size_t nv)
{
    using boost::math::quadrature::gauss;
    const double k = sol.k;
    PhaseGrid g = make_grid(sol.R0, nr, xi_max(sol.central_eps), nv, 1);
    DistributionFunction f(g);
    parallel_for(nr, [&](std::size_t i) {
        auto shell = [&](double r, std::size_t j) {
            double e = sol.eps_tilde(r);
            double top = std::min(g.v[j + 1], xi_max(e));
            if (top <= g.v[j]) return 0.0;
            return gauss<double, 8>::integrate(
                [&](double s) { return s * s * std::pow(base(e, s), k); }, g.v[j], top);
        };
        for (std::size_t j = 0; j < nv; ++j) {
            double val = gauss<double, 6>::integrate(
                [&](double r) { return r * r * shell(r, j); }, g.r[i], g.r[i + 1]);
            val *= 16.0 * kPi * kPi;
            f.at(i, j, 0) = val / (g.vol_x[i] * g.vol_v[j]);
        }
    });
    return f;
}

CbecVerdict check_cbec(const FunctionalReport& rep)
{
    CbecVerdict v;
    v.E_Cb = -rep.D - rep.M;
    v.E_b = rep.M0 - rep.M;
    v.cbec = rep.D < -rep.M;
    v.E_b_positive = v.E_b > 0.0;
    return v;
}

Witness cbec_witness(double k, double M, double sigma0, double b, std::size_t nr, std::size_t nv)
{
    if (!(k > 0.0 && k <= 2.0)) throw ParameterError("k must lie in (0, 2]");
    if (!(M > 0.0)) throw ParameterError("M must be positive");
    if (!(b > 0.0)) throw ParameterError("b must be positive");
    Witness w;
    w.A = std::pow(0.125, k);
    w.b = b;
    w.theta_b = theta(b);
    double At = w.A * w.theta_b;
    if (At > sigma0) throw ParameterError("A*theta(b) exceeds sigma0; decrease b");
    w.a = std::cbrt(3.0 * M / (4.0 * kPi * At));
    w.c = std::sqrt(8.0 * kPi / 3.0 * At);
    double ca = w.c * w.a;
    double loss = 1.0 - k / (k + 1.0) * std::pow(w.A, 1.0 / k);
    double arc = std::asin(ca) - ca * std::sqrt((1.0 - ca) * (1.0 + ca));
    w.D_closed = -w.A * loss * 8.0 * kPi * kPi / 3.0 * std::pow(b / w.c, 3) * arc;
    w.mass_ratio_lhs = 4.0 * loss * arc / (ca * ca * ca);
    w.mass_ratio_rhs = 2.0 * w.theta_b / (kPi * b * b * b);
    w.exceeds_mass = w.mass_ratio_lhs > w.mass_ratio_rhs;
    PhaseGrid g = make_grid(w.a, nr, b, nv, 1);
    w.f = DistributionFunction(g, std::vector<double>(g.size(), w.A));
    return w;
}

std::vector<SweepRow> sweep_family(double k, double eps_lo, double eps_hi, std::size_t n,
                                   const StaticOptions& opt)
{
    if (n < 2) throw ParameterError("sweep needs n >= 2");
    if (!(eps_lo > 0.0 && eps_hi < 1.0 && eps_lo <= eps_hi))
        throw ParameterError("sweep range must lie in (0, 1)");
    AnsatzTables t = build_ansatz(k, 8);
    std::vector<SweepRow> rows(n);
    parallel_for(n, [&](std::size_t i) {
        SweepRow& row = rows[i];
        row.central_eps = eps_lo + (eps_hi - eps_lo) * static_cast<double>(i)
                                       / static_cast<double>(n - 1);
        try {
            StaticSolution s = integrate_static(t, row.central_eps, opt);
            row.M = s.M;
            row.R0 = s.R0;
            row.compactness = s.compactness;
            row.D = s.report.D;
            row.E_b = s.report.E_b;
            row.E_Cb = s.report.E_Cb;
            row.C = s.C;
            row.mass_identity_residual = (s.mass_identity_integral - s.M) / s.M;
            row.cbec = check_cbec(s.report).cbec;
        } catch (const Error& e) {
            row.error = std::string(e.kind()) + ": " + e.what();
        }
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    os << "central_eps,M,R0,compactness,D,E_b,E_Cb,cbec\n";
    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        os << num(r.central_eps) << ',';
        if (!r.error.empty()) {
            os << ",,,,,,\"error: " << r.error << "\"\n";
            continue;
        }
        os << num(r.M) << ',' << num(r.R0) << ',' << num(r.compactness) << ',' << num(r.D) << ','
           << num(r.E_b) << ',' << num(r.E_Cb) << ',' << (r.cbec ? "true" : "false") << '\n';
    }
    return os.str();
}

} // namespace evc
