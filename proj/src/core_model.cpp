#include "evcasimir/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>

#include "evcasimir/errors.hpp"
#include "evcasimir/parallel.hpp"

namespace evc {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <class F>
double gl20(F&& fn, double a, double b)
{
    return boost::math::quadrature::gauss<double, 20>::integrate(fn, a, b);
}

double theta_series(double b)
{
    // 4π Σ binom(1/2, n) b^{3+2n} / (3+2n)
    double b2 = b * b, term = b * b2, coef = 1.0, sum = 0.0;
    for (int n = 0; n < 14; ++n) {
        sum += coef * term / (3.0 + 2.0 * n);
        coef *= (0.5 - n) / (n + 1.0);
        term *= b2;
    }
    return 4.0 * kPi * sum;
}

double pm_series(double s)
{
    // Σ binom(-1/2, n) s^{5+2n} / (5+2n)
    double s2 = s * s, term = s2 * s2 * s, coef = 1.0, sum = 0.0;
    for (int n = 0; n < 14; ++n) {
        sum += coef * term / (5.0 + 2.0 * n);
        coef *= (-0.5 - n) / (n + 1.0);
        term *= s2;
    }
    return sum;
}

} // namespace

double theta_shell(double a, double b)
{
    if (b <= a) return 0.0;
    if (a > 0.0 && b - a <= a)
        return gl20([](double s) { return 4.0 * kPi * s * s * std::sqrt(1.0 + s * s); }, a, b);
    return theta(b) - theta(a);
}

double pressure_shell(double a, double b)
{
    if (b <= a) return 0.0;
    if (a > 0.0 && b - a <= a)
        return gl20([](double s) { double s2 = s * s; return s2 * s2 / std::sqrt(1.0 + s2); }, a, b);
    return pressure_moment(b) - pressure_moment(a);
}

double theta(double b)
{
    if (b <= 0.0) return 0.0;
    if (b < 0.1) return theta_series(b);
    double s = std::sqrt(1.0 + b * b);
    return 0.5 * kPi * (b * s * (1.0 + 2.0 * b * b) - std::asinh(b));
}

double pressure_moment(double s)
{
    if (s <= 0.0) return 0.0;
    if (s < 0.1) return pm_series(s);
    return (s * (2.0 * s * s - 3.0) * std::sqrt(1.0 + s * s) + 3.0 * std::asinh(s)) / 8.0;
}

double shell_volume(double a, double b)
{
    return 4.0 * kPi / 3.0 * (b - a) * (b * b + a * b + a * a);
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t n)
{
    std::vector<double> e(n + 1);
    for (std::size_t i = 0; i <= n; ++i) e[i] = lo + (hi - lo) * double(i) / double(n);
    e[n] = hi;
    return e;
}

std::vector<double> insert_nodes(std::vector<double> edges, const std::vector<double>& nodes,
                                 double tol)
{
    for (double x : nodes) {
        if (x <= edges.front() || x >= edges.back()) continue;
        auto it = std::lower_bound(edges.begin(), edges.end(), x);
        double scale = std::max(1.0, std::fabs(x));
        if (std::fabs(*it - x) <= tol * scale) continue;
        if (std::fabs(*(it - 1) - x) <= tol * scale) continue;
        edges.insert(it, x);
    }
    return edges;
}

PhaseGrid::PhaseGrid(std::vector<double> r_edges, std::vector<double> v_edges,
                     std::vector<double> c_edges)
    : r(std::move(r_edges)), v(std::move(v_edges)), c(std::move(c_edges))
{
    auto increasing = [](const std::vector<double>& e) {
        if (e.size() < 2) return false;
        for (std::size_t i = 1; i < e.size(); ++i)
            if (!(e[i] > e[i - 1])) return false;
        return true;
    };
    if (!increasing(r) || r.front() != 0.0)
        throw DomainError("r edges must be strictly increasing and start at 0");
    if (!increasing(v) || v.front() != 0.0)
        throw DomainError("v edges must be strictly increasing and start at 0");
    if (!increasing(c) || c.front() != -1.0 || c.back() != 1.0)
        throw DomainError("c edges must be strictly increasing from -1 to 1");

    vol_x.resize(nr());
    for (std::size_t i = 0; i < nr(); ++i) vol_x[i] = shell_volume(r[i], r[i + 1]);

    vol_v.resize(ncell_v());
    e_w.resize(ncell_v());
    pw_w.resize(ncell_v());
    for (std::size_t j = 0; j < nv(); ++j) {
        double sv = shell_volume(v[j], v[j + 1]);
        double th = theta_shell(v[j], v[j + 1]);
        double pm = pressure_shell(v[j], v[j + 1]);
        for (std::size_t l = 0; l < nc(); ++l) {
            double dc = c[l + 1] - c[l];
            double c3 = (c[l + 1] * c[l + 1] * c[l + 1] - c[l] * c[l] * c[l]) / 3.0;
            vol_v[j * nc() + l] = 0.5 * dc * sv;
            e_w[j * nc() + l] = 0.5 * dc * th;
            pw_w[j * nc() + l] = 2.0 * kPi * c3 * pm;
        }
    }
}

double PhaseGrid::e_mean(std::size_t j) const
{
    return e_w[j * nc()] / vol_v[j * nc()];
}

double PhaseGrid::box_volume(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1,
                             std::size_t l0, std::size_t l1) const
{
    double x = shell_volume(r[i0], r[i1]);
    double vv = shell_volume(v[j0], v[j1]);
    return x * vv * 0.5 * (c[l1] - c[l0]);
}

bool PhaseGrid::same_as(const PhaseGrid& o) const
{
    return r == o.r && v == o.v && c == o.c;
}

PhaseGrid make_grid(double r_max, std::size_t nr, double v_max, std::size_t nv, std::size_t nc,
                    const std::vector<double>& r_nodes, const std::vector<double>& v_nodes)
{
    if (nr == 0 || nv == 0 || nc == 0) throw DomainError("grid counts must be positive");
    auto r = insert_nodes(uniform_edges(0.0, r_max, nr), r_nodes);
    auto v = insert_nodes(uniform_edges(0.0, v_max, nv), v_nodes);
    return PhaseGrid(std::move(r), std::move(v), uniform_edges(-1.0, 1.0, nc));
}

DistributionFunction::DistributionFunction(PhaseGrid g, std::vector<double> vals)
    : grid(std::move(g)), f(std::move(vals))
{
    if (f.size() != grid.size()) throw GridMismatchError("value count does not match grid");
}

double DistributionFunction::max_value() const
{
    return f.empty() ? 0.0 : *std::max_element(f.begin(), f.end());
}

double DistributionFunction::min_value() const
{
    return f.empty() ? 0.0 : *std::min_element(f.begin(), f.end());
}

namespace {

// For each refined cell, the index of the coarse cell containing it.
std::vector<std::size_t> parent_cells(const std::vector<double>& coarse,
                                      const std::vector<double>& fine)
{
    std::vector<std::size_t> par(fine.size() - 1);
    std::size_t j = 0;
    for (std::size_t q = 0; q + 1 < fine.size(); ++q) {
        double mid = 0.5 * (fine[q] + fine[q + 1]);
        while (j + 1 < coarse.size() - 1 && coarse[j + 1] <= mid) ++j;
        par[q] = mid < coarse.back() ? j : coarse.size() - 1;
    }
    return par;
}

} // namespace

DistributionFunction refine_r(const DistributionFunction& f, const std::vector<double>& nodes)
{
    auto r = insert_nodes(f.grid.r, nodes);
    if (r.size() == f.grid.r.size()) return f;
    auto par = parent_cells(f.grid.r, r);
    PhaseGrid g(r, f.grid.v, f.grid.c);
    DistributionFunction out(g);
    std::size_t nvc = g.ncell_v();
    for (std::size_t i = 0; i < g.nr(); ++i)
        std::copy_n(&f.f[par[i] * nvc], nvc, &out.f[i * nvc]);
    return out;
}

DistributionFunction refine_v(const DistributionFunction& f, const std::vector<double>& nodes)
{
    std::vector<double> v = f.grid.v;
    std::vector<double> beyond;
    for (double x : nodes)
        if (x > v.back()) beyond.push_back(x);
    std::sort(beyond.begin(), beyond.end());
    for (double x : beyond)
        if (x > v.back() * (1.0 + 1e-14)) v.push_back(x);
    v = insert_nodes(v, nodes);
    if (v.size() == f.grid.v.size()) return f;
    auto par = parent_cells(f.grid.v, v);
    PhaseGrid g(f.grid.r, v, f.grid.c);
    DistributionFunction out(g);
    std::size_t onv = f.grid.nv();
    for (std::size_t i = 0; i < g.nr(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j) {
            if (par[j] >= onv) continue;
            for (std::size_t l = 0; l < g.nc(); ++l) out.at(i, j, l) = f.at(i, par[j], l);
        }
    return out;
}

MassModel::MassModel(std::vector<double> r_edges, std::vector<double> rho_cells)
    : r(std::move(r_edges)), rho(std::move(rho_cells))
{
    if (r.size() != rho.size() + 1) throw GridMismatchError("rho/edge size mismatch");
    m = mass_function(r, rho);
}

double MassModel::m_at(std::size_t i, double x) const
{
    return m[i] + 4.0 * kPi / 3.0 * rho[i] * (x - r[i]) * (x * x + x * r[i] + r[i] * r[i]);
}

double MassModel::two_m_over_r(std::size_t i, double x) const
{
    if (x <= 0.0) return 0.0;
    if (i == 0) return 8.0 * kPi / 3.0 * rho[0] * x * x;
    return 2.0 * m_at(i, x) / x;
}

double MassModel::elam(std::size_t i, double x) const
{
    double q = two_m_over_r(i, x);
    if (!(q < 1.0)) throw HorizonError("2m/r >= 1 at r = " + std::to_string(x));
    return 1.0 / std::sqrt(1.0 - q);
}

double MassModel::lambda(std::size_t i, double x) const
{
    double q = two_m_over_r(i, x);
    if (!(q < 1.0)) throw HorizonError("2m/r >= 1 at r = " + std::to_string(x));
    return -0.5 * std::log1p(-q);
}

double MassModel::max_two_m_over_r(double* where) const
{
    double best = 0.0, at = 0.0;
    auto probe = [&](std::size_t i, double x) {
        double q = two_m_over_r(i, x);
        if (q > best) { best = q; at = x; }
    };
    for (std::size_t i = 0; i < n(); ++i) {
        probe(i, r[i + 1]);
        // interior critical point of (A + B r³)/r
        double B = 4.0 * kPi / 3.0 * rho[i];
        double A = m[i] - B * r[i] * r[i] * r[i];
        if (B > 0.0 && A > 0.0) {
            double xc = std::cbrt(A / (2.0 * B));
            if (xc > r[i] && xc < r[i + 1]) probe(i, xc);
        }
    }
    if (where) *where = at;
    return best;
}

std::vector<double> MassModel::elam_weights() const
{
    std::vector<double> w(n());
    for (std::size_t i = 0; i < n(); ++i)
        w[i] = gl20([&](double x) { return 4.0 * kPi * x * x * elam(i, x); }, r[i], r[i + 1]);
    return w;
}

std::vector<double> density(const DistributionFunction& f)
{
    const auto& g = f.grid;
    std::vector<double> rho(g.nr(), 0.0);
    std::size_t nvc = g.ncell_v();
    parallel_for(g.nr(), [&](std::size_t i) {
        const double* fi = &f.f[i * nvc];
        double s = 0.0;
        for (std::size_t q = 0; q < nvc; ++q) s += g.e_w[q] * fi[q];
        rho[i] = s;
    });
    return rho;
}

std::vector<double> radial_pressure(const DistributionFunction& f)
{
    const auto& g = f.grid;
    std::vector<double> p(g.nr(), 0.0);
    std::size_t nvc = g.ncell_v();
    for (std::size_t i = 0; i < g.nr(); ++i) {
        const double* fi = &f.f[i * nvc];
        double s = 0.0;
        for (std::size_t q = 0; q < nvc; ++q) s += g.pw_w[q] * fi[q];
        p[i] = s;
    }
    return p;
}

std::vector<double> mass_function(const std::vector<double>& r_edges, const std::vector<double>& rho)
{
    std::vector<double> m(r_edges.size(), 0.0);
    for (std::size_t i = 0; i + 1 < r_edges.size(); ++i)
        m[i + 1] = m[i] + rho[i] * shell_volume(r_edges[i], r_edges[i + 1]);
    return m;
}

std::vector<double> lambda_of_m(const std::vector<double>& r, const std::vector<double>& m)
{
    if (r.size() != m.size()) throw GridMismatchError("r/m size mismatch");
    std::vector<double> lam(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i] <= 0.0) continue;
        double q = 2.0 * m[i] / r[i];
        if (!(q < 1.0)) throw HorizonError("2m/r >= 1 at r = " + std::to_string(r[i]));
        lam[i] = -0.5 * std::log1p(-q);
    }
    return lam;
}

MassModel mass_model(const DistributionFunction& f)
{
    return MassModel(f.grid.r, density(f));
}

RadialProfile radial_profile(const DistributionFunction& f)
{
    MassModel mm = mass_model(f);
    RadialProfile out;
    std::size_t n = mm.n();
    out.r.resize(n);
    out.rho = mm.rho;
    out.m.resize(n);
    out.lam.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = f.grid.r_mid(i);
        out.r[i] = x;
        out.m[i] = mm.m_at(i, x);
        out.lam[i] = mm.lambda(i, x);
    }
    out.p = radial_pressure(f);
    return out;
}

double AdmissibleParams::default_sigma0(double M, double beta)
{
    return std::min(1.0, 3.0 * beta * beta * beta / (4.0 * kPi * M * M));
}

double AdmissibleParams::c_beta() const { return 1.0 / std::sqrt(1.0 - 2.0 * beta); }

double AdmissibleParams::sigma_M() const { return 3.0 / (32.0 * kPi * M * M); }

double AdmissibleParams::P0() const
{
    double k1 = (k + 1.0) * (k + 1.0);
    double t2 = std::pow((1.0 + M) / (4.0 * kPi), 4.0 / 3.0);
    double t3 = 64.0 * k1 / (1.0 - 2.0 * beta);
    double t4 = 256.0 * k1 * M * M * M * M / ((1.0 - 2.0 * beta) * (1.0 - 2.0 * beta));
    return std::max({10.0, t2, t3, t4});
}

AdmissibleParams AdmissibleParams::validated() const
{
    AdmissibleParams p = *this;
    if (!(p.M > 0.0)) throw ParameterError("M must be positive");
    if (!(p.beta > 0.0 && p.beta < 0.5)) throw ParameterError("beta must lie in (0, 1/2)");
    if (!(p.k > 0.0 && p.k <= 2.0)) throw ParameterError("k must lie in (0, 2]");
    double cap = default_sigma0(p.M, p.beta);
    if (p.sigma0 == 0.0) p.sigma0 = cap;
    if (!(p.sigma0 > 0.0)) throw ParameterError("sigma0 must be positive");
    if (p.sigma0 > cap * (1.0 + 1e-12))
        throw ParameterError("sigma0 exceeds min{1, 3 beta^3 / (4 pi M^2)}");
    return p;
}

AdmissibilityReport check_admissible(const DistributionFunction& f, const AdmissibleParams& p)
{
    AdmissibilityReport rep;
    MassModel mm = mass_model(f);
    rep.mass = mm.total();
    rep.max_rho = mm.rho.empty() ? 0.0 : *std::max_element(mm.rho.begin(), mm.rho.end());
    rep.max_two_m_over_r = mm.max_two_m_over_r();
    rep.nonneg_ok = f.min_value() >= 0.0;
    rep.mass_ok = std::fabs(rep.mass - p.M) <= kMassRelTol * p.M;
    rep.cap_ok = rep.max_rho <= p.sigma0 + kCapAbsTol;
    rep.horizon_ok = rep.max_two_m_over_r < 1.0;
    rep.admissible = rep.nonneg_ok && rep.mass_ok && rep.cap_ok && rep.horizon_ok;
    // m/r <= β is tested with the same relative slack as the mass.
    bool mr_ok = 0.5 * rep.max_two_m_over_r <= p.beta * (1.0 + kMassRelTol);
    rep.in_tilde_A = rep.nonneg_ok && rep.mass_ok && mr_ok && rep.max_rho <= 1.0 + kCapAbsTol;
    return rep;
}

double two_m_over_r_bound(double sigma, double M)
{
    double sM = 3.0 / (32.0 * kPi * M * M);
    if (!(sigma > 0.0) || sigma > sM) throw DomainError("sigma must lie in (0, sigma_M]");
    return std::cbrt(sigma / sM);
}

} // namespace evc
