#include "evcasimir/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include "evcasimir/errors.hpp"
#include "evcasimir/functional.hpp"
#include "evcasimir/parallel.hpp"

namespace evc {

namespace {

constexpr double kPi = 3.14159265358979323846;
using GL = boost::math::quadrature::gauss<double, 20>;

struct VelocityCells {
    std::vector<double> ebar, e_w, vol;
    double ebar_min = 0, total = 0;

    explicit VelocityCells(const PhaseGrid& g)
    {
        std::size_t n = g.ncell_v();
        ebar.resize(n);
        e_w = g.e_w;
        vol = g.vol_v;
        ebar_min = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < n; ++q) {
            ebar[q] = e_w[q] / vol[q];
            ebar_min = std::min(ebar_min, ebar[q]);
            total += e_w[q];
        }
    }

    double psi(double eps, double k, std::size_t q) const
    {
        double b = 1.0 - eps * ebar[q];
        if (b <= 0.0) return 0.0;
        return k == 1.0 ? b : std::pow(b, k);
    }

    double constraint(double eps, double k) const
    {
        double s = 0.0;
        for (std::size_t q = 0; q < ebar.size(); ++q) s += e_w[q] * psi(eps, k, q);
        return s;
    }

    double cutoff(double a, double k) const
    {
        double top = 1.0 / ebar_min;
        if (a <= 0.0) return top;
        if (a > total * (1.0 + 1e-14))
            throw RangeError("shell density exceeds the velocity grid's representable maximum");
        double lo = 0.0, hi = top;
        for (;;) {
            double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (constraint(mid, k) > a) lo = mid; else hi = mid;
        }
        return std::abs(constraint(lo, k) - a) <= std::abs(constraint(hi, k) - a) ? lo : hi;
    }

    double H(double eps, double k) const
    {
        double s = 0.0;
        for (std::size_t q = 0; q < ebar.size(); ++q) {
            double p = psi(eps, k, q);
            if (p > 0.0) s += vol[q] * phi(p, k);
        }
        return s;
    }
};

// Reduced problem state for one density profile.
struct Eval {
    std::vector<double> rho, eps, h, W, Q, Qs, grad;
    double D = 0;
};

class Reduced {
public:
    Reduced(const PhaseGrid& g, double k) : g_(g), vc_(g), k_(k) {}

    Eval full(const std::vector<double>& rho) const
    {
        Eval e;
        e.rho = rho;
        std::size_t n = g_.nr();
        e.eps.resize(n);
        e.h.resize(n);
        parallel_for(n, [&](std::size_t i) { shell(e, i); });
        geometry(e);
        return e;
    }

    // base with mass t moved from shell d to shell r.
    Eval moved(const Eval& base, std::size_t r, std::size_t d, double t) const
    {
        Eval e;
        e.rho = base.rho;
        e.eps = base.eps;
        e.h = base.h;
        double xd = base.rho[d] * g_.vol_x[d];
        if (t >= xd) {
            // empty the donor exactly
            e.rho[r] += xd / g_.vol_x[r];
            e.rho[d] = 0.0;
        } else {
            e.rho[r] += t / g_.vol_x[r];
            e.rho[d] = base.rho[d] - t / g_.vol_x[d];
        }
        shell(e, r);
        shell(e, d);
        geometry(e);
        return e;
    }

    const VelocityCells& cells() const { return vc_; }
    double k() const { return k_; }

private:
    void shell(Eval& e, std::size_t i) const
    {
        e.eps[i] = vc_.cutoff(e.rho[i], k_);
        e.h[i] = e.rho[i] > 0.0 ? vc_.H(e.eps[i], k_) : 0.0;
    }

    void geometry(Eval& e) const
    {
        std::size_t n = g_.nr();
        MassModel mm(g_.r, e.rho);
        if (mm.max_two_m_over_r() >= 1.0) throw HorizonError("2m/r >= 1");
        e.W.resize(n);
        e.Q.resize(n);
        e.Qs.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double a = g_.r[i], b = g_.r[i + 1];
            double a3 = a * a * a;
            e.W[i] = GL::integrate([&](double x) { return 4 * kPi * x * x * mm.elam(i, x); }, a, b);
            e.Q[i] = GL::integrate([&](double x) {
                double el = mm.elam(i, x);
                return 4 * kPi * x * el * el * el;
            }, a, b);
            e.Qs[i] = GL::integrate([&](double x) {
                double el = mm.elam(i, x);
                return 4 * kPi * x * el * el * el * (4 * kPi / 3) * (x * x * x - a3);
            }, a, b);
        }
        e.D = 0.0;
        for (std::size_t i = 0; i < n; ++i) e.D += e.W[i] * e.h[i];
        e.grad.assign(n, 0.0);
        double S = 0.0;
        for (std::size_t j = n; j-- > 0;) {
            e.grad[j] = -e.eps[j] * e.W[j] + e.h[j] * e.Qs[j] + g_.vol_x[j] * S;
            S += e.h[j] * e.Q[j];
        }
    }

    const PhaseGrid& g_;
    VelocityCells vc_;
    double k_;
};

double total_mass(const PhaseGrid& g, const std::vector<double>& rho)
{
    double s = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) s += g.vol_x[i] * rho[i];
    return s;
}

DistributionFunction build_f(const PhaseGrid& g, const VelocityCells& vc, const Eval& e, double k)
{
    DistributionFunction f(g);
    std::size_t nq = g.ncell_v();
    for (std::size_t i = 0; i < g.nr(); ++i) {
        if (e.rho[i] <= 0.0) continue;
        for (std::size_t q = 0; q < nq; ++q) f.f[i * nq + q] = vc.psi(e.eps[i], k, q);
    }
    return f;
}

void store(MinimizerState& s, const Reduced& red, const Eval& e)
{
    s.rho = e.rho;
    s.eps = e.eps;
    s.h = e.h;
    s.D = e.D;
    s.f = build_f(s.grid, red.cells(), e, red.k());
}

double support_radius(const MinimizerState& s)
{
    for (std::size_t i = s.rho.size(); i-- > 0;)
        if (s.rho[i] > 0.0) return s.grid.r[i + 1];
    return 0.0;
}

} // namespace

double shell_cutoff(double a, double k, const PhaseGrid& grid)
{
    return VelocityCells(grid).cutoff(a, k);
}

double shell_casimir(const std::vector<double>& psi, double k, const PhaseGrid& grid)
{
    if (psi.size() != grid.ncell_v()) throw GridMismatchError("shell size does not match grid");
    double s = 0.0;
    for (std::size_t q = 0; q < psi.size(); ++q)
        if (psi[q] != 0.0) s += grid.vol_v[q] * phi(psi[q], k);
    return s;
}

ShellSolution project_shell(const ShellProblem& p, const AnsatzTables& tables, const PhaseGrid& grid)
{
    if (p.a < 0.0) throw DomainError("shell density must be non-negative");
    VelocityCells vc(grid);
    ShellSolution s;
    s.eps = vc.cutoff(p.a, p.k);
    s.eps_continuum = invert_Gprime(-(p.k + 1.0) * p.a / (4.0 * kPi), tables);
    s.psi.assign(grid.ncell_v(), 0.0);
    if (p.a > 0.0)
        for (std::size_t q = 0; q < s.psi.size(); ++q) s.psi[q] = vc.psi(s.eps, p.k, q);
    s.H = shell_casimir(s.psi, p.k, grid);
    double c = 0.0;
    for (std::size_t q = 0; q < s.psi.size(); ++q) c += grid.e_w[q] * s.psi[q];
    s.constraint_residual = p.a > 0.0 ? (c - p.a) / p.a : c;
    return s;
}

ReducedValue reduced_functional(const std::vector<double>& rho, const PhaseGrid& grid, double k)
{
    if (rho.size() != grid.nr()) throw GridMismatchError("profile size does not match r cells");
    for (double x : rho)
        if (!(x >= 0.0)) throw DomainError("density profile must be non-negative");
    Reduced red(grid, k);
    Eval e = red.full(rho);
    ReducedValue v;
    v.D = e.D;
    v.eps = e.eps;
    v.h = e.h;
    v.grad = e.grad;
    v.f = build_f(grid, red.cells(), e, k);
    return v;
}

std::vector<double> flat_profile(const PhaseGrid& grid, double M, double R)
{
    std::size_t cut = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < grid.r.size(); ++i) {
        double d = std::abs(grid.r[i] - R);
        if (d < best) { best = d; cut = i; }
    }
    double vol = 0.0;
    for (std::size_t i = 0; i < cut; ++i) vol += grid.vol_x[i];
    std::vector<double> rho(grid.nr(), 0.0);
    for (std::size_t i = 0; i < cut; ++i) rho[i] = M / vol;
    return rho;
}

std::vector<double> profile_from_static(const StaticSolution& sol, const PhaseGrid& grid)
{
    std::vector<double> rho(grid.nr(), 0.0);
    for (std::size_t i = 0; i < grid.nr(); ++i) {
        if (grid.r[i] >= sol.R0) break;
        rho[i] = (sol.m_of(grid.r[i + 1]) - sol.m_of(grid.r[i])) / grid.vol_x[i];
        if (rho[i] < 0.0) rho[i] = 0.0;
    }
    return rho;
}

MinimizerState minimize(const AdmissibleParams& params, const PhaseGrid& grid,
                        const std::vector<double>& init_rho, const MinimizeOptions& opt)
{
    AdmissibleParams p = params.validated();
    const double cap = p.sigma0;
    const std::size_t n = grid.nr();
    if (init_rho.size() != n) throw InitError("initial profile size does not match r cells");
    for (double x : init_rho) {
        if (!(x >= 0.0)) throw InitError("initial profile has negative or NaN entries");
        if (x > cap + kCapAbsTol) throw InitError("initial profile exceeds the density cap");
    }
    double m0 = total_mass(grid, init_rho);
    if (std::abs(m0 - p.M) > kMassRelTol * p.M) throw InitError("initial profile has the wrong mass");

    // Exact mass and cap before the first iteration.
    std::vector<double> rho = init_rho;
    for (double& x : rho) x = std::min(x * p.M / m0, cap);
    double free_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (rho[i] < cap) free_mass += grid.vol_x[i] * rho[i];
    double deficit = p.M - total_mass(grid, rho);
    if (free_mass > 0.0)
        for (std::size_t i = 0; i < n; ++i)
            if (rho[i] < cap) rho[i] *= 1.0 + deficit / free_mass;

    Reduced red(grid, p.k);
    Eval cur;
    try {
        cur = red.full(rho);
    } catch (const Error& e) {
        throw InitError(std::string("initial profile is not admissible: ") + e.what());
    }

    MinimizerState s;
    s.grid = grid;
    s.params = p;
    s.D_history.push_back(cur.D);
    const std::size_t per_iter = opt.moves_per_iter ? opt.moves_per_iter : 64 * n;

    const double dust = 1e-14 * p.M;
    auto per_mass = [&](const Eval& e, std::size_t j) { return e.grad[j] / grid.vol_x[j]; };
    auto pick = [&](const Eval& e, std::size_t& r, std::size_t& d) {
        double gr = std::numeric_limits<double>::infinity();
        double gd = -std::numeric_limits<double>::infinity();
        r = d = n;
        for (std::size_t j = 0; j < n; ++j) {
            double G = per_mass(e, j);
            if (e.rho[j] < cap && G < gr) { gr = G; r = j; }
            if (e.rho[j] * grid.vol_x[j] > dust && G > gd) { gd = G; d = j; }
        }
        return (r < n && d < n) ? gd - gr : 0.0;
    };

    bool stuck = false;
    for (std::size_t it = 0; it < opt.max_iter && !stuck; ++it) {
        double D_start = cur.D;
        for (std::size_t mv = 0; mv < per_iter; ++mv) {
            std::size_t r, d;
            double gap = pick(cur, r, d);
            s.kkt_gap = gap;
            if (gap <= opt.kkt_tol) break;
            double tmax = std::min(cur.rho[d] * grid.vol_x[d], (cap - cur.rho[r]) * grid.vol_x[r]);
            if (!(tmax > 0.0)) { stuck = true; break; }

            auto slope = [&](double t, Eval* out) {
                try {
                    Eval e = red.moved(cur, r, d, t);
                    double v = per_mass(e, r) - per_mass(e, d);
                    if (out) *out = std::move(e);
                    return v;
                } catch (const Error&) {
                    return std::numeric_limits<double>::infinity();
                }
            };
            Eval trial;
            double t = tmax;
            double s_end = slope(tmax, &trial);
            if (s_end > 0.0) {
                boost::uintmax_t iters = 100;
                auto root = boost::math::tools::toms748_solve(
                    [&](double x) {
                        double v = slope(x, nullptr);
                        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
                    },
                    0.0, tmax, -gap, s_end, boost::math::tools::eps_tolerance<double>(50), iters);
                t = 0.5 * (root.first + root.second);
                slope(t, &trial);
            }
            int halvings = 0;
            while (!(trial.D < cur.D) && halvings < 60) {
                t *= 0.5;
                ++halvings;
                if (!std::isfinite(slope(t, &trial))) continue;
            }
            if (!(trial.D < cur.D)) {
                stuck = true;
                break;
            }
            cur = std::move(trial);
            ++s.moves;
        }
        ++s.iter;
        s.last_dD = D_start - cur.D;
        s.D_history.push_back(cur.D);
        std::size_t r, d;
        s.kkt_gap = pick(cur, r, d);
        if (s.last_dD <= opt.dD_tol * (1.0 + std::abs(cur.D)) && s.kkt_gap <= opt.kkt_tol) {
            s.converged = true;
            break;
        }
    }
    // No representable decrease along the most violating pair.
    if (stuck) s.converged = true;
    store(s, red, cur);
    DiagnosticsReport dr = convergence_diagnostics(s);
    s.residuals.U_cv = dr.u_cv;
    // Directional derivative toward the worst single-pair move, normalised per unit mass.
    s.residuals.vi_residual = -s.kkt_gap;
    return s;
}

std::vector<double> mu_at_edges(const MinimizerState& s)
{
    const PhaseGrid& g = s.grid;
    std::size_t n = g.nr();
    MassModel mm(g.r, s.rho);
    double M = mm.total();
    std::vector<double> mu(n + 1, 0.0);
    double R0 = support_radius(s);
    std::size_t i0 = n;
    for (std::size_t i = 0; i <= n; ++i)
        if (g.r[i] >= R0) { i0 = i; break; }
    for (std::size_t i = i0; i <= n; ++i) mu[i] = 0.5 * std::log(1.0 - 2.0 * M / g.r[i]);
    for (std::size_t i = i0; i-- > 0;) {
        double pt = s.rho[i] > 0.0 ? -s.h[i] / s.eps[i] - s.rho[i] : 0.0;
        double dm = GL::integrate([&](double x) {
            double el = mm.elam(i, x);
            return el * el * (mm.m_at(i, x) / (x * x) + 4 * kPi * x * pt);
        }, g.r[i], g.r[i + 1]);
        mu[i] = mu[i + 1] - dm;
    }
    return mu;
}

namespace {

double mu_inside(const MinimizerState& s, const MassModel& mm, const std::vector<double>& mu_e,
                 std::size_t i, double x)
{
    double pt = s.rho[i] > 0.0 ? -s.h[i] / s.eps[i] - s.rho[i] : 0.0;
    double b = s.grid.r[i + 1];
    if (x >= b) return mu_e[i + 1];
    double dm = GL::integrate([&](double y) {
        double el = mm.elam(i, y);
        return el * el * (mm.m_at(i, y) / (y * y) + 4 * kPi * y * pt);
    }, x, b);
    return mu_e[i + 1] - dm;
}

} // namespace

std::vector<double> U_profile(const MinimizerState& s)
{
    const PhaseGrid& g = s.grid;
    MassModel mm(g.r, s.rho);
    std::vector<double> mu_e = mu_at_edges(s);
    std::vector<double> U(g.nr(), 0.0);
    for (std::size_t i = 0; i < g.nr(); ++i) {
        if (s.rho[i] <= 0.0) continue;
        U[i] = -std::exp(-mu_inside(s, mm, mu_e, i, g.r_mid(i))) * s.eps[i];
    }
    return U;
}

VariationalResidual variational_residual(const MinimizerState& s, const DistributionFunction& g)
{
    const PhaseGrid& G = s.grid;
    if (!G.same_as(g.grid)) throw GridMismatchError("variational residual: grids differ");
    for (std::size_t q = 0; q < g.f.size(); ++q) {
        if (g.f[q] < 0.0) throw DomainError("competitor has negative values");
        if (g.f[q] > 0.0 && s.f.f[q] <= 0.0)
            throw SupportError("competitor support is not inside the minimizer's support");
    }
    const double k = s.params.k;
    std::size_t n = G.nr(), nq = G.ncell_v();
    MassModel m0(G.r, s.rho);
    std::vector<double> rho_g = density(g);
    MassModel mg(G.r, rho_g);
    std::vector<double> mu_e = mu_at_edges(s);
    double R0 = support_radius(s);

    VariationalResidual out;
    for (std::size_t i = 0; i < n; ++i) {
        double a = G.r[i], b = G.r[i + 1];
        double drho = rho_g[i] - s.rho[i];
        auto dm = [&](double x) { return mg.m_at(i, x) - m0.m_at(i, x); };

        // unslimmed: velocity part and mass-coupling part
        double vel = 0.0, hf = 0.0;
        for (std::size_t q = 0; q < nq; ++q) {
            double f0 = s.f.f[i * nq + q], gv = g.f[i * nq + q];
            if (f0 == 0.0 && gv == 0.0) continue;
            vel += G.vol_v[q] * (casimir_d1(f0, k) - 1.0) * (gv - f0);
            if (f0 > 0.0) hf += G.vol_v[q] * phi(f0, k);
        }
        double W = GL::integrate([&](double x) { return 4 * kPi * x * x * m0.elam(i, x); }, a, b);
        double Qm = GL::integrate([&](double x) {
            double el = m0.elam(i, x);
            return 4 * kPi * x * el * el * el * dm(x);
        }, a, b);
        out.unslimmed += W * vel + hf * Qm;

        // slim: ∫ d/dr(e^{λ+μ} Δm) U dr over the support
        if (b > R0 || s.rho[i] <= 0.0) continue;
        double pt = -s.h[i] / s.eps[i] - s.rho[i];
        out.slim += GL::integrate([&](double x) {
            double el = m0.elam(i, x);
            double mu = mu_inside(s, m0, mu_e, i, x);
            double U = -std::exp(-mu) * s.eps[i];
            double lm = 4 * kPi * x * el * el * (s.rho[i] + pt);
            return el * std::exp(mu) * (lm * dm(x) + 4 * kPi * x * x * drho) * U;
        }, a, b);
    }
    return out;
}

double small_mass_saturation_bound()
{
    double K = 12.0 / 25.0;
    double s = 1.0 / std::sqrt(1.0 + K * K);
    return 21.0 / 20.0 * s + 21.0 / 40.0 * (1.0 - s);
}

DiagnosticsReport convergence_diagnostics(const MinimizerState& s)
{
    DiagnosticsReport d;
    const PhaseGrid& g = s.grid;
    const double cap = s.params.sigma0;
    d.kkt_gap = s.kkt_gap;
    d.R0 = support_radius(s);

    std::vector<double> U = U_profile(s);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < g.nr(); ++i) {
        if (!(s.rho[i] > 0.0 && s.rho[i] < cap - 1e-8)) continue;
        sum += U[i];
        sum2 += U[i] * U[i];
        ++d.u_cells;
    }
    if (d.u_cells > 0) {
        double m = sum / static_cast<double>(d.u_cells);
        double var = std::max(0.0, sum2 / static_cast<double>(d.u_cells) - m * m);
        d.u_mean = m;
        d.u_cv = m != 0.0 ? std::sqrt(var) / std::abs(m) : 0.0;
    }

    double k = s.params.k;
    d.N = std::max(std::cbrt(3.0 * cap / (2.0 * kPi)), std::cbrt(3.0 * cap * std::pow(2.0, k) / (2.0 * kPi)));
    d.S0 = 12.0 * std::sqrt(1.0 + d.N * d.N);
    d.v_support_ok = true;
    for (std::size_t i = 0; i < g.nr(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j)
            for (std::size_t l = 0; l < g.nc(); ++l)
                if (s.f.at(i, j, l) > 1e-12 && g.v[j + 1] > d.S0) d.v_support_ok = false;

    d.saturation_bound = small_mass_saturation_bound();
    for (std::size_t i = 0; i < g.nr() && s.rho[i] >= cap - 1e-8; ++i) d.saturated_radius = g.r[i + 1];
    double M = s.params.M, beta = s.params.beta;
    double Msat = std::sqrt(3.0 * beta * beta * beta / (4.0 * kPi));
    MassModel mm(g.r, s.rho);
    double emax = 1.0 / std::sqrt(1.0 - mm.max_two_m_over_r());
    d.saturation_applicable = std::abs(cap - 1.0) <= 1e-12 && std::abs(M - Msat) <= 1e-9 * M
                              && emax < 21.0 / 20.0;
    d.saturation_violated = d.saturation_applicable && d.saturated_radius >= M / beta;
    return d;
}

} // namespace evc
