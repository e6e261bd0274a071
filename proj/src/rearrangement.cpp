#include "evcasimir/rearrangement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evcasimir/errors.hpp"

namespace evc {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Σ_i vol_x[i] Σ_l f (Δc_l / 2) per velocity column.
std::vector<double> column_mass(const DistributionFunction& f)
{
    const auto& g = f.grid;
    std::vector<double> A(g.nv(), 0.0);
    for (std::size_t i = 0; i < g.nr(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j)
            for (std::size_t l = 0; l < g.nc(); ++l)
                A[j] += g.vol_x[i] * f.at(i, j, l) * 0.5 * (g.c[l + 1] - g.c[l]);
    return A;
}

// Σ_i W[i] Σ_l φ(f) (Δc_l / 2) per velocity column.
std::vector<double> column_phi(const DistributionFunction& f, const std::vector<double>& W,
                               double k)
{
    const auto& g = f.grid;
    std::vector<double> B(g.nv(), 0.0);
    for (std::size_t i = 0; i < g.nr(); ++i)
        for (std::size_t j = 0; j < g.nv(); ++j)
            for (std::size_t l = 0; l < g.nc(); ++l)
                B[j] += W[i] * phi(f.at(i, j, l), k) * 0.5 * (g.c[l + 1] - g.c[l]);
    return B;
}

// ∫_{s1 <= |v| <= s2} √(1+|v|²) f(r_i, v) dv for every r cell.
std::vector<double> band_density(const DistributionFunction& f, double s1, double s2)
{
    const auto& g = f.grid;
    std::vector<double> out(g.nr(), 0.0);
    for (std::size_t j = 0; j < g.nv(); ++j) {
        double lo = std::max(s1, g.v[j]), hi = std::min(s2, g.v[j + 1]);
        if (!(hi > lo)) continue;
        double th = theta_shell(lo, hi);
        for (std::size_t i = 0; i < g.nr(); ++i)
            for (std::size_t l = 0; l < g.nc(); ++l)
                out[i] += f.at(i, j, l) * 0.5 * (g.c[l + 1] - g.c[l]) * th;
    }
    return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

double max_of(const std::vector<double>& a)
{
    return a.empty() ? 0.0 : *std::max_element(a.begin(), a.end());
}

} // namespace

// ξ in [lo, hi] with theta_shell(lo, ξ) = 1.
double solve_unit_theta(double lo, double hi)
{
    if (theta_shell(lo, hi) < 1.0) throw RangeError("unit shell does not fit the interval");
    double a = lo, b = hi;
    for (int it = 0; it < 400; ++it) {
        double m = 0.5 * (a + b);
        if (m <= a || m >= b) break;
        if (theta_shell(lo, m) < 1.0) a = m; else b = m;
    }
    return 0.5 * (a + b);
}

double annulus_inner() { return std::cbrt(1.0 / (4.0 * kPi)); }
double annulus_outer() { return std::cbrt(25.0 / (4.0 * kPi)); }

double velocity_band_mass(const DistributionFunction& f, double s1, double s2)
{
    const auto& g = f.grid;
    auto A = column_mass(f);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.nv(); ++j) {
        double lo = std::max(s1, g.v[j]), hi = std::min(s2, g.v[j + 1]);
        if (hi > lo && A[j] != 0.0) sum += A[j] * theta_shell(lo, hi);
    }
    return sum;
}

double velocity_tail_mass(const DistributionFunction& f, double s)
{
    return velocity_band_mass(f, s, f.grid.v.back());
}

MachineResult cap_excess(const DistributionFunction& f, double k)
{
    std::vector<double> rho0 = density(f);
    if (max_of(rho0) > 1.0 + 1e-12)
        throw PreconditionError("cap_excess: density exceeds 1, the annulus argument fails");
    MachineTrace tr;
    tr.op = "cap_excess";
    tr.D_before = evaluate(f, k).D;
    double a = annulus_inner(), b = annulus_outer();
    tr.info["H_measure_exact"] = shell_volume(a, b);
    if (f.max_value() <= 1.0) {
        tr.D_after = tr.D_before;
        tr.info["E_cells"] = 0;
        return {f, tr};
    }

    DistributionFunction g = refine_v(f, {a, b});
    const auto& gr = g.grid;
    std::size_t nvc = gr.ncell_v();
    std::vector<char> in_H(nvc, 0);
    double Hsum = 0.0;
    for (std::size_t j = 0; j < gr.nv(); ++j) {
        bool inside = gr.v[j] >= a * (1 - 1e-12) && gr.v[j + 1] <= b * (1 + 1e-12);
        for (std::size_t l = 0; l < gr.nc(); ++l) {
            in_H[j * gr.nc() + l] = inside;
            if (inside) Hsum += gr.vol_v[j * gr.nc() + l];
        }
    }
    tr.info["H_measure"] = Hsum;

    double n_E = 0, min_Hlt = 8.0;
    for (std::size_t i = 0; i < gr.nr(); ++i) {
        double* fi = &g.f[i * nvc];
        double rhoD = 0.0, Hlt = 0.0;
        for (std::size_t q = 0; q < nvc; ++q) {
            if (fi[q] > 1.0) rhoD += gr.e_w[q] * (fi[q] - 1.0);
            if (in_H[q] && fi[q] < 0.5) Hlt += gr.vol_v[q];
        }
        if (rhoD <= 0.0) continue;
        if (Hlt <= 4.0) throw PreconditionError("cap_excess: |H_<| <= 4");
        min_Hlt = std::min(min_Hlt, Hlt);
        for (std::size_t q = 0; q < nvc; ++q) {
            if (fi[q] > 1.0) {
                fi[q] = 1.0;
                n_E += 1;
            } else if (in_H[q] && fi[q] < 0.5) {
                fi[q] += rhoD * gr.vol_v[q] / (Hlt * gr.e_w[q]);
            }
        }
    }
    tr.info["E_cells"] = n_E;
    tr.info["min_H_lt"] = min_Hlt;
    tr.D_after = evaluate(g, k).D;
    tr.rho_max_dev = max_abs_diff(density(g), rho0);
    return {std::move(g), tr};
}

MachineResult tail_rearrange(const DistributionFunction& f, double P, const AdmissibleParams& p,
                             const TailOptions& opt)
{
    AdmissibleParams pv = p.validated();
    double k = pv.k;
    if (P < pv.P0() * (1.0 - 1e-12)) throw PreconditionError("tail_rearrange: P below P0");
    if (f.max_value() > 1.0 + 1e-12) throw PreconditionError("tail_rearrange: f exceeds 1");
    std::vector<double> rho0 = density(f);
    if (max_of(rho0) > 1.0 + 1e-12) throw PreconditionError("tail_rearrange: density exceeds 1");
    double Mgt = velocity_tail_mass(f, P);
    if (!(Mgt > 0.0)) throw PreconditionError("tail_rearrange: no mass beyond P");
    if (std::pow(P, 0.25) * Mgt < 1.0) throw PreconditionError("tail_rearrange: trigger fails");

    const auto& gr = f.grid;
    MassModel mm(gr.r, rho0);
    double Mtot = mm.total();
    std::vector<double> W = mm.elam_weights();
    auto B = column_phi(f, W, k);

    MachineTrace tr;
    tr.op = "tail_rearrange";
    tr.P_used = P;
    tr.D_before = evaluate(f, k).D;

    double D_lt = 0.0;
    for (std::size_t j = 0; j < gr.nv(); ++j) {
        double hi = std::min(P, gr.v[j + 1]);
        if (hi > gr.v[j]) D_lt += B[j] * shell_volume(gr.v[j], hi);
    }

    double Nd = std::floor((1.0 + Mtot) * P / Mgt);
    if (Nd > 5e7) throw RangeError("tail_rearrange: strip count too large");
    std::size_t N = static_cast<std::size_t>(Nd);
    double q = std::sqrt(P);
    double dq = q / Nd;
    auto edge = [&](std::size_t j) { return 0.5 * q + double(j) * dq; };

    // Strip integrals of e^λ φ(f); deterministic left-to-right sweep.
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    std::size_t col = 0;
    for (std::size_t s = 0; s < N; ++s) {
        double lo = edge(s), hi = edge(s + 1);
        while (col < gr.nv() && gr.v[col + 1] <= lo) ++col;
        double val = 0.0;
        for (std::size_t c = col; c < gr.nv() && gr.v[c] < hi; ++c) {
            double a = std::max(lo, gr.v[c]), b = std::min(hi, gr.v[c + 1]);
            if (b > a && B[c] != 0.0) val += B[c] * shell_volume(a, b);
        }
        if (val > best_val) {
            best_val = val;
            best = s;
        }
    }
    double s_lo = edge(best), s_hi = edge(best + 1);
    double xi1 = solve_unit_theta(P, P + 1.0);
    double xi2 = solve_unit_theta(s_lo, s_hi);

    std::vector<double> rho_gt = band_density(f, P, std::max(P, gr.v.back()));
    std::vector<double> rho_i = band_density(f, s_lo, s_hi);

    DistributionFunction g;
    double weight_dev = 0.0;
    if (opt.adaptive_nodes) {
        g = refine_v(f, {P, xi1, P + 1.0, s_lo, s_hi, xi2});
        const auto& G = g.grid;
        for (std::size_t j = 0; j < G.nv(); ++j) {
            double s = G.v_mid(j);
            int kind = 0;  // 0 keep, 1 h1 value, 2 h2 value, 3 zero
            if (s >= P + 1.0) kind = 3;
            else if (s >= P) kind = s < xi1 ? 1 : 3;
            else if (s >= s_lo && s < s_hi) kind = s < xi2 ? 2 : 3;
            if (kind == 0) continue;
            for (std::size_t i = 0; i < G.nr(); ++i)
                for (std::size_t l = 0; l < G.nc(); ++l)
                    g.at(i, j, l) = kind == 1 ? rho_i[i] : kind == 2 ? rho_gt[i] : 0.0;
        }
    } else {
        // Cell-wise sets by midpoint; values normalized by the covered weight.
        g = refine_v(f, {P + 1.0});
        const auto& G = g.grid;
        std::vector<std::size_t> tail, strip;
        for (std::size_t j = 0; j < G.nv(); ++j) {
            double s = G.v_mid(j);
            if (s >= P) tail.push_back(j);
            else if (s >= s_lo && s < s_hi) strip.push_back(j);
        }
        if (strip.empty()) {
            double c = 0.5 * (s_lo + s_hi);
            for (std::size_t j = 0; j < G.nv(); ++j)
                if (G.v[j] <= c && c < G.v[j + 1]) strip.push_back(j);
        }
        auto pick = [&](const std::vector<std::size_t>& set, double limit) {
            std::vector<std::size_t> out;
            for (std::size_t j : set)
                if (G.v_mid(j) < limit) out.push_back(j);
            if (out.empty() && !set.empty()) out.push_back(set.front());
            return out;
        };
        auto h1 = pick(tail, xi1), h2 = pick(strip, xi2);
        auto content = [&](const std::vector<std::size_t>& set) {
            std::vector<double> c(G.nr(), 0.0);
            for (std::size_t j : set)
                for (std::size_t i = 0; i < G.nr(); ++i)
                    for (std::size_t l = 0; l < G.nc(); ++l)
                        c[i] += g.at(i, j, l) * G.e_w[j * G.nc() + l];
            return c;
        };
        auto weight = [&](const std::vector<std::size_t>& set) {
            double w = 0.0;
            for (std::size_t j : set) w += theta_shell(G.v[j], G.v[j + 1]);
            return w;
        };
        rho_gt = content(tail);
        rho_i = content(strip);
        double w1 = weight(h1), w2 = weight(h2);
        weight_dev = std::max(std::fabs(w1 - 1.0), std::fabs(w2 - 1.0));
        for (std::size_t j : tail)
            for (std::size_t i = 0; i < G.nr(); ++i)
                for (std::size_t l = 0; l < G.nc(); ++l) g.at(i, j, l) = 0.0;
        for (std::size_t j : strip)
            for (std::size_t i = 0; i < G.nr(); ++i)
                for (std::size_t l = 0; l < G.nc(); ++l) g.at(i, j, l) = 0.0;
        if (!h1.empty())
            for (std::size_t j : h1)
                for (std::size_t i = 0; i < G.nr(); ++i)
                    for (std::size_t l = 0; l < G.nc(); ++l) g.at(i, j, l) = rho_i[i] / w1;
        for (std::size_t j : h2)
            for (std::size_t i = 0; i < G.nr(); ++i)
                for (std::size_t l = 0; l < G.nc(); ++l) g.at(i, j, l) = rho_gt[i] / w2;
    }

    tr.D_after = evaluate(g, k).D;
    tr.rho_max_dev = max_abs_diff(density(g), rho0);
    tr.info["N"] = Nd;
    tr.info["q"] = q;
    tr.info["strip_index"] = double(best);
    tr.info["strip_value"] = best_val;
    tr.info["D_lt"] = D_lt;
    tr.info["M_gt"] = Mgt;
    tr.info["xi1"] = xi1;
    tr.info["xi2"] = xi2;
    tr.info["algu"] = std::pow(P, 0.25) * velocity_band_mass(g, P, P + 1.0);
    tr.info["max_f"] = g.max_value();
    tr.info["weight_dev"] = weight_dev;
    return {std::move(g), tr};
}

namespace {

// First P > P0 with P^{1/4} T(P) = 1, or 0 if the curve stays below 1.
double first_trigger(const DistributionFunction& f, double P0)
{
    const auto& g = f.grid;
    auto A = column_mass(f);
    std::size_t nv = g.nv();
    std::vector<double> T(nv + 1, 0.0);
    for (std::size_t j = nv; j-- > 0;) T[j] = T[j + 1] + A[j] * theta_shell(g.v[j], g.v[j + 1]);
    for (std::size_t j = 0; j < nv; ++j) {
        if (g.v[j + 1] <= P0) continue;
        double lo = std::max(P0, g.v[j]), hi = g.v[j + 1];
        auto tail = [&](double P) { return T[j + 1] + A[j] * theta_shell(P, hi); };
        auto phi_P = [&](double P) { return std::pow(P, 0.25) * tail(P); };
        auto dphi = [&](double P) {
            return 0.25 * std::pow(P, -0.75) * tail(P)
                   - std::pow(P, 0.25) * A[j] * 4.0 * kPi * P * P * std::sqrt(1.0 + P * P);
        };
        // φ is unimodal on the cell: locate its maximum.
        double xm;
        if (dphi(lo) <= 0.0) xm = lo;
        else if (dphi(hi) >= 0.0) xm = hi;
        else {
            double a = lo, b = hi;
            for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
                double m = 0.5 * (a + b);
                if (dphi(m) > 0.0) a = m; else b = m;
            }
            xm = 0.5 * (a + b);
        }
        if (phi_P(xm) < 1.0) continue;
        double a = lo, b = xm;
        for (int it = 0; it < 200 && b - a > 1e-15 * b; ++it) {
            double m = 0.5 * (a + b);
            if (phi_P(m) < 1.0) a = m; else b = m;
        }
        return b;
    }
    return 0.0;
}

} // namespace

MachineResult improve_tail(const DistributionFunction& f, const AdmissibleParams& p,
                           const TailOptions& opt)
{
    AdmissibleParams pv = p.validated();
    double k = pv.k;
    std::vector<double> rho0 = density(f);
    auto [g, cap] = cap_excess(f, k);
    double P0 = pv.P0();
    MachineTrace tr;
    tr.op = "improve_tail";
    tr.D_before = cap.D_before;
    tr.info["cap_D_after"] = cap.D_after;

    DistributionFunction out;
    double phi0 = std::pow(P0, 0.25) * velocity_tail_mass(g, P0);
    tr.info["phi_P0"] = phi0;
    if (phi0 >= 1.0) {
        tr.branch = 1;
        auto res = tail_rearrange(g, P0, pv, opt);
        out = std::move(res.first);
        tr.P_used = P0;
        tr.info["algu"] = res.second.info["algu"];
    } else {
        double Ph = first_trigger(g, P0);
        if (Ph == 0.0) {
            tr.branch = 2;
            out = std::move(g);
        } else {
            tr.branch = 3;
            auto res = tail_rearrange(g, Ph, pv, opt);
            out = std::move(res.first);
            tr.P_used = Ph;
            tr.info["algu"] = res.second.info["algu"];
        }
    }
    tr.D_after = evaluate(out, k).D;
    tr.rho_max_dev = max_abs_diff(density(out), rho0);
    return {std::move(out), tr};
}

MachineResult remove_gap(const DistributionFunction& f, double a, double b,
                         const AdmissibleParams& p)
{
    AdmissibleParams pv = p.validated();
    double k = pv.k, sigma0 = pv.sigma0;
    if (!(a > 0.0 && b > a)) throw PreconditionError("remove_gap: need 0 < a < b");
    DistributionFunction g = refine_r(f, {a, b});
    const auto& gr = g.grid;
    std::size_t nvc = gr.ncell_v();
    auto cell_empty = [&](std::size_t i) {
        for (std::size_t q = 0; q < nvc; ++q)
            if (g.f[i * nvc + q] != 0.0) return false;
        return true;
    };
    auto edge_index = [&](double x) {
        std::size_t best = 0;
        for (std::size_t i = 0; i < gr.r.size(); ++i)
            if (std::fabs(gr.r[i] - x) < std::fabs(gr.r[best] - x)) best = i;
        return best;
    };
    std::size_t ia = edge_index(a), ib = edge_index(b);
    for (std::size_t i = ia; i < ib; ++i)
        if (!cell_empty(i)) throw PreconditionError("remove_gap: f does not vanish on (a, b)");
    std::size_t last = 0;
    bool any = false;
    for (std::size_t i = 0; i < gr.nr(); ++i)
        if (!cell_empty(i)) { last = i; any = true; }

    MachineTrace tr;
    tr.op = "remove_gap";
    FunctionalReport before = evaluate(f, k);
    tr.D_before = before.D;
    tr.info["mass_before"] = before.M;
    if (!any || last < ib) {
        tr.D_after = tr.D_before;
        tr.info["mass_after"] = before.M;
        tr.info["delta"] = 0.0;
        return {f, tr};
    }
    double R0 = gr.r[last + 1];
    std::vector<double> rho0 = density(g);
    double delta0 = sigma0 - max_of(rho0);
    if (!(delta0 > 0.0)) throw PreconditionError("remove_gap: no density margin below sigma0");
    double ratio = sigma0 / (sigma0 - delta0);
    double A = gr.r[ia], Bv = gr.r[ib];
    double delta = std::min({Bv - A, 0.5 * R0, (std::sqrt(ratio) - 1.0) * A,
                             (std::pow(ratio, 0.375) - 1.0) * A});
    tr.info["delta0"] = delta0;
    tr.info["delta"] = delta;
    tr.info["R0"] = R0;

    // Remove (A, A + δ); every edge from A + δ on moves inward by δ.
    double bp = A + delta;
    if (bp < Bv) {
        g = refine_r(g, {bp});
        ib = edge_index(bp);
    }
    // Room in |v| for the largest dilation so no content leaves the grid.
    {
        double tmax = 1.0;
        const auto& G0 = g.grid;
        for (std::size_t e = ib + 1; e < G0.r.size(); ++e) {
            double a0 = G0.r[e - 1], a1 = G0.r[e];
            double vo = a1 * a1 * a1 - a0 * a0 * a0;
            double vn = (a1 - delta) * (a1 - delta) * (a1 - delta)
                        - (a0 - delta) * (a0 - delta) * (a0 - delta);
            tmax = std::max(tmax, std::cbrt(vo / vn));
        }
        if (tmax > 1.0) g = refine_v(g, {G0.v.back() * tmax * (1.0 + 1e-12)});
    }
    const auto& G = g.grid;
    std::vector<double> r_new(G.r.begin(), G.r.begin() + ia + 1);
    std::vector<std::size_t> src;  // old cell of each new cell
    for (std::size_t i = 0; i < ia; ++i) src.push_back(i);
    for (std::size_t e = ib + 1; e < G.r.size(); ++e) {
        r_new.push_back(G.r[e] - delta);
        src.push_back(e - 1);
    }
    PhaseGrid ng(r_new, G.v, G.c);
    DistributionFunction out(ng);
    std::size_t nv = G.nv(), nc = G.nc();
    for (std::size_t i = 0; i < ng.nr(); ++i) {
        std::size_t o = src[i];
        if (i < ia) {
            std::copy_n(&g.f[o * G.ncell_v()], G.ncell_v(), &out.f[i * G.ncell_v()]);
            continue;
        }
        // Isotropic velocity dilation by t with t³ = V_old / V_new keeps the
        // phase-space measure of every level set; project back onto the grid.
        double t = std::cbrt(G.vol_x[o] / ng.vol_x[i]);
        for (std::size_t l = 0; l < nc; ++l) {
            std::size_t js = 0;
            for (std::size_t j = 0; j < nv; ++j) {
                double lo = G.v[j] / t, hi = G.v[j + 1] / t;
                while (js < nv && G.v[js + 1] <= lo) ++js;
                double acc = 0.0;
                for (std::size_t s = js; s < nv && G.v[s] < hi; ++s) {
                    double x0 = std::max(lo, G.v[s]), x1 = std::min(hi, G.v[s + 1]);
                    if (x1 > x0) acc += g.at(o, s, l) * shell_volume(x0, x1);
                }
                out.at(i, j, l) = t * t * t * acc / shell_volume(G.v[j], G.v[j + 1]);
            }
        }
    }
    FunctionalReport after = evaluate(out, k);
    tr.D_after = after.D;
    tr.info["mass_after"] = after.M;
    tr.info["max_rho_after"] = max_of(density(out));
    // m_new(r) against m_old(r + δ) at the shifted edges.
    MassModel mo(G.r, density(g));
    MassModel mn = mass_model(out);
    double dev = 0.0;
    for (std::size_t e = ia; e < ng.r.size(); ++e) {
        std::size_t eo = e == ia ? ib : ib + (e - ia);
        dev = std::max(dev, std::fabs(mn.m[e] - mo.m[eo]));
    }
    tr.info["m_shift_dev"] = dev / std::max(before.M, 1e-300);
    return {std::move(out), tr};
}

MachineResult restrict_rescale(const DistributionFunction& f, double R, double k)
{
    const auto& gr = f.grid;
    std::size_t e = 0;
    for (std::size_t i = 0; i < gr.r.size(); ++i)
        if (std::fabs(gr.r[i] - R) < std::fabs(gr.r[e] - R)) e = i;
    std::vector<double> rho = density(f);
    double M = 0.0, dM = 0.0;
    for (std::size_t i = 0; i < gr.nr(); ++i) {
        double m = gr.vol_x[i] * rho[i];
        M += m;
        if (i >= e) dM += m;
    }
    if (!(dM > 0.0 && dM < M)) throw PreconditionError("restrict_rescale: outer mass not in (0, M)");
    DistributionFunction f1 = f;
    std::fill(f1.f.begin() + e * gr.ncell_v(), f1.f.end(), 0.0);
    double gamma = (M - dM) / M;
    DistributionFunction out = scale(f1, gamma);

    MachineTrace tr;
    tr.op = "restrict_rescale";
    tr.D_before = evaluate(f, k).D;
    FunctionalReport r1 = evaluate(f1, k);
    FunctionalReport ro = evaluate(out, k);
    tr.D_after = ro.D;
    tr.info["R_used"] = gr.r[e];
    tr.info["delta_M"] = dM;
    tr.info["gamma"] = gamma;
    tr.info["D_f1"] = r1.D;
    tr.info["bound"] = r1.D / gamma;
    tr.info["mass_after"] = ro.M;
    return {std::move(out), tr};
}

} // namespace evc
