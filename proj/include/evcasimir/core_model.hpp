#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace evc {

// 4π ∫_0^b s² √(1+s²) ds, the √(1+|v|²)-weighted volume of the ball |v| <= b.
double theta(double b);
// ∫_0^s t⁴ / √(1+t²) dt
double pressure_moment(double s);
// theta(b) - theta(a) and pressure_moment(b) - pressure_moment(a) without
// cancellation for narrow shells.
double theta_shell(double a, double b);
double pressure_shell(double a, double b);
// Lebesgue measure of a <= |v| <= b.
double shell_volume(double a, double b);

std::vector<double> uniform_edges(double lo, double hi, std::size_t n);
// Merges extra nodes into a sorted edge list; nodes closer than tol to an
// existing edge are dropped.
std::vector<double> insert_nodes(std::vector<double> edges, const std::vector<double>& nodes,
                                 double tol = 1e-14);

// Tensor grid of cells in r (radius), v (= |v|) and c (cosine of the angle
// between v and x).  Velocity coordinates relate to (w, ℓ²) by w = v c and
// ℓ² = r² v² (1 - c²); dℓ² dw = (r²/π) dv.
struct PhaseGrid {
    std::vector<double> r, v, c;     // cell edges
    std::vector<double> vol_x;       // 4π ∫ r² dr per r cell
    std::vector<double> vol_v;       // ∫ dv per velocity cell (j, l)
    std::vector<double> e_w;         // ∫ √(1+|v|²) dv per velocity cell
    std::vector<double> pw_w;        // ∫ w² / √(1+|v|²) dv per velocity cell

    PhaseGrid() = default;
    PhaseGrid(std::vector<double> r_edges, std::vector<double> v_edges,
              std::vector<double> c_edges);

    std::size_t nr() const { return r.size() - 1; }
    std::size_t nv() const { return v.size() - 1; }
    std::size_t nc() const { return c.size() - 1; }
    std::size_t ncell_v() const { return nv() * nc(); }
    std::size_t size() const { return nr() * nv() * nc(); }
    std::size_t idx(std::size_t i, std::size_t j, std::size_t l) const
    {
        return (i * nv() + j) * nc() + l;
    }
    double r_mid(std::size_t i) const { return 0.5 * (r[i] + r[i + 1]); }
    double v_mid(std::size_t j) const { return 0.5 * (v[j] + v[j + 1]); }
    double c_mid(std::size_t l) const { return 0.5 * (c[l] + c[l + 1]); }
    // Cell mean of √(1+|v|²) in velocity column j.
    double e_mean(std::size_t j) const;
    // Analytic 6D measure of the cell box [i0,i1) x [j0,j1) x [l0,l1).
    double box_volume(std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1,
                      std::size_t l0, std::size_t l1) const;
    bool same_as(const PhaseGrid& o) const;
};

// Isotropic grids use a single c cell.
PhaseGrid make_grid(double r_max, std::size_t nr, double v_max, std::size_t nv,
                    std::size_t nc = 1, const std::vector<double>& r_nodes = {},
                    const std::vector<double>& v_nodes = {});

struct DistributionFunction {
    PhaseGrid grid;
    std::vector<double> f;

    DistributionFunction() = default;
    explicit DistributionFunction(PhaseGrid g) : grid(std::move(g)), f(grid.size(), 0.0) {}
    DistributionFunction(PhaseGrid g, std::vector<double> vals);

    double& at(std::size_t i, std::size_t j, std::size_t l) { return f[grid.idx(i, j, l)]; }
    double at(std::size_t i, std::size_t j, std::size_t l) const { return f[grid.idx(i, j, l)]; }
    double max_value() const;
    double min_value() const;
};

// Same function on a grid with extra r or v edges (values copied per cell).
// Nodes beyond the last v edge extend the grid with empty cells.
DistributionFunction refine_r(const DistributionFunction& f, const std::vector<double>& nodes);
DistributionFunction refine_v(const DistributionFunction& f, const std::vector<double>& nodes);

// Piecewise-constant density on r cells with the exact cubic mass function
// inside each cell.
struct MassModel {
    std::vector<double> r;    // edges
    std::vector<double> rho;  // per cell
    std::vector<double> m;    // at edges

    MassModel() = default;
    MassModel(std::vector<double> r_edges, std::vector<double> rho_cells);

    std::size_t n() const { return rho.size(); }
    double total() const { return m.back(); }
    double m_at(std::size_t i, double x) const;
    double two_m_over_r(std::size_t i, double x) const;
    // e^λ at x inside cell i; HorizonError if 2m/r >= 1.
    double elam(std::size_t i, double x) const;
    double lambda(std::size_t i, double x) const;
    // Exact maximum of 2m/r over all r, and where it is attained.
    double max_two_m_over_r(double* where = nullptr) const;
    // ∫_cell 4π r² e^{λ} dr and ∫_cell 4π r e^{3λ} q(r) dr helpers.
    std::vector<double> elam_weights() const;
};

struct RadialProfile {
    std::vector<double> r;    // evaluation radii (cell midpoints)
    std::vector<double> rho;
    std::vector<double> m;
    std::vector<double> lam;
    std::vector<double> mu;   // empty until fixed by a static solve
    std::vector<double> p;    // empty if not available
};

struct AdmissibleParams {
    double M = 1.0;
    double beta = 0.3;
    double sigma0 = 0.0;   // 0 selects the default min{1, 3β³/(4πM²)}
    double k = 1.0;

    static double default_sigma0(double M, double beta);
    double c_beta() const;
    double sigma_M() const;
    double P0() const;
    // Fills sigma0 if unset and checks ranges; ParameterError on failure.
    AdmissibleParams validated() const;
};

struct AdmissibilityReport {
    double mass = 0;
    double max_rho = 0;
    double max_two_m_over_r = 0;
    bool mass_ok = false;
    bool cap_ok = false;
    bool nonneg_ok = false;
    bool horizon_ok = false;
    bool admissible = false;     // member of A_{M,σ0}
    bool in_tilde_A = false;     // mass M, m/r <= β, ρ <= 1
};

constexpr double kMassRelTol = 1e-6;
constexpr double kCapAbsTol = 1e-9;

std::vector<double> density(const DistributionFunction& f);
// m at the r edges for a piecewise-constant ρ.
std::vector<double> mass_function(const std::vector<double>& r_edges,
                                  const std::vector<double>& rho);
// λ = -½ ln(1 - 2m/r) pointwise; r = 0 gives λ = 0.
std::vector<double> lambda_of_m(const std::vector<double>& r, const std::vector<double>& m);
MassModel mass_model(const DistributionFunction& f);
RadialProfile radial_profile(const DistributionFunction& f);
// Kinetic radial pressure ∫ w²/√(1+|v|²) f dv per r cell.
std::vector<double> radial_pressure(const DistributionFunction& f);
AdmissibilityReport check_admissible(const DistributionFunction& f, const AdmissibleParams& p);
double two_m_over_r_bound(double sigma, double M);

} // namespace evc
