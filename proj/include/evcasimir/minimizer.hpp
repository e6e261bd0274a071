#pragma once

#include <vector>

#include "evcasimir/core_model.hpp"
#include "evcasimir/static_solver.hpp"

namespace evc {

// One radial shell of the reduced problem: target density a at radius r.
struct ShellProblem {
    double r = 0;
    double a = 0;
    double k = 1.0;
};

// Discrete shell optimum ψ_q = (1 - ε ⟨E⟩_q)_+^k over the velocity cells of a
// grid, with ε fixed by Σ_q e_w[q] ψ_q = a.
struct ShellSolution {
    double eps = 0;
    double eps_continuum = 0;        // (G')⁻¹(-4πκa), 1 for a = 0
    std::vector<double> psi;         // per velocity cell (j, l)
    double H = 0;                    // Σ vol_v (χ(ψ) - ψ)
    double constraint_residual = 0;  // (Σ e_w ψ - a) / max(a, tiny)
};

ShellSolution project_shell(const ShellProblem& p, const AnsatzTables& tables,
                            const PhaseGrid& grid);
// Cutoff only; no table needed.  RangeError if a exceeds Σ e_w.
double shell_cutoff(double a, double k, const PhaseGrid& grid);
// Σ vol_v (χ(ψ) - ψ) for an arbitrary shell ψ on the grid's velocity cells.
double shell_casimir(const std::vector<double>& psi, double k, const PhaseGrid& grid);

struct ReducedValue {
    double D = 0;
    DistributionFunction f;
    std::vector<double> eps;         // per r cell
    std::vector<double> h;           // Σ vol_v φ(ψ) per r cell
    std::vector<double> grad;        // ∂D/∂ρ_i
};

// D of the shell-wise optimum with density profile rho on the grid's r cells.
ReducedValue reduced_functional(const std::vector<double>& rho, const PhaseGrid& grid, double k);

struct MinimizeOptions {
    std::size_t max_iter = 400;
    // One iteration runs pair moves until the KKT gap drops below kkt_tol or
    // this budget is spent.  0 selects 64 moves per r cell.
    std::size_t moves_per_iter = 0;
    double dD_tol = 1e-10;           // |ΔD| <= dD_tol (1 + |D|)
    double kkt_tol = 1e-8;           // spread of ∂D/∂x over movable shells
};

struct MinimizerResiduals {
    // Smallest first-order change of D per unit mass over single-pair moves.
    double vi_residual = 0;
    double U_cv = 0;
};

struct MinimizerState {
    PhaseGrid grid;
    AdmissibleParams params;
    std::vector<double> rho;
    std::vector<double> eps;
    std::vector<double> h;
    DistributionFunction f;
    double D = 0;
    std::size_t iter = 0;
    std::size_t moves = 0;
    double kkt_gap = 0;
    double last_dD = 0;
    bool converged = false;
    std::vector<double> D_history;   // D after each iteration, starting with the initial value
    MinimizerResiduals residuals;
};

// ρ_i = M / (cell volume up to R) for cells inside R (snapped to an edge).
std::vector<double> flat_profile(const PhaseGrid& grid, double M, double R);
// Exact cell averages of a static solution's density.
std::vector<double> profile_from_static(const StaticSolution& sol, const PhaseGrid& grid);

MinimizerState minimize(const AdmissibleParams& p, const PhaseGrid& grid,
                        const std::vector<double>& init_rho, const MinimizeOptions& opt = {});

struct VariationalResidual {
    double slim = 0;        // ∫ d/dr(e^{λ+μ}(m_g - m₀)) U dr
    double unslimmed = 0;   // ∫∫ e^λ(χ'(f₀)-1)(g-f₀) + e^{3λ}(χ(f₀)-f₀)(m_g-m₀)/r
};
VariationalResidual variational_residual(const MinimizerState& s, const DistributionFunction& g);

// μ₀ at the r edges from μ' = e^{2λ}(m/r² + 4πr p̃), p̃ = -h/ε - ρ, with
// e^{2μ₀(R₀)} = 1 - 2M/R₀; and U = -e^{-μ₀}ε̃ at cell midpoints (0 outside
// the support).
std::vector<double> mu_at_edges(const MinimizerState& s);
std::vector<double> U_profile(const MinimizerState& s);

struct DiagnosticsReport {
    double u_cv = 0;
    std::size_t u_cells = 0;
    double u_mean = 0;
    bool v_support_ok = false;
    double S0 = 0;
    double N = 0;
    double saturation_bound = 0;
    bool saturation_applicable = false;
    bool saturation_violated = false;
    double saturated_radius = 0;
    double R0 = 0;
    double kkt_gap = 0;
};
DiagnosticsReport convergence_diagnostics(const MinimizerState& s);

// (21/20)/√(1+K²) + (21/40)(1 - 1/√(1+K²)) with K = 12/25.
double small_mass_saturation_bound();

} // namespace evc
