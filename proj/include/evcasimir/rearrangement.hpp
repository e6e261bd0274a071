#pragma once

#include <map>
#include <string>
#include <utility>

#include "evcasimir/core_model.hpp"
#include "evcasimir/functional.hpp"

namespace evc {

struct MachineTrace {
    std::string op;
    double D_before = 0;
    double D_after = 0;
    double rho_max_dev = 0;
    double P_used = 0;      // 0 when no tail parameter applies
    int branch = 0;         // improve_tail case (1, 2, 3); 0 otherwise
    std::map<std::string, double> info;
};

using MachineResult = std::pair<DistributionFunction, MachineTrace>;

struct TailOptions {
    // Insert |v| nodes at every threshold so the sets are built exactly.
    // Otherwise sets are assigned cell-wise by midpoint and normalized by the
    // weight actually covered; the deviation is reported.
    bool adaptive_nodes = true;
};

// Annulus a < |v| < b of Lebesgue measure 8.
double annulus_inner();
double annulus_outer();

// ξ in [lo, hi] with theta_shell(lo, ξ) = 1, by bisection to the ulp.
// RangeError if the interval holds less than a unit shell.
double solve_unit_theta(double lo, double hi);

// ∫∫_{|v| >= s} √(1+|v|²) f dx dv, exact for piecewise-constant f.
double velocity_tail_mass(const DistributionFunction& f, double s);
// Same over s1 <= |v| <= s2.
double velocity_band_mass(const DistributionFunction& f, double s1, double s2);

MachineResult cap_excess(const DistributionFunction& f, double k);

MachineResult tail_rearrange(const DistributionFunction& f, double P, const AdmissibleParams& p,
                             const TailOptions& opt = {});

MachineResult improve_tail(const DistributionFunction& f, const AdmissibleParams& p,
                           const TailOptions& opt = {});

// Shifts the part of f beyond the empty shell (a, b) inward.  sigma0 and k
// come from p.
MachineResult remove_gap(const DistributionFunction& f, double a, double b,
                         const AdmissibleParams& p);

// Restricts f to |x| <= R (R snapped to the nearest r edge) and rescales the
// result back to the input mass.
MachineResult restrict_rescale(const DistributionFunction& f, double R, double k);

} // namespace evc
