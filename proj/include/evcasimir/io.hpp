#pragma once

#include <string>

#include "json.hpp"

#include "evcasimir/core_model.hpp"
#include "evcasimir/functional.hpp"
#include "evcasimir/minimizer.hpp"
#include "evcasimir/rearrangement.hpp"
#include "evcasimir/static_solver.hpp"

namespace evc {

using json = nlohmann::ordered_json;

json to_json(const AdmissibleParams& p);
AdmissibleParams params_from_json(const json& j);
json to_json(const FunctionalReport& r);
FunctionalReport report_from_json(const json& j);
json to_json(const AdmissibilityReport& r);
json to_json(const MachineTrace& t);
json to_json(const CbecVerdict& v);
json to_json(const DiagnosticsReport& d);
json to_json(const MinimizerState& s);
// {k, central_eps, C, R0, M, D} plus the remaining scalar fields.
json static_metadata(const StaticSolution& s);

// Distribution file: {"grid": {"r", "v", "c"}, "k", "params", "f"} with f
// in row-major (r, v, c) order, or "f_file" naming a raw little-endian
// float64 sidecar next to the header.
struct DistributionFile {
    DistributionFunction f;
    double k = 1.0;
    AdmissibleParams params;
};
void write_distribution(const std::string& path, const DistributionFunction& f, double k,
                        const AdmissibleParams& p, bool sidecar = false);
DistributionFile read_distribution(const std::string& path);

// CSV with header r,rho,m,lambda,mu,p; missing columns are left empty.
std::string profile_csv(const RadialProfile& p);
RadialProfile read_profile_csv(const std::string& text);

// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Shortest round-trip text for a double.
std::string fmt_double(double x);

} // namespace evc
