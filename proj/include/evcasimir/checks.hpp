#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "evcasimir/io.hpp"

namespace evc {

// Feasible competitors for one shell: non-negative fields on the grid's
// velocity cells with Σ e_w ψ = a.  Half are random fields, half are random
// blends with `around`.
std::vector<std::vector<double>> shell_competitors(std::mt19937_64& rng, const PhaseGrid& grid,
                                                   double a, const std::vector<double>& around,
                                                   std::size_t n);

// Seeded property run over every module; deterministic for a given seed,
// count and thread cap.  `count` sets the number of random fields per suite.
json property_suite(const AdmissibleParams& p, std::uint64_t seed, std::size_t count);

} // namespace evc
