#pragma once

#include <random>

#include "evcasimir/core_model.hpp"

namespace evc {

// Shape of a random piecewise-constant distribution.  The r grid is scaled
// afterwards so the field has mass M, m/r <= beta and rho <= cap.
struct RandomFieldSpec {
    std::size_t nr = 10;
    std::size_t nv = 8;
    std::size_t nc = 4;
    double vmax_lo = 0.2;         // |v| extent drawn from [vmax_lo, vmax_hi]
    double vmax_hi = 3.0;
    double fill = 0.7;            // probability that a cell is non-zero
    // Optional far band [tail_lo, tail_hi] in |v| carrying tail_fraction of
    // the mass (split over tail_cells cells).
    double tail_lo = 0, tail_hi = 0, tail_fraction = 0;
    std::size_t tail_cells = 2;
    // Optional empty r band: cells [gap_lo, gap_hi) are zero.
    std::size_t gap_lo = 0, gap_hi = 0;
    double slack_max = 0.5;       // extra relative r stretch drawn from [0, slack_max]
};

DistributionFunction random_field(std::mt19937_64& rng, const RandomFieldSpec& spec, double M,
                                  double beta, double cap);

} // namespace evc
