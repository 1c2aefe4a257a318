#pragma once

// Local refinement used to bound the quantization error of the coarse grid
// oracle when comparing it against the closed-form allocators.

#include <algorithm>
#include <cmath>

#include "power_alloc.hpp"

namespace grid_refine {

// Best sub-Lagrangian value on a fine local grid in a window of half-width
// `h` around (p1, p2, alpha1).
inline double refine_around(double g1, double g2, const irsma::DualMultipliers& duals,
                            double peak, irsma::Access scheme, int first_decoded,
                            double p1, double p2, double alpha1, double h) {
  const int steps = 40;
  double best = -1e300;
  const double a_lo = scheme == irsma::Access::Noma ? alpha1 : std::max(0.0, alpha1 - h / peak);
  const double a_hi = scheme == irsma::Access::Noma ? alpha1 : std::min(1.0, alpha1 + h / peak);
  const int a_steps = scheme == irsma::Access::Noma ? 0 : steps;
  for (int a = 0; a <= a_steps; ++a) {
    irsma::StateAllocation alloc;
    alloc.first_decoded = first_decoded;
    alloc.alpha1 = a_steps == 0 ? alpha1 : a_lo + (a_hi - a_lo) * a / a_steps;
    for (int i = 0; i <= steps; ++i) {
      alloc.p1 = std::clamp(p1 - h + 2.0 * h * i / steps, 0.0, peak);
      for (int j = 0; j <= steps; ++j) {
        alloc.p2 = std::clamp(p2 - h + 2.0 * h * j / steps, 0.0, peak);
        if (alloc.p1 + alloc.p2 > peak * (1.0 + 1e-12)) continue;
        best = std::max(best, irsma::sub_lagrangian(alloc, g1, g2, scheme, duals));
      }
    }
  }
  return best;
}

// Certified local maximum near both the grid argmax and the candidate point.
inline double refined_max(double g1, double g2, const irsma::DualMultipliers& duals,
                          double peak, irsma::Access scheme, int first_decoded,
                          const irsma::StateAllocation& grid_best,
                          const irsma::StateAllocation& fast_best, double cell) {
  double v = std::max(grid_best.value, fast_best.value);
  v = std::max(v, refine_around(g1, g2, duals, peak, scheme, first_decoded,
                                grid_best.p1, grid_best.p2, grid_best.alpha1, 2.0 * cell));
  v = std::max(v, refine_around(g1, g2, duals, peak, scheme, first_decoded,
                                fast_best.p1, fast_best.p2, fast_best.alpha1, 2.0 * cell));
  return v;
}

}  // namespace grid_refine
