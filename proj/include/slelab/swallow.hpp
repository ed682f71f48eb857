#pragma once

// Swallowing order of a grid of boundary points, kappa in (4, 8).
//
// Two points a < b with gap ratio r = X_a / X_b are swallowed at the same
// instant with probability I_r(1 - 4/kappa, 8/kappa - 1), which is a
// martingale in t. The resolver follows the leftmost pair of live points and
// settles it as soon as that probability is within order_tol of 0 or 1:
//
//     r <= zeta     a goes alone; a and b must be grid neighbours, otherwise
//                   the midpoint is inserted by replay and the pair re-examined
//     1 - r <= del  a goes with b, and so does every grid point between them
//
// Every decision is wrong with probability at most order_tol. Points the
// discrete chain swallows outright in one step share an event; the range up to
// the next live point is refined so no grid point is skipped.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "slelab/chain.hpp"

namespace sle {

struct SwallowOrder {
  /// Event index per grid point, numbered in swallowing order from 0.
  std::vector<std::int32_t> event;
  std::size_t events = 0;
  std::size_t steps = 0;
  std::size_t tracked = 0;
  double time = 0.0;
  bool horizon_reached = false;
};

/// Split and merge ratios (zeta, del) for the given kappa and tolerance.
struct OrderThresholds {
  double zeta = 0.0;
  double del = 0.0;
};
OrderThresholds order_thresholds(double kappa, double tol);

/// grid ascending, positive. initial_points evenly spaced grid indices (ends
/// included) are tracked from the start.
SwallowOrder resolve_swallow_order(double kappa, const std::vector<double>& grid, std::uint64_t seed,
                                   std::uint64_t run_index, const EngineConfig& cfg = {},
                                   std::size_t initial_points = 17);

}  // namespace sle
