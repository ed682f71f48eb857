#pragma once

// C_eps membership for a whole grid of boundary points in one SLE run.
//
// x is in C_eps(x) iff q = g'_t(x) / (g_t(x) - W_t) reaches 1/eps(x) before
// x is swallowed (q^s = M^x). Only a subset of the grid is tracked. For x in
// [a, b] between two tracked points, X(x) >= X(a) and g'(x) <= g'(b) (g_t is
// increasing and convex right of the hull), so
//
//     q(x) <= g'(b) / X(a).
//
// When that bound comes within refine_margin of the smallest interior
// threshold, the midpoint is inserted by replaying the run's history, which
// happens strictly before any interior point can reach its threshold. When the
// bound drops below every interior miss cutoff the interior is settled as
// misses. The law of the result is that of tracking every grid point; single
// runs can differ because dt depends on which points are tracked.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "slelab/chain.hpp"

namespace sle {

class MembershipGrid {
 public:
  /// x strictly ascending and positive; eps > 0 per point.
  MembershipGrid(std::vector<double> x, std::vector<double> eps);
  /// Same eps for every point.
  MembershipGrid(std::vector<double> x, double eps);

  std::size_t size() const noexcept { return x_.size(); }
  double x(std::size_t i) const { return x_[i]; }
  double eps(std::size_t i) const { return eps_[i]; }
  const std::vector<double>& xs() const noexcept { return x_; }

  /// log(1/eps) for point i, and its minimum over indices [lo, hi].
  double log_threshold(std::size_t i) const { return log_r_[i]; }
  double min_log_threshold(std::size_t lo, std::size_t hi) const;

 private:
  void prepare();

  std::vector<double> x_;
  std::vector<double> eps_;
  std::vector<double> log_r_;
  std::vector<std::vector<double>> table_;  // sparse table of range minima
};

enum class StopRule { first_hit, all_decided };

struct MembershipResult {
  std::vector<std::uint8_t> hit;
  bool any_hit = false;
  bool horizon_reached = false;
  std::size_t steps = 0;
  std::size_t tracked = 0;
  double time = 0.0;
};

/// initial_points grid indices (always including both ends) are tracked from
/// the start; the rest are inserted on demand.
///
/// With `tilt` = i the run is sampled conditioned on grid point i being hit:
/// until tau_i the driving function carries the drift (8 - kappa) / X_i, the
/// Girsanov transform of weighting by M^{x_i}, and afterwards it is plain
/// again. Point i is never cut off as a miss.
MembershipResult run_membership(double kappa, const MembershipGrid& grid, StopRule stop, std::uint64_t seed,
                                std::uint64_t run_index, const EngineConfig& cfg = {},
                                std::size_t initial_points = 17, std::optional<std::size_t> tilt = std::nullopt);

}  // namespace sle
