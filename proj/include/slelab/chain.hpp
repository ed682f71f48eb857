#pragma once

// Adaptive Loewner chain used by the Monte Carlo engine.
//
// Each step of capacity dt is the symmetric splitting
//
//     half slit (2 dt) at W_k  ->  driving increment dW  ->  half slit (2 dt) at W_{k+1},
//
// which is the same piecewise-constant-driving / exact-slit-map construction
// as loewner.hpp, with the driving sampled at the midpoint of each constant
// piece. Points are stored by their gap X = g_t(x) - W_t, which keeps full
// relative precision near swallowing. The step size is chosen by the caller,
// typically dt = c * min X^2 over the points that still matter.
//
// Every step is recorded so a point can be inserted mid-run by replaying the
// history; the replayed state is exactly what continuous tracking would give.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <vector>

#include "slelab/loewner.hpp"
#include "slelab/rng.hpp"

namespace sle {

/// Controls shared by every adaptive Monte Carlo trial.
struct EngineConfig {
  /// dt = resolution * X^2 for the smallest gap X among points that matter.
  double resolution = 1e-3;
  /// A threshold counts as reached once log(threshold / M^{1/s}) <= hit_gap.
  double hit_gap = 1e-4;
  /// A point is a miss once M < miss_ratio * M_0; by optional stopping its
  /// hit probability from there is below miss_ratio * P(hit).
  double miss_ratio = 1e-4;
  /// Unresolved trials are declared misses at this capacity time.
  double horizon = std::numeric_limits<double>::infinity();
  /// Per-decision error of the swallow-order rules (see swallow.hpp).
  double order_tol = 1e-3;
  /// Interval bounds trigger refinement at this fraction of the threshold.
  double refine_margin = 0.1;
  std::size_t max_steps = 500'000'000;

  void validate() const;
};

struct ChainPoint {
  double x0 = 0.0;
  double gap = 0.0;     // g_t(x) - W_t
  double gprime = 1.0;  // g'_t(x)
  bool alive = true;
  std::int64_t swallow_step = -1;
};

class Chain {
 public:
  Chain(double kappa, std::uint64_t seed, std::uint64_t run_index, bool keep_history = true);
  ~Chain();
  Chain(const Chain&) = delete;
  Chain& operator=(const Chain&) = delete;
  Chain(Chain&&) noexcept = default;
  Chain& operator=(Chain&&) = delete;

  double kappa() const noexcept { return kappa_; }
  double time() const noexcept { return time_; }
  double drive() const noexcept { return drive_; }
  std::size_t step() const noexcept { return steps_; }

  std::size_t size() const noexcept { return points_.size(); }
  const ChainPoint& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<ChainPoint>& points() const noexcept { return points_; }

  /// Adds x0 (> 0, not already present) keeping points sorted by x0.
  /// Returns its index; indices of points to its right shift by one.
  std::size_t insert(double x0);

  /// Advances every alive point by one step of capacity dt; the driving
  /// increment is Normal(0, kappa dt) + drift * dt. A point whose gap would
  /// turn non-positive is marked swallowed at this step.
  void advance(double dt, double drift = 0.0);

  void mark_swallowed(std::size_t i);

  /// Piecewise-constant representation of the realized driving (see
  /// DrivingPath); requires keep_history.
  DrivingPath path() const;

 private:
  struct Step {
    double dt;
    double dw;
  };

  static bool apply(ChainPoint& p, double dt, double dw);
  // History buffers are recycled per thread; fresh pages cost more than the steps.
  static std::vector<std::vector<Step>>& history_pool();

  double kappa_;
  double sqrt_kappa_;
  std::uint64_t seed_;
  std::uint64_t run_index_;
  bool keep_history_;
  Engine rng_;
  boost::random::normal_distribution<double> normal_;
  double time_ = 0.0;
  double drive_ = 0.0;
  std::size_t steps_ = 0;
  std::vector<ChainPoint> points_;
  std::vector<Step> history_;
};

}  // namespace sle
