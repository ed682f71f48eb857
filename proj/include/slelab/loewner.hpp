#pragma once

// Discrete chordal Loewner evolution on a uniform time grid.
//
// The driving function is piecewise constant: on [t_k, t_{k+1}) it is frozen at
// W(t_k) and the flow over the step is the exact vertical-slit map
//
//     g -> w + sqrt((g - w)^2 + 4 dt),
//
// so composing steps is an exact conformal composition. The adaptive engine used
// by the Monte Carlo experiments lives in chain.hpp.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sle {

struct SimParams {
  double kappa = 6.0;
  double dt = 1e-3;
  double t_max = 1.0;
  std::uint64_t seed = 1;
  std::uint64_t run_index = 0;

  /// Throws ParameterError unless 0 < kappa < 8, dt > 0 and t_max >= 0.
  void validate() const;
  double s_kappa() const noexcept { return 8.0 / kappa - 1.0; }
  std::size_t step_count() const;
};

/// Sampled driving function. values[k] is the driving value held on
/// [times[k], times[k+1]); for a uniform path it equals W(times[k]).
struct DrivingPath {
  std::vector<double> times;
  std::vector<double> values;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t run_index = 0;

  std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
};

/// W on the grid t_k = k*dt (last node clipped to t_max), increments
/// Normal(0, kappa*(t_{k+1}-t_k)) drawn from the stream (seed, run_index).
DrivingPath generate_driving(const SimParams& params);

/// Driving path that stays at zero; g_t(z) = sqrt(z^2 + 4t) exactly.
DrivingPath zero_driving(double dt, double t_max);

enum class PointStatus { alive, swallowed, stopped };

struct TrackedPoint {
  double x0 = 1.0;
  double g = 1.0;
  double gprime = 1.0;
  PointStatus status = PointStatus::alive;
  std::int64_t status_step = -1;

  static TrackedPoint start(double x0);
  bool alive() const noexcept { return status == PointStatus::alive; }
};

/// Image reach of a slit of capacity dt is 2*sqrt(dt); a point closer than
/// twice that to the driving value is declared swallowed.
double swallow_tolerance(double dt);

/// One step of the left-endpoint scheme. Throws StateError on a non-alive
/// point or when g <= w_before.
TrackedPoint step_point(const TrackedPoint& point, double w_before, double w_after, double dt,
                        std::int64_t step_index = 0);

struct StepView {
  std::size_t step = 0;
  double time = 0.0;
  double drive = 0.0;
  std::span<const TrackedPoint> points;
};

class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void observe(const StepView& view) = 0;
  /// Polled for early termination once every point is non-alive.
  virtual bool complete() const { return true; }
};

struct EvolveResult {
  DrivingPath path;
  std::vector<TrackedPoint> points;
  std::size_t steps_run = 0;
};

/// Generates the driving path and flows all points over it, calling every
/// observer once per step. Observer exceptions are rethrown as
/// SimulationError tagged with the step index.
EvolveResult evolve(const SimParams& params, std::vector<TrackedPoint> points,
                    std::span<StepObserver* const> observers = {});

/// Same, over an explicit driving path.
EvolveResult evolve_on(const DrivingPath& path, std::vector<TrackedPoint> points,
                       std::span<StepObserver* const> observers = {});

struct TraceSample {
  std::size_t step = 0;
  std::complex<double> point;
  std::size_t depth = 0;  // number of inverse slit maps composed
};

/// gamma(t_k) by backward composition of inverse slit maps ("zipper").
/// The tip after step k is the top of the last slit, w_{k-1} + 2i sqrt(dt_k),
/// pulled back through the earlier maps.
std::vector<TraceSample> trace_points(const DrivingPath& path, std::span<const std::size_t> steps);

/// Inverse of the slit map with driving w and capacity dt, on the branch that
/// maps the closed upper half-plane into itself.
std::complex<double> inverse_slit(std::complex<double> z, double w, double dt);

}  // namespace sle
