#pragma once

// Boundary observables of a Loewner run:
//
//   M^x_t = (g'_t(x) / (g_t(x) - W_t))^s,        s = 8/kappa - 1,
//
// the threshold time tau_x (first M^x >= eps^{-s}), membership x in C_eps,
// the two-point process u(Z) M^x M^y with Z = X_x / X_y, the weighted sum
// Z_t = int rho M^x_t dx and the statistic Q_a.
//
// Trackers work on the uniform engine (loewner.hpp); the *_trial and
// *_checkpoints functions run the adaptive chain.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "slelab/chain.hpp"
#include "slelab/criterion.hpp"
#include "slelab/loewner.hpp"

namespace sle {

/// (gprime / (g - w))^s. Throws StateError for a non-alive point and
/// DomainError when g <= w or gprime <= 0.
double compute_M(const TrackedPoint& point, double w, double s);

enum class Outcome { running, hit, swallowed_first, horizon, cutoff };

class MartingaleTracker {
 public:
  MartingaleTracker(double x, double epsilon, double kappa, double cutoff_ratio = 1e-4);

  /// Recomputes M from the point; decides hit / swallowed_first / cutoff.
  void update(const TrackedPoint& point, double w, std::size_t step);
  /// A still-running tracker becomes a horizon miss.
  void finish();

  double x() const noexcept { return x_; }
  double epsilon() const noexcept { return epsilon_; }
  double threshold() const noexcept { return threshold_; }
  double current_M() const noexcept { return m_; }
  std::optional<std::size_t> tau_step() const noexcept { return tau_; }
  Outcome outcome() const noexcept { return outcome_; }
  bool in_C() const noexcept { return outcome_ == Outcome::hit; }

 private:
  double x_;
  double epsilon_;
  double s_;
  double threshold_;
  double floor_;  // cutoff_ratio * M_0
  double m_;
  std::optional<std::size_t> tau_;
  Outcome outcome_ = Outcome::running;
};

struct PairTracker {
  MartingaleTracker tx;
  MartingaleTracker ty;
  double kappa;
  double z = 0.0;
  double product = 0.0;  // u(Z) M^x M^y

  PairTracker(double x, double y, double eps_x, double eps_y, double kappa);
  void update(const TrackedPoint& px, const TrackedPoint& py, double w, std::size_t step);
};

/// One tracker per evolved point, driven by evolve().
class CEpsObserver : public StepObserver {
 public:
  CEpsObserver(std::span<const double> x, std::span<const double> eps, double kappa);
  void observe(const StepView& view) override;
  bool complete() const override;
  void finish();
  const std::vector<MartingaleTracker>& trackers() const noexcept { return trackers_; }

 private:
  std::vector<MartingaleTracker> trackers_;
};

/// x in C_eps for one run of the adaptive engine (kappa <= 4 runs end by the
/// relative decay cutoff or the horizon).
bool run_C_eps_trial(double kappa, double x, double eps, std::uint64_t seed, std::uint64_t run_index,
                     const EngineConfig& cfg = {});

/// Joint membership of x < y in one run.
std::pair<bool, bool> run_pair_trial(double kappa, double x, double y, double eps_x, double eps_y,
                                     std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg = {});

enum class UMethod { automatic, euler, series };

/// u(z) = (1-z)^{-s} 2F1(1-8/kappa, 4/kappa; 8/kappa; 1-z). The automatic
/// method sums the series while 1-z <= 0.9 and uses the Euler integral beyond.
double u_of_z(double z, double kappa, UMethod method = UMethod::automatic);

/// Limit of (1-z)^s u(z) as z -> 0.
double u_gamma_ratio(double kappa);

struct QBounds {
  double q1 = 0.0;  // inf u
  double q2 = 0.0;  // sup (1-z)^s u(z)
  double z1 = 0.0;  // arguments attaining them (0 or 1 for endpoint limits)
  double z2 = 0.0;
};

/// Coarse scan on `grid` interior points plus both endpoint limits, then
/// golden-section refinement of the best interior bracket.
QBounds q1_q2(double kappa, std::size_t grid = 64);

/// Midpoint rule on a geometric grid: nodes x_i with weights rho(x_i) dx_i.
struct IntegralObservable {
  std::vector<double> x;
  std::vector<double> weight;

  /// [lo, hi] split into cells of ratio `ratio` (last cell shortened).
  static IntegralObservable geometric(const std::function<double(double)>& rho, double lo, double hi,
                                      double ratio = 1.05);
  /// sum weight_i * m_i.
  double value(std::span<const double> m) const;
  /// Z_0 = sum weight_i x_i^{-s}.
  double initial(double kappa) const;
};

/// Z_t after every step of a uniform run; swallowed points contribute 0.
std::vector<double> track_Z_supermartingale(const SimParams& params, const IntegralObservable& z);

/// M^x_{t ^ tau} at each checkpoint (ascending). Hits freeze at eps^{-s},
/// swallowing at 0; a point whose M has fallen below 1e-6 M_0 is frozen, which
/// leaves the mean of a bounded martingale unchanged.
std::vector<double> stopped_M_checkpoints(double kappa, double x, double eps, std::span<const double> times,
                                          std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg = {});

/// Z_t of an integral observable at each checkpoint (no stopping).
std::vector<double> Z_checkpoints(double kappa, const IntegralObservable& z, std::span<const double> times,
                                  std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg = {});

/// u(Z_{t^T}) M^x_{t^T} M^y_{t^T} at each checkpoint, T = T_x ^ T_y.
std::vector<double> pair_V_checkpoints(double kappa, double x, double y, double eps_x, double eps_y,
                                       std::span<const double> times, std::uint64_t seed, std::uint64_t run_index,
                                       const EngineConfig& cfg = {});

/// Q_a = int_a^b rho h^{-s} 1{x in C_h(x)} dx on the geometric midpoint grid,
/// with b chosen so that the same grid gives int_a^b rho x^{-s} dx = 1.
struct QStatistic {
  double a = 0.0;
  double b = 0.0;
  double kappa = 0.0;
  std::vector<double> x;
  std::vector<double> h;       // threshold eps per node
  std::vector<double> weight;  // rho h^{-s} dx per node
  double mass = 0.0;           // achieved int rho x^{-s} dx

  /// rho = Lambda_kappa^h at kappa = 4 and h^{s-1} otherwise (the same
  /// formula continued to kappa > 4). Throws RangeError when the mass stays
  /// below 1 up to x_max.
  static QStatistic build(const BoundaryFunction& h, double kappa, double a, double x_max = 1e12,
                          double ratio = 1.05);
  /// Q_a from per-node membership.
  double value(std::span<const std::uint8_t> in_x) const;
};

double compute_Q(const QStatistic& q, std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg = {});

}  // namespace sle
