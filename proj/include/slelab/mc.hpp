#pragma once

// Monte Carlo estimators over independent runs of the adaptive engine.
//
// Run i of an experiment always uses the stream (seed, first_run + i), and
// tallies are exact sums, so results do not depend on thread count or
// scheduling.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "slelab/accumulator.hpp"
#include "slelab/chain.hpp"
#include "slelab/criterion.hpp"
#include "slelab/observables.hpp"

namespace sle {

struct RunOptions {
  std::uint64_t seed = 1;
  std::uint64_t first_run = 0;
  int threads = 0;  // 0: OpenMP default, 1: serial
  std::size_t chunk = 16;
  EngineConfig engine;
};

/// Fills `out` (one slot per statistic) for run index `run`.
using TrialFn = std::function<void(std::uint64_t run, std::span<double> out)>;

/// Runs n trials in chunks, in parallel when OpenMP is available.
std::vector<EstimatorAccumulator> run_trials(std::size_t n, std::size_t stats, const TrialFn& trial,
                                             const RunOptions& opt);

/// Single-threaded reference; bit-identical to run_trials.
std::vector<EstimatorAccumulator> run_trials_serial(std::size_t n, std::size_t stats, const TrialFn& trial,
                                                    const RunOptions& opt);

struct Estimate {
  double estimate = 0.0;
  double se = 0.0;
  double exact = 0.0;  // closed form or bound; NaN when none
  std::uint64_t n = 0;

  static Estimate from(const EstimatorAccumulator& acc, double exact);
  /// (estimate - exact) / se; for indicator tallies with se = 0 the binomial
  /// error of the exact value is used instead.
  double z() const;
  double binomial_z() const;
};

Estimate estimate_point_prob(double kappa, double x, double eps, std::size_t n, const RunOptions& opt);

/// Joint probability; `exact` holds the product of the marginal closed forms.
Estimate estimate_pair_prob(double kappa, double x, double y, double eps_x, double eps_y, std::size_t n,
                            const RunOptions& opt);

/// Distinct swallowing events of x and x + eps.
Estimate estimate_interval_hit(double kappa, double x, double eps, std::size_t n, const RunOptions& opt);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double residual_sd = 0.0;
  std::size_t points = 0;
};

/// Least squares of y on x. With weights w (inverse variances of y) the fit
/// is weighted and slope_se comes from the known variances; otherwise it is
/// ordinary least squares with the residual-based slope_se.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

struct StripRow {
  double eps = 0.0;
  Estimate p;
};

struct StripFit {
  std::vector<StripRow> rows;
  LineFit fit;             // log P against log eps, inverse-variance weighted
  double expected = 0.0;   // s - 1 (kappa < 4)
  double band = 0.0;       // max/min of P log(1/eps)
  std::vector<double> dropped;
};

enum class StripMethod {
  direct,       // indicator of any hit
  conditioned,  // sum_i p_i E[1 / N | x_i hit], N the number of grid hits
};

/// P(some x on the eps/2 grid of [1,2] is in C_eps) for each eps. Scales with
/// no hits are dropped and listed.
///
/// The conditioned method draws a grid point i with probability proportional
/// to its exact hit probability p_i, runs the chain conditioned on x_i being
/// hit and records (sum p) / N. It is unbiased, bounded by sum p, and keeps a
/// small relative error when the event is rare.
StripFit estimate_strip_hit(double kappa, std::span<const double> eps_grid, std::size_t n, const RunOptions& opt,
                            StripMethod method = StripMethod::direct);

struct GraphHit {
  Estimate p;
  double integral = 0.0;  // int_r^x_max Lambda x^{-s} dx
  double ratio = 0.0;     // p / (1 ^ integral)
  std::size_t grid_points = 0;
};

/// C_h(x) proxy on the grid x_{k+1} = x_k + h(x_k)/2 over [r, x_max].
GraphHit estimate_graph_hit(double kappa, const BoundaryFunction& h, double x_max, std::size_t n,
                            const RunOptions& opt);

struct DimensionFit {
  std::vector<int> levels;  // j with eps = 2^-j
  std::vector<double> mean_count;
  std::vector<double> count_se;
  LineFit fit;  // log E N_j against j log 2
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t runs = 0;
  std::vector<int> dropped;
};

/// Boxes of [1,2] at scales 2^-jmin..2^-jmax whose endpoints are swallowed
/// at different times; slope of log E N against log(1/eps), 95% CI.
DimensionFit estimate_dimension(double kappa, std::size_t runs, int jmin, int jmax, const RunOptions& opt,
                                std::size_t initial_points = 65);

/// Frostman-type measure of one run: mass eps^{-s} (eps/2) on each hit cell
/// midpoint of [1,2].
struct FrostmanMeasure {
  double eps = 0.0;
  double s = 0.0;
  std::vector<double> x;
  std::vector<std::uint8_t> hit;

  static FrostmanMeasure sample(double kappa, double eps, std::uint64_t seed, std::uint64_t run_index,
                                const EngineConfig& cfg = {});
  double mass() const;
  /// sum over hit pairs k != l of m_k m_l |x_k - x_l|^{-alpha}.
  double energy(double alpha) const;
};

/// (2^{1-s} - 1) / (1 - s), the exact mean mass on [1,2].
double frostman_exact_mass(double kappa);

struct FrostmanStats {
  double eps = 0.0;
  double delta = 0.0;
  Estimate mass;    // exact: frostman_exact_mass
  Estimate energy;  // exponent 1 - s - delta; exact NaN
};

FrostmanStats frostman_stats(double kappa, double eps, double delta, std::size_t n, const RunOptions& opt);

struct QEstimate {
  double a = 0.0;
  double b = 0.0;
  std::size_t nodes = 0;
  Estimate q;   // exact 1
  Estimate q2;  // second moment
};

/// ratio: geometric grid ratio of the quadrature (see QStatistic::build).
QEstimate estimate_Q(double kappa, const BoundaryFunction& h, double a, std::size_t n, const RunOptions& opt,
                     double ratio = 1.05);

struct DriftSeries {
  double initial = 0.0;  // value at t = 0
  std::vector<double> times;
  std::vector<Estimate> value;     // mean at each checkpoint; exact = initial
  std::vector<Estimate> increment; // mean of V(t_k) - V(t_{k-1}), k >= 1 (t_{-1} = 0)
};

DriftSeries drift_stopped_M(double kappa, double x, double eps, std::span<const double> times, std::size_t n,
                            const RunOptions& opt);
DriftSeries drift_Z(double kappa, const IntegralObservable& z, std::span<const double> times, std::size_t n,
                    const RunOptions& opt);
DriftSeries drift_pair(double kappa, double x, double y, double eps_x, double eps_y, std::span<const double> times,
                       std::size_t n, const RunOptions& opt);

}  // namespace sle
