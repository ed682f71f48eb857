#include "slelab/mc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "slelab/errors.hpp"
#include "slelab/membership.hpp"
#include "slelab/rng.hpp"
#include "slelab/specfun.hpp"
#include "slelab/swallow.hpp"

namespace sle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<EstimatorAccumulator> fresh(std::size_t stats, std::uint64_t seed) {
  return std::vector<EstimatorAccumulator>(stats, EstimatorAccumulator(seed));
}

void check_plan(std::size_t n, std::size_t stats) {
  if (n == 0) throw ParameterError("at least one trial is required");
  if (stats == 0) throw ParameterError("at least one statistic is required");
}

}  // namespace

std::vector<EstimatorAccumulator> run_trials(std::size_t n, std::size_t stats, const TrialFn& trial,
                                             const RunOptions& opt) {
  check_plan(n, stats);
  const std::size_t chunk = std::max<std::size_t>(opt.chunk, 1);
  const auto chunks = static_cast<std::int64_t>((n + chunk - 1) / chunk);
  std::vector<std::vector<EstimatorAccumulator>> parts(static_cast<std::size_t>(chunks));
  std::exception_ptr error;

#ifdef _OPENMP
  const int threads = opt.threads > 0 ? opt.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
#endif
  for (std::int64_t c = 0; c < chunks; ++c) {
    try {
      const std::uint64_t lo = opt.first_run + static_cast<std::uint64_t>(c) * chunk;
      const std::uint64_t hi = std::min<std::uint64_t>(lo + chunk, opt.first_run + n);
      auto acc = fresh(stats, opt.seed);
      std::vector<double> out(stats);
      for (std::uint64_t run = lo; run < hi; ++run) {
        std::fill(out.begin(), out.end(), 0.0);
        trial(run, out);
        for (std::size_t k = 0; k < stats; ++k) acc[k].add(out[k]);
      }
      for (auto& a : acc) a.add_runs(lo, hi);
      parts[static_cast<std::size_t>(c)] = std::move(acc);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical(slelab_trial_error)
#endif
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  auto total = fresh(stats, opt.seed);
  for (const auto& part : parts) {
    for (std::size_t k = 0; k < stats; ++k) total[k].merge(part[k]);
  }
  return total;
}

std::vector<EstimatorAccumulator> run_trials_serial(std::size_t n, std::size_t stats, const TrialFn& trial,
                                                    const RunOptions& opt) {
  check_plan(n, stats);
  auto acc = fresh(stats, opt.seed);
  std::vector<double> out(stats);
  for (std::uint64_t run = opt.first_run; run < opt.first_run + n; ++run) {
    std::fill(out.begin(), out.end(), 0.0);
    trial(run, out);
    for (std::size_t k = 0; k < stats; ++k) acc[k].add(out[k]);
  }
  for (auto& a : acc) a.add_runs(opt.first_run, opt.first_run + n);
  return acc;
}

Estimate Estimate::from(const EstimatorAccumulator& acc, double exact) {
  return {acc.mean(), acc.std_error(), exact, acc.n()};
}

double Estimate::binomial_z() const {
  const double se0 = std::sqrt(std::max(0.0, exact * (1.0 - exact)) / static_cast<double>(n));
  if (se0 > 0.0) return (estimate - exact) / se0;
  return estimate == exact ? 0.0 : std::numeric_limits<double>::infinity();
}

double Estimate::z() const {
  if (se > 0.0) return (estimate - exact) / se;
  return binomial_z();
}

Estimate estimate_point_prob(double kappa, double x, double eps, std::size_t n, const RunOptions& opt) {
  const double exact = exact_point_prob(x, eps, kappa);
  const MembershipGrid grid({x}, eps);
  const auto acc = run_trials(
      n, 1,
      [&](std::uint64_t run, std::span<double> out) {
        out[0] = run_membership(kappa, grid, StopRule::first_hit, opt.seed, run, opt.engine).any_hit ? 1.0 : 0.0;
      },
      opt);
  return Estimate::from(acc[0], exact);
}

Estimate estimate_pair_prob(double kappa, double x, double y, double eps_x, double eps_y, std::size_t n,
                            const RunOptions& opt) {
  const double marginals = exact_point_prob(x, eps_x, kappa) * exact_point_prob(y, eps_y, kappa);
  const auto acc = run_trials(
      n, 1,
      [&](std::uint64_t run, std::span<double> out) {
        const auto [hx, hy] = run_pair_trial(kappa, x, y, eps_x, eps_y, opt.seed, run, opt.engine);
        out[0] = (hx && hy) ? 1.0 : 0.0;
      },
      opt);
  return Estimate::from(acc[0], marginals);
}

Estimate estimate_interval_hit(double kappa, double x, double eps, std::size_t n, const RunOptions& opt) {
  const double exact = exact_interval_hit_prob(x, eps, kappa);
  const std::vector<double> grid{x, x + eps};
  const auto acc = run_trials(
      n, 1,
      [&](std::uint64_t run, std::span<double> out) {
        const auto order = resolve_swallow_order(kappa, grid, opt.seed, run, opt.engine);
        out[0] = order.event[0] != order.event[1] ? 1.0 : 0.0;
      },
      opt);
  return Estimate::from(acc[0], exact);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size())) throw ParameterError("fit needs matching x and y");
  const std::size_t m = x.size();
  if (m < 2) throw NumericalError("fit needs at least two points");
  const auto wt = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
  double sw = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(wt(i) > 0.0)) throw ParameterError("fit weights must be positive");
    sw += wt(i);
    mx += wt(i) * x[i];
    my += wt(i) * y[i];
  }
  mx /= sw;
  my /= sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += wt(i) * (x[i] - mx) * (x[i] - mx);
    sxy += wt(i) * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw NumericalError("fit needs distinct x values");
  LineFit f;
  f.points = m;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += wt(i) * r * r;
  }
  if (m > 2) f.residual_sd = std::sqrt(rss / static_cast<double>(m - 2));
  if (!w.empty()) {
    f.slope_se = 1.0 / std::sqrt(sxx);
  } else if (m > 2) {
    f.slope_se = f.residual_sd / std::sqrt(sxx);
  }
  return f;
}

StripFit estimate_strip_hit(double kappa, std::span<const double> eps_grid, std::size_t n, const RunOptions& opt,
                            StripMethod method) {
  if (!(kappa > 0.0 && kappa <= 4.0)) throw DomainError("strip estimate needs kappa in (0,4]");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0 && eps_grid[i] < 1.0)) throw ParameterError("strip eps must lie in (0,1)");
    if (i > 0 && !(eps_grid[i] < eps_grid[i - 1])) throw ParameterError("eps grid must be strictly decreasing");
  }
  StripFit out;
  out.expected = s_kappa(kappa) - 1.0;
  std::vector<double> lx;
  std::vector<double> ly;
  std::vector<double> lw;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double eps : eps_grid) {
    const auto cells = static_cast<std::size_t>(std::ceil(2.0 / eps));
    std::vector<double> xs(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) xs[k] = std::min(2.0, 1.0 + 0.5 * eps * static_cast<double>(k));
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    const MembershipGrid grid(xs, eps);
    std::vector<double> cdf(xs.size());
    double total = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) cdf[k] = total += exact_point_prob(xs[k], eps, kappa);
    const auto trial = [&](std::uint64_t run, std::span<double> o) {
      if (method == StripMethod::direct) {
        o[0] = run_membership(kappa, grid, StopRule::first_hit, opt.seed, run, opt.engine).any_hit ? 1.0 : 0.0;
        return;
      }
      auto pick = make_stream(opt.seed ^ 0x9e3779b97f4a7c15ULL, run);
      const double u = std::uniform_real_distribution<double>(0.0, total)(pick);
      const auto target = static_cast<std::size_t>(
          std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                   static_cast<std::ptrdiff_t>(xs.size()) - 1));
      const auto m = run_membership(kappa, grid, StopRule::all_decided, opt.seed, run, opt.engine, 17, target);
      const auto hits = static_cast<double>(std::count(m.hit.begin(), m.hit.end(), std::uint8_t{1}));
      if (m.hit[target] == 0) throw NumericalError("conditioned run ended without hitting its target");
      o[0] = total / hits;
    };
    const auto acc = run_trials(n, 1, trial, opt);
    const Estimate e = Estimate::from(acc[0], kNaN);
    if (e.estimate == 0.0) {
      out.dropped.push_back(eps);
      continue;
    }
    out.rows.push_back({eps, e});
    lx.push_back(std::log(eps));
    ly.push_back(std::log(e.estimate));
    if (method == StripMethod::direct) {
      // delta method: var(log p) = (1 - p) / (n p)
      lw.push_back(static_cast<double>(e.n) * e.estimate / std::max(1.0 - e.estimate, 1.0 / static_cast<double>(e.n)));
    } else {
      lw.push_back(e.se > 0.0 ? std::pow(e.estimate / e.se, 2) : 1e12);
    }
    const double flat = e.estimate * std::log(1.0 / eps);
    lo = std::min(lo, flat);
    hi = std::max(hi, flat);
  }
  if (out.rows.size() < 2) throw NumericalError("fewer than two strip scales with hits");
  out.fit = fit_line(lx, ly, lw);
  out.band = hi / lo;
  return out;
}

GraphHit estimate_graph_hit(double kappa, const BoundaryFunction& h, double x_max, std::size_t n,
                            const RunOptions& opt) {
  if (!(kappa > 0.0 && kappa <= 4.0)) throw DomainError("graph estimate needs kappa in (0,4]");
  if (!(x_max > h.r)) throw ParameterError("graph estimate needs x_max > r");
  std::vector<double> xs;
  std::vector<double> eps;
  for (double x = h.r; x <= x_max;) {
    const double hx = h(x);
    if (!(hx > 0.0) || !std::isfinite(hx)) throw DomainError("h must be positive on [r, x_max]");
    xs.push_back(x);
    eps.push_back(hx);
    x += 0.5 * hx;
  }
  const MembershipGrid grid(xs, eps);
  const auto acc = run_trials(
      n, 1,
      [&](std::uint64_t run, std::span<double> o) {
        o[0] = run_membership(kappa, grid, StopRule::first_hit, opt.seed, run, opt.engine).any_hit ? 1.0 : 0.0;
      },
      opt);
  GraphHit out;
  out.grid_points = xs.size();
  out.integral = criterion_integral(h, kappa, h.r, x_max);
  out.p = Estimate::from(acc[0], std::min(1.0, out.integral));
  out.ratio = out.p.estimate / std::min(1.0, out.integral);
  return out;
}

DimensionFit estimate_dimension(double kappa, std::size_t runs, int jmin, int jmax, const RunOptions& opt,
                                std::size_t initial_points) {
  if (!(kappa > 4.0 && kappa < 8.0)) throw DomainError("dimension estimate needs kappa in (4,8)");
  if (jmin < 0 || jmax > 20 || jmax - jmin < 2) throw ParameterError("dimension needs 0 <= jmin, jmin+2 <= jmax <= 20");
  const std::size_t cells = std::size_t{1} << jmax;
  std::vector<double> grid(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) grid[i] = 1.0 + static_cast<double>(i) / static_cast<double>(cells);
  const auto levels = static_cast<std::size_t>(jmax - jmin + 1);

  const auto acc = run_trials(
      runs, levels,
      [&](std::uint64_t run, std::span<double> o) {
        const auto order = resolve_swallow_order(kappa, grid, opt.seed, run, opt.engine, initial_points);
        for (std::size_t l = 0; l < levels; ++l) {
          const std::size_t w = cells >> (jmin + static_cast<int>(l));
          double count = 0.0;
          for (std::size_t i = 0; i + w <= cells; i += w) count += order.event[i] != order.event[i + w] ? 1.0 : 0.0;
          o[l] = count;
        }
      },
      opt);

  DimensionFit out;
  out.runs = runs;
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t l = 0; l < levels; ++l) {
    const int j = jmin + static_cast<int>(l);
    const double m = acc[l].mean();
    if (m <= 0.0) {
      out.dropped.push_back(j);
      continue;
    }
    out.levels.push_back(j);
    out.mean_count.push_back(m);
    out.count_se.push_back(acc[l].std_error());
    lx.push_back(static_cast<double>(j) * std::numbers::ln2);
    ly.push_back(std::log(m));
  }
  if (out.levels.size() < 3) throw NumericalError("fewer than three occupied scales for the dimension fit");
  out.fit = fit_line(lx, ly);
  const boost::math::students_t dist(static_cast<double>(out.levels.size() - 2));
  const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
  out.ci_lo = out.fit.slope - t * out.fit.slope_se;
  out.ci_hi = out.fit.slope + t * out.fit.slope_se;
  return out;
}

FrostmanMeasure FrostmanMeasure::sample(double kappa, double eps, std::uint64_t seed, std::uint64_t run_index,
                                        const EngineConfig& cfg) {
  if (!(eps > 0.0 && eps < 1.0)) throw ParameterError("Frostman eps must lie in (0,1)");
  FrostmanMeasure m;
  m.eps = eps;
  m.s = s_kappa(kappa);
  const auto cells = static_cast<std::size_t>(std::llround(2.0 / eps));
  const double w = 1.0 / static_cast<double>(cells);
  m.x.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) m.x[k] = 1.0 + (static_cast<double>(k) + 0.5) * w;
  const MembershipGrid grid(m.x, eps);
  m.hit = run_membership(kappa, grid, StopRule::all_decided, seed, run_index, cfg).hit;
  return m;
}

double FrostmanMeasure::mass() const {
  const double w = 1.0 / static_cast<double>(x.size());
  double count = 0.0;
  for (auto h : hit) count += h;
  return std::pow(eps, -s) * w * count;
}

double FrostmanMeasure::energy(double alpha) const {
  const double mk = std::pow(eps, -s) / static_cast<double>(x.size());
  std::vector<double> at;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (hit[k]) at.push_back(x[k]);
  }
  double e = 0.0;
  for (std::size_t k = 0; k < at.size(); ++k) {
    for (std::size_t l = k + 1; l < at.size(); ++l) e += 2.0 * std::pow(at[l] - at[k], -alpha);
  }
  return mk * mk * e;
}

double frostman_exact_mass(double kappa) {
  const double s = s_kappa(kappa);
  return (std::pow(2.0, 1.0 - s) - 1.0) / (1.0 - s);
}

FrostmanStats frostman_stats(double kappa, double eps, double delta, std::size_t n, const RunOptions& opt) {
  if (!(kappa > 4.0 && kappa < 8.0)) throw DomainError("Frostman statistics need kappa in (4,8)");
  const double s = s_kappa(kappa);
  if (!(delta > 0.0 && delta < 1.0 - s)) throw ParameterError("delta must lie in (0, 1 - s)");
  const double alpha = 1.0 - s - delta;
  const auto acc = run_trials(
      n, 2,
      [&](std::uint64_t run, std::span<double> o) {
        const auto m = FrostmanMeasure::sample(kappa, eps, opt.seed, run, opt.engine);
        o[0] = m.mass();
        o[1] = m.energy(alpha);
      },
      opt);
  return {eps, delta, Estimate::from(acc[0], frostman_exact_mass(kappa)), Estimate::from(acc[1], kNaN)};
}

QEstimate estimate_Q(double kappa, const BoundaryFunction& h, double a, std::size_t n, const RunOptions& opt,
                     double ratio) {
  const QStatistic q = QStatistic::build(h, kappa, a, 1e12, ratio);
  const auto acc = run_trials(
      n, 2,
      [&](std::uint64_t run, std::span<double> o) {
        const double v = compute_Q(q, opt.seed, run, opt.engine);
        o[0] = v;
        o[1] = v * v;
      },
      opt);
  return {q.a, q.b, q.x.size(), Estimate::from(acc[0], 1.0), Estimate::from(acc[1], kNaN)};
}

namespace {

DriftSeries drift(double initial, std::span<const double> times, std::size_t n, const RunOptions& opt,
                  const std::function<std::vector<double>(std::uint64_t)>& path) {
  const std::size_t k = times.size();
  if (k == 0) throw ParameterError("drift needs at least one checkpoint");
  const auto acc = run_trials(
      n, 2 * k,
      [&](std::uint64_t run, std::span<double> o) {
        const auto v = path(run);
        double prev = initial;
        for (std::size_t i = 0; i < k; ++i) {
          o[i] = v[i];
          o[k + i] = v[i] - prev;
          prev = v[i];
        }
      },
      opt);
  DriftSeries out;
  out.initial = initial;
  out.times.assign(times.begin(), times.end());
  for (std::size_t i = 0; i < k; ++i) {
    out.value.push_back(Estimate::from(acc[i], initial));
    out.increment.push_back(Estimate::from(acc[k + i], 0.0));
  }
  return out;
}

}  // namespace

DriftSeries drift_stopped_M(double kappa, double x, double eps, std::span<const double> times, std::size_t n,
                            const RunOptions& opt) {
  return drift(std::pow(x, -s_kappa(kappa)), times, n, opt, [&](std::uint64_t run) {
    return stopped_M_checkpoints(kappa, x, eps, times, opt.seed, run, opt.engine);
  });
}

DriftSeries drift_Z(double kappa, const IntegralObservable& z, std::span<const double> times, std::size_t n,
                    const RunOptions& opt) {
  return drift(z.initial(kappa), times, n, opt,
               [&](std::uint64_t run) { return Z_checkpoints(kappa, z, times, opt.seed, run, opt.engine); });
}

DriftSeries drift_pair(double kappa, double x, double y, double eps_x, double eps_y, std::span<const double> times,
                       std::size_t n, const RunOptions& opt) {
  const double s = s_kappa(kappa);
  const double v0 = u_of_z(x / y, kappa) * std::pow(x, -s) * std::pow(y, -s);
  return drift(v0, times, n, opt, [&](std::uint64_t run) {
    return pair_V_checkpoints(kappa, x, y, eps_x, eps_y, times, opt.seed, run, opt.engine);
  });
}

}  // namespace sle
