#include "slelab/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <string>

#include "slelab/errors.hpp"
#include "slelab/rng.hpp"

namespace sle {

void SimParams::validate() const {
  if (!(kappa > 0.0 && kappa < 8.0)) {
    throw ParameterError("kappa must lie in (0,8), got " + std::to_string(kappa));
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw ParameterError("dt must be positive, got " + std::to_string(dt));
  }
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) {
    throw ParameterError("t_max must be finite and non-negative, got " + std::to_string(t_max));
  }
  if (t_max / dt > 1e9) {
    throw ParameterError("t_max/dt exceeds 1e9 steps");
  }
}

std::size_t SimParams::step_count() const {
  if (t_max == 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(t_max / dt - 1e-12));
}

DrivingPath generate_driving(const SimParams& params) {
  params.validate();
  const std::size_t n = params.step_count();
  DrivingPath path;
  path.kappa = params.kappa;
  path.seed = params.seed;
  path.run_index = params.run_index;
  path.times.resize(n + 1);
  path.values.resize(n + 1);
  path.times[0] = 0.0;
  path.values[0] = 0.0;

  Engine rng = make_stream(params.seed, params.run_index);
  std::normal_distribution<double> normal;
  const double sqrt_kappa = std::sqrt(params.kappa);
  for (std::size_t k = 1; k <= n; ++k) {
    path.times[k] = (k == n) ? params.t_max : static_cast<double>(k) * params.dt;
    const double h = path.times[k] - path.times[k - 1];
    path.values[k] = path.values[k - 1] + sqrt_kappa * std::sqrt(h) * normal(rng);
  }
  return path;
}

DrivingPath zero_driving(double dt, double t_max) {
  SimParams p;
  p.kappa = 1.0;
  p.dt = dt;
  p.t_max = t_max;
  p.validate();
  const std::size_t n = p.step_count();
  DrivingPath path;
  path.kappa = 0.0;
  path.times.resize(n + 1);
  path.values.assign(n + 1, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    path.times[k] = (k == n) ? t_max : static_cast<double>(k) * dt;
  }
  return path;
}

TrackedPoint TrackedPoint::start(double x0) {
  TrackedPoint p;
  p.x0 = x0;
  p.g = x0;
  p.gprime = 1.0;
  return p;
}

double swallow_tolerance(double dt) { return 4.0 * std::sqrt(dt); }

TrackedPoint step_point(const TrackedPoint& point, double w_before, double w_after, double dt,
                        std::int64_t step_index) {
  if (!point.alive()) throw StateError("step_point called on a non-alive point");
  const double z = point.g - w_before;
  if (!(z > 0.0)) throw StateError("step_point requires g > w_before");
  if (!(dt > 0.0)) throw ParameterError("step_point requires dt > 0");

  TrackedPoint next = point;
  const double root = std::sqrt(z * z + 4.0 * dt);
  next.g = w_before + root;
  next.gprime = point.gprime * (z / root);
  if (next.g - w_after <= swallow_tolerance(dt)) {
    next.status = PointStatus::swallowed;
    next.status_step = step_index;
  }
  return next;
}

namespace {

bool all_settled(std::span<const TrackedPoint> points, std::span<StepObserver* const> observers) {
  for (const auto& p : points) {
    if (p.alive()) return false;
  }
  for (const auto* o : observers) {
    if (!o->complete()) return false;
  }
  return true;
}

}  // namespace

EvolveResult evolve_on(const DrivingPath& path, std::vector<TrackedPoint> points,
                       std::span<StepObserver* const> observers) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!p.alive() || !(p.x0 > 0.0) || p.g != p.x0 || p.gprime != 1.0) {
      throw ParameterError("evolve requires alive points at their initial state with x0 > 0");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (points[j].x0 == p.x0) throw ParameterError("evolve requires distinct x0");
    }
  }

  EvolveResult result;
  result.path = path;
  const std::size_t n = path.steps();
  std::size_t k = 0;
  while (k < n && !all_settled(points, observers)) {
    ++k;
    const double dt = path.times[k] - path.times[k - 1];
    const double w_before = path.values[k - 1];
    const double w_after = path.values[k];
    for (auto& p : points) {
      if (p.alive()) p = step_point(p, w_before, w_after, dt, static_cast<std::int64_t>(k));
    }
    StepView view{k, path.times[k], w_after, points};
    for (auto* o : observers) {
      try {
        o->observe(view);
      } catch (const std::exception& e) {
        throw SimulationError(std::string("observer failed: ") + e.what(), k);
      }
    }
  }
  result.steps_run = k;
  result.points = std::move(points);
  return result;
}

EvolveResult evolve(const SimParams& params, std::vector<TrackedPoint> points,
                    std::span<StepObserver* const> observers) {
  if (points.empty() && observers.empty()) {
    params.validate();
    EvolveResult r;
    r.path.kappa = params.kappa;
    r.path.seed = params.seed;
    r.path.run_index = params.run_index;
    r.path.times = {0.0};
    r.path.values = {0.0};
    return r;
  }
  return evolve_on(generate_driving(params), std::move(points), observers);
}

std::complex<double> inverse_slit(std::complex<double> z, double w, double dt) {
  const std::complex<double> u = z - w;
  std::complex<double> root = std::sqrt(u * u - 4.0 * dt);
  if (root.imag() < 0.0) root = -root;
  if (root.imag() == 0.0 && u.real() < 0.0) root = -root;
  return w + root;
}

std::vector<TraceSample> trace_points(const DrivingPath& path, std::span<const std::size_t> steps) {
  std::vector<TraceSample> out;
  out.reserve(steps.size());
  const std::size_t n = path.steps();
  for (const std::size_t k : steps) {
    if (k > n) throw RangeError("trace step " + std::to_string(k) + " beyond path length");
    TraceSample sample;
    sample.step = k;
    if (k == 0) {
      out.push_back(sample);
      continue;
    }
    const double last_dt = path.times[k] - path.times[k - 1];
    std::complex<double> z(path.values[k - 1], 2.0 * std::sqrt(last_dt));
    std::size_t depth = 1;
    for (std::size_t j = k - 1; j >= 1; --j) {
      z = inverse_slit(z, path.values[j - 1], path.times[j] - path.times[j - 1]);
      ++depth;
    }
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || z.imag() < -1e-12) {
      throw ReconstructionError("trace reconstruction left the closed upper half-plane", k);
    }
    if (z.imag() < 0.0) z.imag(0.0);
    sample.point = z;
    sample.depth = depth;
    out.push_back(sample);
  }
  return out;
}

}  // namespace sle
