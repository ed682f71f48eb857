#include "slelab/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slelab/errors.hpp"

namespace sle {

void EngineConfig::validate() const {
  if (!(resolution > 0.0 && resolution <= 0.1)) throw ParameterError("resolution must lie in (0, 0.1]");
  if (!(hit_gap > 0.0 && hit_gap < 1.0)) throw ParameterError("hit_gap must lie in (0,1)");
  if (!(miss_ratio > 0.0 && miss_ratio < 1.0)) throw ParameterError("miss_ratio must lie in (0,1)");
  if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");
  if (!(order_tol > 0.0 && order_tol < 0.5)) throw ParameterError("order_tol must lie in (0, 0.5)");
  if (!(refine_margin > 0.0 && refine_margin < 1.0)) throw ParameterError("refine_margin must lie in (0,1)");
  if (max_steps == 0) throw ParameterError("max_steps must be positive");
}

Chain::Chain(double kappa, std::uint64_t seed, std::uint64_t run_index, bool keep_history)
    : kappa_(kappa),
      sqrt_kappa_(std::sqrt(kappa)),
      seed_(seed),
      run_index_(run_index),
      keep_history_(keep_history),
      rng_(make_stream(seed, run_index)) {
  if (!(kappa > 0.0 && kappa < 8.0)) throw ParameterError("kappa must lie in (0,8)");
  auto& pool = history_pool();
  if (keep_history_ && !pool.empty()) {
    history_ = std::move(pool.back());
    pool.pop_back();
  }
}

Chain::~Chain() {
  if (history_.capacity() == 0) return;
  history_.clear();
  auto& pool = history_pool();
  if (pool.size() < 4) pool.push_back(std::move(history_));
}

std::vector<std::vector<Chain::Step>>& Chain::history_pool() {
  thread_local std::vector<std::vector<Step>> pool;
  return pool;
}

bool Chain::apply(ChainPoint& p, double dt, double dw) {
  const double x = p.gap;
  const double x1 = std::sqrt(x * x + 2.0 * dt);
  const double x2 = x1 - dw;
  if (!(x2 > 0.0)) return false;
  const double x3 = std::sqrt(x2 * x2 + 2.0 * dt);
  p.gprime *= (x / x1) * (x2 / x3);
  p.gap = x3;
  return true;
}

std::size_t Chain::insert(double x0) {
  if (!(x0 > 0.0)) throw ParameterError("chain points need x0 > 0");
  auto it = std::lower_bound(points_.begin(), points_.end(), x0,
                             [](const ChainPoint& p, double v) { return p.x0 < v; });
  if (it != points_.end() && it->x0 == x0) {
    throw ParameterError("point " + std::to_string(x0) + " already tracked");
  }
  if (steps_ > 0 && !keep_history_) throw StateError("insert after start needs history");

  const auto pos = static_cast<std::size_t>(it - points_.begin());
  ChainPoint p;
  p.x0 = x0;
  p.gap = x0;
  for (std::size_t k = 0; k < history_.size(); ++k) {
    if (!apply(p, history_[k].dt, history_[k].dw)) {
      p.alive = false;
      p.swallow_step = static_cast<std::int64_t>(k + 1);
      break;
    }
  }
  points_.insert(points_.begin() + static_cast<std::ptrdiff_t>(pos), p);
  return pos;
}

void Chain::advance(double dt, double drift) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw SimulationError("non-positive or non-finite step " + std::to_string(dt), steps_);
  }
  const double dw = sqrt_kappa_ * std::sqrt(dt) * normal_(rng_) + drift * dt;
  ++steps_;
  for (auto& p : points_) {
    if (p.alive && !apply(p, dt, dw)) {
      p.alive = false;
      p.swallow_step = static_cast<std::int64_t>(steps_);
    }
  }
  time_ += dt;
  drive_ += dw;
  if (keep_history_) history_.push_back({dt, dw});
}

void Chain::mark_swallowed(std::size_t i) {
  auto& p = points_.at(i);
  if (!p.alive) return;
  p.alive = false;
  p.swallow_step = static_cast<std::int64_t>(steps_);
}

DrivingPath Chain::path() const {
  if (!keep_history_) throw StateError("chain was built without history");
  DrivingPath path;
  path.kappa = kappa_;
  path.seed = seed_;
  path.run_index = run_index_;
  path.times.reserve(history_.size() + 2);
  path.values.reserve(history_.size() + 2);
  path.times.push_back(0.0);
  path.values.push_back(0.0);
  double t = 0.0;
  double w = 0.0;
  for (const auto& s : history_) {
    path.times.push_back(t + 0.5 * s.dt);
    w += s.dw;
    path.values.push_back(w);
    t += s.dt;
  }
  if (!history_.empty()) {
    path.times.push_back(t);
    path.values.push_back(w);
  }
  return path;
}

}  // namespace sle
