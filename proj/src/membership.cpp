#include "slelab/membership.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "slelab/errors.hpp"
#include "slelab/specfun.hpp"

namespace sle {

MembershipGrid::MembershipGrid(std::vector<double> x, std::vector<double> eps)
    : x_(std::move(x)), eps_(std::move(eps)) {
  prepare();
}

MembershipGrid::MembershipGrid(std::vector<double> x, double eps) : x_(std::move(x)) {
  eps_.assign(x_.size(), eps);
  prepare();
}

void MembershipGrid::prepare() {
  if (x_.empty()) throw ParameterError("membership grid is empty");
  if (x_.size() != eps_.size()) throw ParameterError("membership grid needs one eps per point");
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (!(x_[i] > 0.0) || !std::isfinite(x_[i])) throw ParameterError("grid points must be positive");
    if (i > 0 && !(x_[i] > x_[i - 1])) throw ParameterError("grid points must be strictly ascending");
    if (!(eps_[i] > 0.0) || !std::isfinite(eps_[i])) throw ParameterError("eps must be positive");
  }
  log_r_.resize(x_.size());
  for (std::size_t i = 0; i < x_.size(); ++i) log_r_[i] = -std::log(eps_[i]);

  const bool uniform = std::all_of(eps_.begin(), eps_.end(), [&](double e) { return e == eps_[0]; });
  table_.clear();
  if (uniform) return;
  table_.push_back(log_r_);
  for (std::size_t w = 1; 2 * w <= x_.size(); w *= 2) {
    const auto& prev = table_.back();
    std::vector<double> next(x_.size() - 2 * w + 1);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = std::min(prev[i], prev[i + w]);
    table_.push_back(std::move(next));
  }
}

double MembershipGrid::min_log_threshold(std::size_t lo, std::size_t hi) const {
  if (table_.empty()) return log_r_[0];
  const std::size_t len = hi - lo + 1;
  const auto k = static_cast<std::size_t>(std::bit_width(len) - 1);
  return std::min(table_[k][lo], table_[k][hi + 1 - (std::size_t{1} << k)]);
}

namespace {

enum : std::uint8_t { kOpen = 0, kHit = 1, kMiss = 2 };

// Thresholds are kept on q = g'/X itself so a step needs no logarithms until a
// point is near its barrier.
struct Slot {
  std::size_t idx;
  std::uint8_t status = kOpen;
  bool gap_open = false;  // undecided untracked points between this slot and the next
  double hit_q = 0.0;     // 1/eps * exp(-hit_gap)
  double near_q = 0.0;    // below this the barrier does not limit dt
  double miss_q = 0.0;    // miss cutoff for this point
  double gap_miss_q = 0.0;
  double gap_refine_q = 0.0;
};

}  // namespace

MembershipResult run_membership(double kappa, const MembershipGrid& grid, StopRule stop, std::uint64_t seed,
                                std::uint64_t run_index, const EngineConfig& cfg, std::size_t initial_points,
                                std::optional<std::size_t> tilt) {
  cfg.validate();
  if (!(kappa > 0.0 && kappa < 8.0)) throw ParameterError("kappa must lie in (0,8)");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double s = s_kappa(kappa);
  const double log_cut = std::log(cfg.miss_ratio) / s;
  const double log_margin = std::log(cfg.refine_margin);
  const double bar = 3.0 * std::sqrt(kappa);
  const double near_log = bar * std::sqrt(cfg.resolution);
  const std::size_t n = grid.size();
  if (tilt && *tilt >= n) throw ParameterError("tilt index outside the grid");

  const auto make_slot = [&](std::size_t i) {
    Slot sl;
    sl.idx = i;
    const double lr = grid.log_threshold(i);
    sl.hit_q = std::exp(lr - cfg.hit_gap);
    sl.near_q = std::exp(lr - near_log);
    sl.miss_q = tilt == i ? 0.0 : std::exp(log_cut - std::log(grid.x(i)));
    return sl;
  };
  const auto set_gap = [&](Slot& sl, std::size_t j) {
    sl.gap_open = j > sl.idx + 1;
    if (!sl.gap_open) return;
    sl.gap_miss_q = std::exp(log_cut - std::log(grid.x(j - 1)));
    sl.gap_refine_q = std::exp(log_margin + grid.min_log_threshold(sl.idx + 1, j - 1));
  };

  Chain chain(kappa, seed, run_index, true);
  std::vector<Slot> slots;
  {
    const std::size_t m = std::clamp<std::size_t>(initial_points, 2, n);
    std::vector<std::size_t> start;
    for (std::size_t k = 0; k < m; ++k) start.push_back((n == 1) ? 0 : (k * (n - 1)) / (m - 1));
    if (tilt) start.push_back(*tilt);
    std::sort(start.begin(), start.end());
    start.erase(std::unique(start.begin(), start.end()), start.end());
    for (std::size_t i : start) {
      chain.insert(grid.x(i));
      slots.push_back(make_slot(i));
    }
    for (std::size_t p = 0; p + 1 < slots.size(); ++p) set_gap(slots[p], slots[p + 1].idx);
  }

  MembershipResult res;
  res.hit.assign(n, 0);

  for (;;) {
    bool restart = true;
    bool stop_now = false;
    while (restart && !stop_now) {
      restart = false;
      for (std::size_t p = 0; p < slots.size(); ++p) {
        const ChainPoint& cp = chain[p];
        Slot& sl = slots[p];
        if (sl.status == kOpen) {
          const double q = cp.alive ? cp.gprime / cp.gap : 0.0;
          if (q >= sl.hit_q) {
            sl.status = kHit;
            res.any_hit = true;
            if (stop == StopRule::first_hit) {
              stop_now = true;
              break;
            }
          } else if (q < sl.miss_q) {
            sl.status = kMiss;
          }
        }
        if (!sl.gap_open) continue;
        const double bound = cp.alive ? chain[p + 1].gprime / cp.gap : inf;
        if (bound < sl.gap_miss_q) {
          sl.gap_open = false;
        } else if (bound >= sl.gap_refine_q) {
          const std::size_t i = sl.idx;
          const std::size_t j = slots[p + 1].idx;
          const std::size_t mid = i + (j - i) / 2;
          set_gap(sl, mid);
          Slot ms = make_slot(mid);
          set_gap(ms, j);
          const std::size_t pos = chain.insert(grid.x(mid));
          slots.insert(slots.begin() + static_cast<std::ptrdiff_t>(pos), ms);
          restart = true;
          break;
        }
      }
    }
    if (stop_now) break;

    double dt = inf;
    double drift = 0.0;
    for (std::size_t p = 0; p < slots.size(); ++p) {
      const ChainPoint& cp = chain[p];
      if (!cp.alive) continue;
      const Slot& sl = slots[p];
      if (sl.status != kOpen && !sl.gap_open) continue;
      double ds = cfg.resolution;
      if (sl.status == kOpen) {
        const double q = cp.gprime / cp.gap;
        if (q > sl.near_q) {
          const double g = (std::log(sl.hit_q / q) + cfg.hit_gap) / bar;
          ds = std::min(ds, g * g);
        }
      }
      dt = std::min(dt, cp.gap * cp.gap * ds);
      if (tilt == sl.idx && sl.status == kOpen) drift = (8.0 - kappa) / cp.gap;
    }
    if (dt == inf) break;
    if (chain.time() >= cfg.horizon) {
      res.horizon_reached = true;
      break;
    }
    dt = std::min(dt, cfg.horizon - chain.time());
    if (chain.step() >= cfg.max_steps) throw SimulationError("membership run exceeded max_steps", chain.step());
    chain.advance(dt, drift);
  }

  for (const auto& sl : slots) {
    if (sl.status == kHit) res.hit[sl.idx] = 1;
  }
  res.steps = chain.step();
  res.tracked = slots.size();
  res.time = chain.time();
  return res;
}

}  // namespace sle
