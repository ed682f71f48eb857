#include "slelab/swallow.hpp"

#include <algorithm>
#include <cmath>

#include "slelab/errors.hpp"
#include "slelab/specfun.hpp"

namespace sle {

OrderThresholds order_thresholds(double kappa, double tol) {
  if (!(kappa > 4.0 && kappa < 8.0)) throw DomainError("swallowing order needs kappa in (4,8)");
  if (!(tol > 0.0 && tol < 0.5)) throw ParameterError("order tolerance must lie in (0, 0.5)");
  const double a = 1.0 - 4.0 / kappa;
  const double b = 8.0 / kappa - 1.0;
  return {incomplete_beta_inv(tol, a, b), incomplete_beta_inv(tol, b, a)};
}

SwallowOrder resolve_swallow_order(double kappa, const std::vector<double>& grid, std::uint64_t seed,
                                   std::uint64_t run_index, const EngineConfig& cfg,
                                   std::size_t initial_points) {
  cfg.validate();
  const OrderThresholds th = order_thresholds(kappa, cfg.order_tol);
  const std::size_t n = grid.size();
  if (n == 0) throw ParameterError("swallow grid is empty");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw ParameterError("swallow grid must be positive and strictly ascending");
    }
  }

  SwallowOrder out;
  out.event.assign(n, -1);
  Chain chain(kappa, seed, run_index, true);
  std::vector<std::size_t> gi;       // grid index of each chain point
  std::vector<std::uint8_t> settled;  // event known or pending in `group`
  std::vector<std::size_t> group;     // grid indices going with the current leftmost point
  std::int32_t next_id = 0;

  const auto track = [&](std::size_t g) {
    const std::size_t pos = chain.insert(grid[g]);
    gi.insert(gi.begin() + static_cast<std::ptrdiff_t>(pos), g);
    settled.insert(settled.begin() + static_cast<std::ptrdiff_t>(pos), 0);
    return pos;
  };
  const auto close_group = [&] {
    for (std::size_t g : group) out.event[g] = next_id;
    ++next_id;
    group.clear();
  };
  const auto first_open = [&](std::size_t from) {
    while (from < chain.size() && settled[from]) ++from;
    return from;
  };

  {
    const std::size_t m = std::clamp<std::size_t>(initial_points, 2, n);
    std::size_t last = n;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t g = (n == 1) ? 0 : (k * (n - 1)) / (m - 1);
      if (g != last) track(g);
      last = g;
    }
  }

  for (;;) {
    // Points the chain itself swallowed during the last step.
    std::size_t a = first_open(0);
    if (a < chain.size() && !chain[a].alive) {
      std::size_t s = a;
      while (s < chain.size() && !settled[s] && !chain[s].alive) {
        group.push_back(gi[s]);
        settled[s] = 1;
        ++s;
      }
      --s;
      std::size_t nxt = first_open(s + 1);
      while (nxt < chain.size() && gi[nxt] > gi[s] + 1) {
        const std::size_t pos = track(gi[s] + (gi[nxt] - gi[s]) / 2);
        ++nxt;
        if (!chain[pos].alive) {
          group.push_back(gi[pos]);
          settled[pos] = 1;
          s = pos;
        } else {
          nxt = pos;
        }
      }
      close_group();
      a = first_open(0);
    }

    // Leftmost-pair decisions.
    bool done = false;
    for (;;) {
      a = first_open(0);
      if (a == chain.size()) {
        done = true;
        break;
      }
      const std::size_t b = first_open(a + 1);
      if (b == chain.size()) {
        group.push_back(gi[a]);
        settled[a] = 1;
        chain.mark_swallowed(a);
        close_group();
        done = true;
        break;
      }
      const double r = chain[a].gap / chain[b].gap;
      if (r <= th.zeta) {
        if (gi[b] > gi[a] + 1) {
          track(gi[a] + (gi[b] - gi[a]) / 2);
          continue;
        }
        group.push_back(gi[a]);
        settled[a] = 1;
        chain.mark_swallowed(a);
        close_group();
      } else if (1.0 - r <= th.del) {
        group.push_back(gi[a]);
        settled[a] = 1;
        chain.mark_swallowed(a);
      } else {
        break;
      }
    }
    if (done) break;

    if (chain.time() >= cfg.horizon) {
      out.horizon_reached = true;
      for (std::size_t p = first_open(0); p < chain.size(); p = first_open(p + 1)) {
        group.push_back(gi[p]);
        settled[p] = 1;
        close_group();
      }
      break;
    }
    if (chain.step() >= cfg.max_steps) throw SimulationError("swallow order exceeded max_steps", chain.step());
    const double x = chain[a].gap;
    chain.advance(std::min(cfg.resolution * x * x, cfg.horizon - chain.time()));
  }

  // Untracked points lie between tracked neighbours that share an event.
  for (std::size_t p = 0; p + 1 < chain.size(); ++p) {
    const std::int32_t left = out.event[gi[p]];
    if (gi[p + 1] > gi[p] + 1 && !out.horizon_reached && left != out.event[gi[p + 1]]) {
      throw NumericalError("unresolved grid points between different swallowing events");
    }
    for (std::size_t g = gi[p] + 1; g < gi[p + 1]; ++g) out.event[g] = left;
  }
  out.events = static_cast<std::size_t>(next_id);
  out.steps = chain.step();
  out.tracked = chain.size();
  out.time = chain.time();
  return out;
}

}  // namespace sle
