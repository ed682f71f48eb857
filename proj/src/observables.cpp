#include "slelab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <tuple>

#include "slelab/errors.hpp"
#include "slelab/membership.hpp"
#include "slelab/specfun.hpp"
#include "slelab/swallow.hpp"

namespace sle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFreeze = 1e-6;

void require_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 8.0)) throw ParameterError("kappa must lie in (0,8)");
}

}  // namespace

double compute_M(const TrackedPoint& point, double w, double s) {
  if (!point.alive()) throw StateError("M is undefined for a point that is no longer alive");
  const double gap = point.g - w;
  if (!(gap > 0.0) || !(point.gprime > 0.0)) throw DomainError("M needs g > w and g' > 0");
  return std::pow(point.gprime / gap, s);
}

MartingaleTracker::MartingaleTracker(double x, double epsilon, double kappa, double cutoff_ratio)
    : x_(x), epsilon_(epsilon), s_(s_kappa(kappa)) {
  require_kappa(kappa);
  if (!(x > 0.0) || !(epsilon > 0.0)) throw ParameterError("tracker needs x > 0 and eps > 0");
  threshold_ = std::pow(epsilon, -s_);
  m_ = std::pow(x, -s_);
  floor_ = cutoff_ratio * m_;
  if (m_ >= threshold_) {
    outcome_ = Outcome::hit;
    tau_ = 0;
  }
}

void MartingaleTracker::update(const TrackedPoint& point, double w, std::size_t step) {
  if (outcome_ != Outcome::running) return;
  if (!point.alive()) {
    m_ = 0.0;
    outcome_ = Outcome::swallowed_first;
    return;
  }
  m_ = compute_M(point, w, s_);
  if (m_ >= threshold_) {
    outcome_ = Outcome::hit;
    tau_ = step;
  } else if (m_ < floor_) {
    outcome_ = Outcome::cutoff;
  }
}

void MartingaleTracker::finish() {
  if (outcome_ == Outcome::running) outcome_ = Outcome::horizon;
}

PairTracker::PairTracker(double x, double y, double eps_x, double eps_y, double kappa_)
    : tx(x, eps_x, kappa_, 0.0), ty(y, eps_y, kappa_, 0.0), kappa(kappa_) {
  if (!(x < y)) throw ParameterError("pair tracker needs x < y");
  z = x / y;
  product = u_of_z(z, kappa) * tx.current_M() * ty.current_M();
}

void PairTracker::update(const TrackedPoint& px, const TrackedPoint& py, double w, std::size_t step) {
  tx.update(px, w, step);
  ty.update(py, w, step);
  if (!px.alive() || !py.alive()) {
    product = 0.0;
    return;
  }
  z = (px.g - w) / (py.g - w);
  product = (z > 0.0 && z < 1.0) ? u_of_z(z, kappa) * tx.current_M() * ty.current_M() : 0.0;
}

CEpsObserver::CEpsObserver(std::span<const double> x, std::span<const double> eps, double kappa) {
  if (x.size() != eps.size()) throw ParameterError("one eps per tracked point");
  trackers_.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) trackers_.emplace_back(x[i], eps[i], kappa);
}

void CEpsObserver::observe(const StepView& view) {
  if (view.points.size() != trackers_.size()) throw StateError("observer and run disagree on point count");
  for (std::size_t i = 0; i < trackers_.size(); ++i) trackers_[i].update(view.points[i], view.drive, view.step);
}

bool CEpsObserver::complete() const {
  return std::all_of(trackers_.begin(), trackers_.end(),
                     [](const MartingaleTracker& t) { return t.outcome() != Outcome::running; });
}

void CEpsObserver::finish() {
  for (auto& t : trackers_) t.finish();
}

bool run_C_eps_trial(double kappa, double x, double eps, std::uint64_t seed, std::uint64_t run_index,
                     const EngineConfig& cfg) {
  const MembershipGrid grid({x}, eps);
  return run_membership(kappa, grid, StopRule::all_decided, seed, run_index, cfg).any_hit;
}

std::pair<bool, bool> run_pair_trial(double kappa, double x, double y, double eps_x, double eps_y,
                                     std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg) {
  if (!(x > 0.0 && x < y)) throw ParameterError("pair trial needs 0 < x < y");
  const MembershipGrid grid({x, y}, {eps_x, eps_y});
  const auto res = run_membership(kappa, grid, StopRule::all_decided, seed, run_index, cfg, 2);
  return {res.hit[0] != 0, res.hit[1] != 0};
}

double u_of_z(double z, double kappa, UMethod method) {
  require_kappa(kappa);
  if (!(z > 0.0 && z < 1.0)) throw DomainError("u(z) needs z in (0,1)");
  const HypParams p{1.0 - 8.0 / kappa, 4.0 / kappa, 8.0 / kappa, 1.0 - z};
  if (method == UMethod::automatic) method = (p.z <= 0.9) ? UMethod::series : UMethod::euler;
  const double f = (method == UMethod::series) ? hyp2f1_series(p) : hyp2f1(p);
  return std::pow(1.0 - z, -s_kappa(kappa)) * f;
}

double u_gamma_ratio(double kappa) {
  require_kappa(kappa);
  return std::exp(std::lgamma(8.0 / kappa) + std::lgamma(12.0 / kappa - 1.0) - std::lgamma(16.0 / kappa - 1.0) -
                  std::lgamma(4.0 / kappa));
}

namespace {

// Extremum of f on (0,1) given its limits at both ends; sign = +1 maximizes.
std::pair<double, double> extremum(const std::function<double(double)>& f, double at0, double at1,
                                   std::size_t grid, double sign) {
  std::vector<double> z(grid + 2);
  std::vector<double> v(grid + 2);
  z[0] = 0.0;
  v[0] = at0;
  z[grid + 1] = 1.0;
  v[grid + 1] = at1;
  for (std::size_t i = 1; i <= grid; ++i) {
    z[i] = static_cast<double>(i) / static_cast<double>(grid + 1);
    v[i] = f(z[i]);
    if (!std::isfinite(v[i]) || !(v[i] > 0.0)) {
      throw NumericalError("u(z) not finite and positive at z=" + std::to_string(z[i]));
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (sign * v[i] > sign * v[best]) best = i;
  }
  if (best == 0 || best == grid + 1) return {v[best], z[best]};

  // Golden section inside the bracket around the best node.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = z[best - 1];
  double hi = z[best + 1];
  double c = hi - g * (hi - lo);
  double d = lo + g * (hi - lo);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (sign * fc > sign * fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  if (hi - lo > 1e-9) throw NumericalError("golden-section search did not converge");
  const double zm = 0.5 * (lo + hi);
  const double vm = f(zm);
  return sign * vm > sign * v[best] ? std::pair{vm, zm} : std::pair{v[best], z[best]};
}

}  // namespace

QBounds q1_q2(double kappa, std::size_t grid) {
  require_kappa(kappa);
  if (grid < 4) throw ParameterError("q1/q2 scan needs at least 4 points");
  const double s = s_kappa(kappa);
  const double ratio = u_gamma_ratio(kappa);
  const auto u = [&](double z) { return u_of_z(z, kappa); };
  const auto f = [&](double z) { return std::pow(1.0 - z, s) * u_of_z(z, kappa); };
  QBounds out;
  std::tie(out.q1, out.z1) = extremum(u, ratio, 1.0, grid, -1.0);
  std::tie(out.q2, out.z2) = extremum(f, ratio, 1.0, grid, +1.0);
  return out;
}

IntegralObservable IntegralObservable::geometric(const std::function<double(double)>& rho, double lo, double hi,
                                                 double ratio) {
  if (!(lo > 0.0 && hi > lo)) throw ParameterError("integral grid needs 0 < lo < hi");
  if (!(ratio > 1.0)) throw ParameterError("grid ratio must exceed 1");
  IntegralObservable out;
  for (double a = lo; a < hi;) {
    const double b = std::min(a * ratio, hi);
    const double m = 0.5 * (a + b);
    const double r = rho(m);
    if (!(r > 0.0) || !std::isfinite(r)) throw ParameterError("rho must be positive on the grid");
    out.x.push_back(m);
    out.weight.push_back(r * (b - a));
    a = b;
  }
  return out;
}

double IntegralObservable::value(std::span<const double> m) const {
  if (m.size() != x.size()) throw ParameterError("one M value per grid node");
  double z = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) z += weight[i] * m[i];
  return z;
}

double IntegralObservable::initial(double kappa) const {
  const double s = s_kappa(kappa);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += weight[i] * std::pow(x[i], -s);
  return z;
}

namespace {

class ZObserver : public StepObserver {
 public:
  ZObserver(const IntegralObservable& z, double s, std::vector<double>& out) : z_(z), s_(s), out_(out) {}
  void observe(const StepView& view) override {
    double v = 0.0;
    for (std::size_t i = 0; i < view.points.size(); ++i) {
      if (view.points[i].alive()) v += z_.weight[i] * compute_M(view.points[i], view.drive, s_);
    }
    out_.push_back(v);
  }

 private:
  const IntegralObservable& z_;
  double s_;
  std::vector<double>& out_;
};

}  // namespace

std::vector<double> track_Z_supermartingale(const SimParams& params, const IntegralObservable& z) {
  params.validate();
  std::vector<TrackedPoint> points;
  points.reserve(z.x.size());
  for (double x : z.x) points.push_back(TrackedPoint::start(x));
  std::vector<double> series{z.initial(params.kappa)};
  series.reserve(params.step_count() + 1);
  ZObserver obs(z, params.s_kappa(), series);
  StepObserver* list[] = {&obs};
  evolve(params, std::move(points), list);
  return series;
}

namespace {

// Per-point stopping data for the checkpoint runs, all on q = g'/X.
struct Probe {
  double hit_q = kInf;   // threshold (with the hit gap) or inf when unstopped
  double near_q = kInf;  // barrier refinement starts above this
  double freeze_q = 0.0;
  bool active = true;
  double frozen = 0.0;  // frozen M value
};

Probe make_probe(double x, double eps, double s, double bar, const EngineConfig& cfg) {
  Probe p;
  p.freeze_q = std::pow(kFreeze, 1.0 / s) / x;
  if (eps > 0.0) {
    p.hit_q = std::exp(-std::log(eps) - cfg.hit_gap);
    p.near_q = std::exp(-std::log(eps) - bar * std::sqrt(cfg.resolution));
  }
  return p;
}

double pick_dt(const Chain& chain, const std::vector<Probe>& probes, const EngineConfig& cfg, double bar) {
  double dt = kInf;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const ChainPoint& cp = chain[i];
    if (!probes[i].active || !cp.alive) continue;
    double ds = cfg.resolution;
    const double q = cp.gprime / cp.gap;
    if (q > probes[i].near_q) {
      const double g = (std::log(probes[i].hit_q / q) + cfg.hit_gap) / bar;
      ds = std::min(ds, g * g);
    }
    dt = std::min(dt, cp.gap * cp.gap * ds);
  }
  return dt;
}

// Advances the chain through the checkpoints. `settle` updates the probes
// after each step, `record(k)` stores checkpoint k.
template <class Settle, class Record>
void run_checkpoints(Chain& chain, std::vector<Probe>& probes, std::span<const double> times,
                     const EngineConfig& cfg, double bar, Settle settle, Record record) {
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw ParameterError("checkpoints must be strictly ascending");
  }
  if (!times.empty() && !(times[0] >= 0.0)) throw ParameterError("checkpoints must be non-negative");
  settle();
  std::size_t k = 0;
  while (k < times.size()) {
    const double remaining = times[k] - chain.time();
    if (remaining <= 1e-12 * times[k]) {
      record(k++);
      continue;
    }
    double dt = pick_dt(chain, probes, cfg, bar);
    if (dt == kInf) {
      while (k < times.size()) record(k++);
      break;
    }
    dt = std::min(dt, remaining);
    if (chain.step() >= cfg.max_steps) throw SimulationError("checkpoint run exceeded max_steps", chain.step());
    chain.advance(dt);
    settle();
  }
}

}  // namespace

std::vector<double> stopped_M_checkpoints(double kappa, double x, double eps, std::span<const double> times,
                                          std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg) {
  cfg.validate();
  require_kappa(kappa);
  if (!(x > 0.0 && eps > 0.0)) throw ParameterError("stopped M needs x > 0 and eps > 0");
  const double s = s_kappa(kappa);
  const double bar = 3.0 * std::sqrt(kappa);
  const double threshold = std::pow(eps, -s);
  Chain chain(kappa, seed, run_index, false);
  chain.insert(x);
  std::vector<Probe> probes{make_probe(x, eps, s, bar, cfg)};
  Probe& p = probes[0];
  if (std::pow(x, -s) >= threshold) {
    p.active = false;
    p.frozen = std::pow(x, -s);
  }
  std::vector<double> out(times.size());
  run_checkpoints(
      chain, probes, times, cfg, bar,
      [&] {
        if (!p.active) return;
        const ChainPoint& cp = chain[0];
        if (!cp.alive) {
          p.active = false;
          p.frozen = 0.0;
          return;
        }
        const double q = cp.gprime / cp.gap;
        if (q >= p.hit_q) {
          p.active = false;
          p.frozen = threshold;
        } else if (q < p.freeze_q) {
          p.active = false;
          p.frozen = std::pow(q, s);
        }
      },
      [&](std::size_t k) {
        const ChainPoint& cp = chain[0];
        out[k] = p.active ? std::pow(cp.gprime / cp.gap, s) : p.frozen;
      });
  return out;
}

std::vector<double> Z_checkpoints(double kappa, const IntegralObservable& z, std::span<const double> times,
                                  std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg) {
  cfg.validate();
  require_kappa(kappa);
  const double s = s_kappa(kappa);
  const double bar = 3.0 * std::sqrt(kappa);
  Chain chain(kappa, seed, run_index, false);
  std::vector<Probe> probes;
  for (double x : z.x) {
    chain.insert(x);
    probes.push_back(make_probe(x, 0.0, s, bar, cfg));
  }
  std::vector<double> m(z.x.size());
  std::vector<double> out(times.size());
  run_checkpoints(
      chain, probes, times, cfg, bar,
      [&] {
        for (std::size_t i = 0; i < probes.size(); ++i) {
          Probe& p = probes[i];
          if (!p.active) continue;
          const ChainPoint& cp = chain[i];
          if (!cp.alive) {
            p.active = false;
            p.frozen = 0.0;
          } else if (cp.gprime / cp.gap < p.freeze_q) {
            p.active = false;
            p.frozen = std::pow(cp.gprime / cp.gap, s);
          }
        }
      },
      [&](std::size_t k) {
        for (std::size_t i = 0; i < probes.size(); ++i) {
          m[i] = probes[i].active ? std::pow(chain[i].gprime / chain[i].gap, s) : probes[i].frozen;
        }
        out[k] = z.value(m);
      });
  return out;
}

std::vector<double> pair_V_checkpoints(double kappa, double x, double y, double eps_x, double eps_y,
                                       std::span<const double> times, std::uint64_t seed, std::uint64_t run_index,
                                       const EngineConfig& cfg) {
  cfg.validate();
  require_kappa(kappa);
  if (!(x > 0.0 && x < y)) throw ParameterError("pair drift needs 0 < x < y");
  if (!(eps_x < x && eps_y < y)) throw ParameterError("pair drift needs eps below each point");
  const double s = s_kappa(kappa);
  const double bar = 3.0 * std::sqrt(kappa);
  const double thx = std::pow(eps_x, -s);
  const double thy = std::pow(eps_y, -s);
  Chain chain(kappa, seed, run_index, false);
  chain.insert(x);
  chain.insert(y);
  std::vector<Probe> probes{make_probe(x, eps_x, s, bar, cfg), make_probe(y, eps_y, s, bar, cfg)};
  // joint swallowing kills both factors
  const double merge_del = kappa > 4.0 && kappa < 8.0 ? order_thresholds(kappa, cfg.order_tol).del : 0.0;
  bool stopped = false;
  double frozen = 0.0;

  const auto current = [&](double mx, double my) {
    const double z = chain[0].gap / chain[1].gap;
    return u_of_z(z, kappa) * mx * my;
  };
  const auto stop_at = [&](double v) {
    stopped = true;
    frozen = v;
    probes[0].active = probes[1].active = false;
  };

  std::vector<double> out(times.size());
  run_checkpoints(
      chain, probes, times, cfg, bar,
      [&] {
        if (stopped) return;
        const ChainPoint& a = chain[0];
        const ChainPoint& b = chain[1];
        if (!a.alive || !b.alive || 1.0 - a.gap / b.gap <= merge_del) {
          stop_at(0.0);
          return;
        }
        const double qa = a.gprime / a.gap;
        const double qb = b.gprime / b.gap;
        const bool hit_a = qa >= probes[0].hit_q;
        const bool hit_b = qb >= probes[1].hit_q;
        if (hit_a || hit_b) {
          stop_at(current(hit_a ? thx : std::pow(qa, s), hit_b ? thy : std::pow(qb, s)));
        } else if (qa < probes[0].freeze_q || qb < probes[1].freeze_q) {
          stop_at(current(std::pow(qa, s), std::pow(qb, s)));
        }
      },
      [&](std::size_t k) {
        out[k] = stopped ? frozen
                         : current(std::pow(chain[0].gprime / chain[0].gap, s),
                                   std::pow(chain[1].gprime / chain[1].gap, s));
      });
  return out;
}

QStatistic QStatistic::build(const BoundaryFunction& h, double kappa, double a, double x_max, double ratio) {
  require_kappa(kappa);
  if (!(a > h.r)) throw ParameterError("Q needs a > r");
  if (!(ratio > 1.0)) throw ParameterError("grid ratio must exceed 1");
  const double s = s_kappa(kappa);
  const auto rho = [&](double x) { return kappa == 4.0 ? lambda_eval(h, kappa, x) : std::pow(h(x), s - 1.0); };
  const auto cell_mass = [&](double lo, double hi) {
    const double m = 0.5 * (lo + hi);
    return rho(m) * std::pow(m, -s) * (hi - lo);
  };

  QStatistic q;
  q.a = a;
  q.kappa = kappa;
  double cum = 0.0;
  for (double lo = a;;) {
    if (lo > x_max) {
      throw RangeError("normalization endpoint b not found below x_max; mass reached " + std::to_string(cum));
    }
    double hi = lo * ratio;
    const double full = cell_mass(lo, hi);
    const bool last = cum + full >= 1.0;
    if (last) {
      double l = lo;
      double r = hi;
      for (int it = 0; it < 200 && r - l > 1e-15 * r; ++it) {
        const double mid = 0.5 * (l + r);
        (cum + cell_mass(lo, mid) < 1.0 ? l : r) = mid;
      }
      hi = r;
    }
    const double m = 0.5 * (lo + hi);
    const double hm = h(m);
    q.x.push_back(m);
    q.h.push_back(hm);
    q.weight.push_back(rho(m) * std::pow(hm, -s) * (hi - lo));
    cum += cell_mass(lo, hi);
    if (last) {
      q.b = hi;
      break;
    }
    lo = hi;
  }
  q.mass = cum;
  return q;
}

double QStatistic::value(std::span<const std::uint8_t> in_x) const {
  if (in_x.size() != x.size()) throw ParameterError("one membership flag per Q node");
  double v = 0.0;
  for (std::size_t i = 0; i < in_x.size(); ++i) {
    if (in_x[i]) v += weight[i];
  }
  return v;
}

double compute_Q(const QStatistic& q, std::uint64_t seed, std::uint64_t run_index, const EngineConfig& cfg) {
  const MembershipGrid grid(q.x, q.h);
  const auto res = run_membership(q.kappa, grid, StopRule::all_decided, seed, run_index, cfg);
  return q.value(res.hit);
}

}  // namespace sle
