#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "slelab/chain.hpp"
#include "slelab/errors.hpp"
#include "slelab/loewner.hpp"

using namespace sle;
using doctest::Approx;

namespace {

struct DerivativeWatch : StepObserver {
  double last = 1.0;
  bool monotone = true;
  bool in_range = true;
  void observe(const StepView& v) override {
    for (const auto& p : v.points) {
      if (!p.alive()) continue;
      if (p.gprime > last) monotone = false;
      if (!(p.gprime > 0.0 && p.gprime <= 1.0)) in_range = false;
      last = p.gprime;
    }
  }
};

}  // namespace

TEST_CASE("parameter validation") {
  SimParams p;
  CHECK_NOTHROW(p.validate());
  p.kappa = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p.kappa = 8.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = SimParams{};
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = SimParams{};
  p.t_max = -1.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  CHECK(SimParams{.kappa = 4.0}.s_kappa() == 1.0);
}

TEST_CASE("driving path grid and determinism") {
  SimParams p{.kappa = 3.0, .dt = 0.01, .t_max = 0.055, .seed = 7, .run_index = 2};
  const auto a = generate_driving(p);
  const auto b = generate_driving(p);
  REQUIRE(a.times.size() == 7);
  CHECK(a.times.back() == Approx(0.055));
  CHECK(a.values.front() == 0.0);
  CHECK(a.values == b.values);
  p.run_index = 3;
  CHECK(generate_driving(p).values != a.values);

  SimParams zero{.t_max = 0.0};
  const auto z = generate_driving(zero);
  CHECK(z.steps() == 0);
  CHECK(z.values == std::vector<double>{0.0});
}

TEST_CASE("driving increments have variance kappa t") {
  const int runs = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < runs; ++r) {
    const auto w = generate_driving({.kappa = 2.0, .dt = 0.01, .t_max = 1.0, .seed = 11, .run_index = std::uint64_t(r)});
    const double v = w.values.back();
    sum += v;
    sum2 += v * v;
  }
  const double var = sum2 / runs - (sum / runs) * (sum / runs);
  // sd of the sample variance of a normal is sqrt(2/n) * sigma^2
  CHECK(std::fabs(var - 2.0) < 4.0 * std::sqrt(2.0 / runs) * 2.0);
}

TEST_CASE("step_point follows the slit map") {
  const auto p = TrackedPoint::start(10.0);
  const auto q = step_point(p, 0.0, 0.0, 1e-6, 1);
  CHECK(q.g == Approx(10.0 + 2e-7).epsilon(1e-13));
  CHECK(q.gprime == Approx(10.0 / std::sqrt(100.0 + 4e-6)).epsilon(1e-14));
  CHECK(q.alive());

  auto dead = p;
  dead.status = PointStatus::swallowed;
  CHECK_THROWS_AS(step_point(dead, 0.0, 0.0, 1e-3), StateError);
  CHECK_THROWS_AS(step_point(p, 10.0, 10.0, 1e-3), StateError);

  const auto near = step_point(TrackedPoint::start(0.05), 0.0, 0.04, 1e-3, 4);
  CHECK(near.status == PointStatus::swallowed);
  CHECK(near.status_step == 4);
}

TEST_CASE("zero driving flows points to sqrt(x^2 + 4t)") {
  const auto path = zero_driving(1e-3, 1.0);
  const auto r = evolve_on(path, {TrackedPoint::start(0.5), TrackedPoint::start(2.0)});
  CHECK(r.steps_run == path.steps());
  CHECK(r.points[0].g == Approx(std::sqrt(0.25 + 4.0)).epsilon(1e-12));
  CHECK(r.points[1].g == Approx(std::sqrt(4.0 + 4.0)).epsilon(1e-12));
  CHECK(r.points[0].gprime == Approx(0.5 / std::sqrt(4.25)).epsilon(1e-12));

  const std::vector<std::size_t> steps{0, 250, 1000};
  const auto tr = trace_points(path, steps);
  CHECK(tr[0].point == std::complex<double>(0.0, 0.0));
  CHECK(std::abs(tr[1].point - std::complex<double>(0.0, 2.0 * std::sqrt(0.25))) < 1e-9);
  CHECK(std::abs(tr[2].point - std::complex<double>(0.0, 2.0)) < 1e-9);
}

TEST_CASE("evolve input checks and early stop") {
  const SimParams p{.kappa = 6.0, .dt = 1e-3, .t_max = 1.0};
  auto moved = TrackedPoint::start(1.0);
  moved.g = 1.5;
  CHECK_THROWS_AS(evolve(p, {moved}), ParameterError);
  CHECK_THROWS_AS(evolve(p, {TrackedPoint::start(1.0), TrackedPoint::start(1.0)}), ParameterError);
  CHECK_THROWS_AS(evolve(p, {TrackedPoint::start(-1.0)}), ParameterError);
  CHECK(evolve(p, {}).steps_run == 0);

  // kappa 6 swallows 0.01 quickly; the run stops once nothing is alive
  const auto r = evolve({.kappa = 6.0, .dt = 1e-6, .t_max = 10.0, .seed = 3}, {TrackedPoint::start(0.01)});
  CHECK(r.points[0].status == PointStatus::swallowed);
  CHECK(r.steps_run < r.path.steps());
}

TEST_CASE("observer failures carry the step") {
  struct Boom : StepObserver {
    void observe(const StepView& v) override {
      if (v.step == 5) throw std::runtime_error("boom");
    }
    bool complete() const override { return false; }
  } boom;
  StepObserver* obs[] = {&boom};
  try {
    evolve({.dt = 1e-3, .t_max = 1.0}, {TrackedPoint::start(1.0)}, obs);
    FAIL("expected SimulationError");
  } catch (const SimulationError& e) {
    CHECK(e.step() == 5);
  }
}

TEST_CASE("derivative stays in (0,1] and decreases") {
  DerivativeWatch w;
  StepObserver* obs[] = {&w};
  evolve({.kappa = 2.0, .dt = 1e-3, .t_max = 2.0, .seed = 5}, {TrackedPoint::start(1.0)}, obs);
  CHECK(w.monotone);
  CHECK(w.in_range);
}

TEST_CASE("swallowing respects order for kappa in (4,8)") {
  for (std::uint64_t run = 0; run < 50; ++run) {
    const auto r = evolve({.kappa = 6.0, .dt = 1e-4, .t_max = 5.0, .seed = 9, .run_index = run},
                          {TrackedPoint::start(0.2), TrackedPoint::start(0.6)});
    const auto& a = r.points[0];
    const auto& b = r.points[1];
    if (b.status == PointStatus::swallowed) {
      CHECK(a.status == PointStatus::swallowed);
      CHECK(a.status_step <= b.status_step);
    }
  }
}

TEST_CASE("points survive for kappa <= 4") {
  for (std::uint64_t run = 0; run < 20; ++run) {
    const auto r = evolve({.kappa = 2.0, .dt = 1e-4, .t_max = 0.01, .seed = 4, .run_index = run},
                          {TrackedPoint::start(1.0)});
    CHECK(r.points[0].alive());
  }
}

TEST_CASE("far points see the capacity expansion") {
  const double t = 1.0, x = 100.0;
  const auto r = evolve({.kappa = 6.0, .dt = 1e-3, .t_max = t, .seed = 2}, {TrackedPoint::start(x)});
  const double w = r.path.values.back();
  // g(x) = x + 2t/x + O(|W| t / x^2)
  CHECK(std::fabs(r.points[0].g - x - 2.0 * t / x) < (std::fabs(w) + 1.0) * t / (x * x) * 4.0);
}

TEST_CASE("trace stays in the upper half-plane") {
  const auto path = generate_driving({.kappa = 8.0 / 3.0, .dt = 1e-3, .t_max = 0.5, .seed = 12});
  std::vector<std::size_t> steps;
  for (std::size_t k = 1; k <= path.steps(); k += 50) steps.push_back(k);
  for (const auto& s : trace_points(path, steps)) {
    CHECK(std::isfinite(s.point.real()));
    CHECK(s.point.imag() > 0.0);
  }
}

TEST_CASE("inverse slit undoes the slit map") {
  const std::complex<double> z(0.3, 0.7);
  const double w = 0.1, dt = 0.01;
  const std::complex<double> g = w + std::sqrt((z - w) * (z - w) + 4.0 * dt);
  CHECK(std::abs(inverse_slit(g, w, dt) - z) < 1e-13);
  CHECK(std::abs(inverse_slit(std::complex<double>(w, 0.0), w, dt) - std::complex<double>(w, 2.0 * std::sqrt(dt))) <
        1e-13);
}

TEST_CASE("chain insert replays history exactly") {
  Chain a(6.0, 21, 0), b(6.0, 21, 0);
  a.insert(1.0);
  a.insert(0.7);
  b.insert(1.0);
  for (int k = 0; k < 200; ++k) {
    const double dt = 1e-3 * a[0].gap * a[0].gap;
    a.advance(dt);
    b.advance(dt);
  }
  b.insert(0.7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gap == b[i].gap);
    CHECK(a[i].gprime == b[i].gprime);
  }
  CHECK_THROWS_AS(a.insert(0.7), ParameterError);
  // half-step sampling: one extra constant piece
  CHECK(a.path().steps() == 201);
}

TEST_CASE("chain survival matches the Bessel hitting law") {
  // X = g(x) - W is a Bessel process of dimension 3 - 8/kappa; a point is
  // still unswallowed at t iff Gamma(1/2 - 2/kappa) < x^2 / (2 kappa t).
  const double kappa = 6.0, x0 = 0.1, t_end = 10.0;
  const int runs = 2000;
  int alive = 0;
  for (int r = 0; r < runs; ++r) {
    Chain c(kappa, 77, std::uint64_t(r), false);
    c.insert(x0);
    while (c[0].alive && c.time() < t_end) {
      if (c[0].gap < 1e-7 * x0) {
        c.mark_swallowed(0);
        break;
      }
      c.advance(std::min(1e-3 * c[0].gap * c[0].gap, t_end - c.time()));
    }
    if (c[0].alive) ++alive;
  }
  const double want = boost::math::gamma_p(0.5 - 2.0 / kappa, x0 * x0 / (2.0 * kappa * t_end));
  const double p = double(alive) / runs;
  const double se = std::sqrt(want * (1.0 - want) / runs);
  CHECK(std::fabs(p - want) < 3.0 * se);
}
