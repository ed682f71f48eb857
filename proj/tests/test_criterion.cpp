#include <cmath>
#include <numbers>

#include "doctest.h"
#include "slelab/criterion.hpp"
#include "slelab/errors.hpp"

using namespace sle;
using doctest::Approx;

namespace {

BoundaryFunction custom(const char* text) { return parse_family(text); }

}  // namespace

TEST_CASE("lambda transform") {
  CHECK(lambda_eval(BoundaryFunction::constant(0.5), 2.0, 10.0) == Approx(0.25));
  CHECK(lambda_eval(custom("custom(expr=x)"), 4.0, 10.0) == Approx(1.0 / std::log(2.0)));

  const double beta = 0.6, x = std::exp(2.0);
  const double h = x / std::pow(2.0, beta);
  CHECK(lambda_eval(BoundaryFunction::powlog(beta), 3.0, x) == Approx(std::pow(h, 2.0 / 3.0)).epsilon(1e-12));

  // kappa = 4 without clamp: 1 / log(x/h)
  CHECK(lambda_eval(BoundaryFunction::powlog(1.0), 4.0, 1e6) ==
        Approx(1.0 / std::log(std::log(1e6))).epsilon(1e-12));

  CHECK_THROWS_AS(lambda_eval(BoundaryFunction::constant(1.0), 6.0, 10.0), DomainError);
  CHECK_THROWS_AS(lambda_eval(BoundaryFunction::constant(1.0), 2.0, 1.0), DomainError);
}

TEST_CASE("log-space evaluation matches direct evaluation") {
  const auto h = BoundaryFunction::powlog(0.7);
  for (double x : {5.0, 100.0, 1e8}) {
    CHECK(std::exp(h.log_h(LogX::from_x(x))) == Approx(h(x)).epsilon(1e-12));
    CHECK(std::exp(log_lambda(h, 2.0, LogX::from_x(x))) == Approx(lambda_eval(h, 2.0, x)).epsilon(1e-12));
  }
  // beyond double range the log form stays finite
  CHECK(std::isfinite(log_lambda(BoundaryFunction::itloglog(1.0), 4.0, LogX::from_v(50.0))));
}

TEST_CASE("family parsing") {
  const auto p = parse_family("powlog(beta=0.6)");
  CHECK(p.family == Family::powlog);
  CHECK(p.param == 0.6);
  CHECK(p.r == Approx(std::numbers::e));
  const auto s = parse_family(" const( c = 0.1 , scale=2, r=3 ) ");
  CHECK(s.family == Family::constant);
  CHECK(s(10.0) == Approx(0.2));
  CHECK(s.r == 3.0);
  const auto c = parse_family("custom(expr=x/(2*log(x)),level=0)");
  CHECK(c(100.0) == Approx(100.0 / (2.0 * std::log(100.0))));
  CHECK(c.level_hint == 0);

  CHECK_THROWS_AS(parse_family("powlog(beta=)"), ParseError);
  CHECK_THROWS_AS(parse_family("nosuch(beta=1)"), ParseError);
  CHECK_THROWS_AS(parse_family("powlog(gamma=1)"), ParseError);
  CHECK_THROWS_AS(parse_family("custom(expr=x+)"), ParseError);
  try {
    parse_family("powlog(beta=0.6");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() >= 10);
  }
}

TEST_CASE("clip to x/2") {
  const auto h = clip_half(custom("custom(expr=x)"));
  CHECK(h.clipped);
  for (double x : {2.0, 10.0, 1e5}) CHECK(h(x) == Approx(x / 2));
  const auto one = clip_half(BoundaryFunction::constant(1.0));
  for (double x : {2.0, 10.0, 1e5}) CHECK(one(x) == 1.0);

  // the kappa = 4 clamp never activates for a clipped h
  const auto p = clip_half(BoundaryFunction::powlog(0.1));
  for (double x = 3.0; x < 1e9; x *= 1.7) {
    CHECK(x / p(x) >= 2.0);
    CHECK(lambda_eval(p, 4.0, x) == Approx(1.0 / std::log(x / p(x))));
  }
}

TEST_CASE("regularity supremum") {
  CHECK(regularity_sup(BoundaryFunction::constant(0.3), 2.0, 1e6).value == Approx(1.0));
  CHECK(regularity_sup(BoundaryFunction::powlog(1.0), 2.0, 1e6).value <= 8.0);

  // Lambda = x^-2 decreasing: the ratio peaks at y = 2x with value 4
  const auto r = regularity_sup(custom("custom(expr=1/x)"), 2.0, 1e4);
  CHECK(r.value == Approx(4.0).epsilon(1e-9));
  CHECK(r.log_y - r.log_x == Approx(std::log(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(regularity_sup(BoundaryFunction::constant(1.0), 2.0, 3.0), ParameterError);
}

TEST_CASE("criterion integral") {
  const double c = 0.1;
  CHECK(criterion_integral(BoundaryFunction::constant(c), 2.0, 2.0, 10.0) ==
        Approx(c * c / 2.0 * (0.25 - 0.01)).epsilon(1e-10));
}

TEST_CASE("verdicts at the threshold exponents") {
  for (double kappa : {2.0, 3.0}) {
    const double beta_k = 1.0 / (8.0 / kappa - 2.0);
    CAPTURE(kappa);
    CHECK(integral_test(BoundaryFunction::powlog(beta_k + 0.1), kappa, std::numbers::e).verdict == Verdict::bounded);
    CHECK(integral_test(BoundaryFunction::powlog(beta_k - 0.1), kappa, std::numbers::e).verdict ==
          Verdict::unbounded);
    CHECK(integral_test(BoundaryFunction::powlog(beta_k), kappa, std::numbers::e).verdict == Verdict::unbounded);
  }
  const double r4 = std::exp(std::numbers::e);
  CHECK(integral_test(BoundaryFunction::itloglog(1.0), 4.0, r4).verdict == Verdict::unbounded);
  CHECK(integral_test(BoundaryFunction::itloglog(1.5), 4.0, r4).verdict == Verdict::bounded);
  CHECK(integral_test(BoundaryFunction::constant(0.1), 2.0, 2.0).verdict == Verdict::bounded);
  CHECK(integral_test(BoundaryFunction::constant(0.1), 4.0, 2.0).verdict == Verdict::unbounded);
}

TEST_CASE("verdict is invariant under rescaling and clipping") {
  for (double beta : {0.4, 0.6}) {
    auto h = BoundaryFunction::powlog(beta);
    const auto base = integral_test(h, 2.0, h.r).verdict;
    h.scale = 5.0;
    CHECK(integral_test(h, 2.0, h.r).verdict == base);
    CHECK(integral_test(clip_half(BoundaryFunction::powlog(beta)), 2.0, h.r).verdict == base);
  }
}

TEST_CASE("numeric verdicts agree with the analytic table") {
  for (double kappa : {1.0, 2.0, 3.0, 3.5}) {
    for (double beta : {0.1, 0.5, 1.0, 2.0, 4.0}) {
      const auto h = BoundaryFunction::powlog(beta);
      const auto known = analytic_verdict(h, kappa);
      REQUIRE(known);
      const double beta_k = 1.0 / (8.0 / kappa - 2.0);
      if (std::fabs(beta - beta_k) < 0.05) continue;
      CAPTURE(kappa);
      CAPTURE(beta);
      CHECK(integral_test(h, kappa, h.r).verdict == *known);
    }
  }
  CHECK(analytic_verdict(BoundaryFunction::powlog(3.0), 4.0) == Verdict::unbounded);
  CHECK(analytic_verdict(BoundaryFunction::itloglog(2.0), 2.0) == Verdict::bounded);
  CHECK(!analytic_verdict(custom("custom(expr=x)"), 2.0));
}

TEST_CASE("custom h without a level is inconclusive") {
  const auto v = integral_test(custom("custom(expr=x/log(x))"), 2.0, 3.0);
  CHECK(v.verdict == Verdict::inconclusive);
  CHECK(!v.note.empty());
  const auto w = integral_test(custom("custom(expr=x/log(x),level=1)"), 2.0, 3.0);
  CHECK(w.verdict == Verdict::bounded);
}
