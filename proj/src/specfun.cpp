#include "slelab/specfun.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <algorithm>
#include <cmath>
#include <string>

#include "slelab/errors.hpp"

namespace sle {

namespace {

void require_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa < 8.0)) {
    throw DomainError("kappa must lie in (0,8), got " + std::to_string(kappa));
  }
}

double quad(const auto& f, double hi) {
  if (hi <= 0.0) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, hi, 15, 1e-13, &err);
}

}  // namespace

double gamma_fn(double x) {
  if (std::isnan(x)) throw DomainError("gamma_fn of NaN");
  if (x <= 0.0 && x == std::floor(x)) {
    throw DomainError("gamma_fn pole at " + std::to_string(x));
  }
  return std::tgamma(x);
}

double hyp2f1_series(const HypParams& p) {
  if (!(std::fabs(p.z) < 1.0)) throw DomainError("hyp2f1_series needs |z| < 1");
  if (p.c <= 0.0 && p.c == std::floor(p.c)) throw DomainError("hyp2f1_series: c is a pole");
  double term = 1.0;
  double sum = 1.0;
  for (int n = 0; n < 100000; ++n) {
    term *= (p.a + n) * (p.b + n) / ((p.c + n) * (n + 1.0)) * p.z;
    sum += term;
    if (std::fabs(term) <= 1e-17 * std::fabs(sum) && n > 2) return sum;
    if (term == 0.0) return sum;
  }
  throw NumericalError("hyp2f1_series did not converge");
}

double hyp2f1(const HypParams& p) {
  const double a = p.a, b = p.b, c = p.c, z = p.z;
  if (!(b > 0.0 && c > b)) throw DomainError("hyp2f1 needs c > b > 0");
  if (!(z <= 1.0) || !std::isfinite(z)) throw DomainError("hyp2f1 needs z <= 1");
  if (z == 0.0) return 1.0;
  const bool at_one = (z == 1.0);
  if (at_one && !(c - a - b > 0.0)) throw DomainError("hyp2f1 at z=1 needs c-a-b > 0");

  const double e = at_one ? c - a - b : c - b;
  // Substitutions only where the endpoint power is singular (exponent < 1).
  const double pl = std::min(b, 1.0);
  const double pr = std::min(e, 1.0);
  // left: t = u^{1/pl} on (0, 1/2], t^{b-1} dt = t^{b-pl} du / pl
  const auto left = [&](double u) {
    const double t = std::pow(u, 1.0 / pl);
    return std::pow(t, b - pl) * std::pow(1.0 - t, c - b - 1.0) * std::pow(1.0 - z * t, -a);
  };
  // right: 1 - t = w = v^{1/pr} on (0, 1/2], (1-t)^{e-1} dt = w^{e-pr} dv / pr
  const auto right = [&](double v) {
    const double w = std::pow(v, 1.0 / pr);
    const double t = 1.0 - w;
    if (at_one) return std::pow(w, e - pr) * std::pow(t, b - 1.0);
    return std::pow(w, e - pr) * std::pow(t, b - 1.0) * std::pow((1.0 - z) + z * w, -a);
  };
  const double il = quad(left, std::pow(0.5, pl)) / pl;
  const double ir = quad(right, std::pow(0.5, pr)) / pr;
  const double log_pref = std::lgamma(c) - std::lgamma(b) - std::lgamma(c - b);
  const double value = std::exp(log_pref) * (il + ir);
  if (!std::isfinite(value)) throw NumericalError("hyp2f1 quadrature produced a non-finite value");
  return value;
}

double incomplete_beta_reg(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta_reg needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete_beta_reg needs x in [0,1]");
  return boost::math::ibeta(a, b, x);
}

double incomplete_beta_inv(double y, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("incomplete_beta_inv needs a, b > 0");
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("incomplete_beta_inv needs y in [0,1]");
  return boost::math::ibeta_inv(a, b, y);
}

double exact_interval_hit_prob(double x, double eps, double kappa) {
  if (!(kappa > 4.0 && kappa < 8.0)) throw DomainError("exact_interval_hit_prob needs kappa in (4,8)");
  if (!(x > 0.0) || !(eps > 0.0)) throw DomainError("exact_interval_hit_prob needs x, eps > 0");
  return 1.0 - boost::math::ibeta(1.0 - 4.0 / kappa, 8.0 / kappa - 1.0, x / (x + eps));
}

double exact_point_prob(double x, double eps, double kappa) {
  require_kappa(kappa);
  if (!(x > 0.0) || !(eps > 0.0)) throw DomainError("exact_point_prob needs x, eps > 0");
  if (eps >= x) return 1.0;
  return std::pow(eps / x, s_kappa(kappa));
}

}  // namespace sle
