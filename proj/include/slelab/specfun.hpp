#pragma once

// Special functions and the closed-form boundary probabilities.

namespace sle {

struct HypParams {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double z = 0.0;
};

/// Gamma function (libm tgamma, ~1 ulp on the positive axis). Throws
/// DomainError at the poles 0, -1, -2, ...
double gamma_fn(double x);

/// Gauss 2F1 via the Euler integral
///   Gamma(c)/(Gamma(b)Gamma(c-b)) * int_0^1 t^{b-1}(1-t)^{c-b-1}(1-zt)^{-a} dt,
/// split at t = 1/2 with t = u^{1/b} on the left half and 1 - t = v^{1/e} on
/// the right, e = c-b (or c-a-b when z = 1), so both endpoint powers become
/// bounded integrands. Requires c > b > 0 and z <= 1, with c-a-b > 0 at z = 1.
double hyp2f1(const HypParams& p);

/// Same function by direct summation of the power series; |z| < 1.
double hyp2f1_series(const HypParams& p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta_reg(double x, double a, double b);

/// x with I_x(a, b) = y.
double incomplete_beta_inv(double y, double a, double b);

/// P(trace meets [x, x+eps]) = 1 - I_{x/(x+eps)}(1-4/kappa, 8/kappa-1), kappa in (4,8).
double exact_interval_hit_prob(double x, double eps, double kappa);

/// (eps/x)^{s_kappa} ∧ 1.
double exact_point_prob(double x, double eps, double kappa);

/// s_kappa = 8/kappa - 1.
inline double s_kappa(double kappa) { return 8.0 / kappa - 1.0; }

}  // namespace sle
