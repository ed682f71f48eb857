#pragma once

// Boundary functions h on [r, inf), the transform
//
//     Lambda(x) = h(x)^{s-1}                 (kappa < 4)
//     Lambda(x) = 1 / log((x/h(x)) v 2)      (kappa = 4)
//
// and the integral test on  int_r^inf Lambda(x) x^{-s} dx.
//
// Families need astronomically large x before their behaviour shows (the
// iterated-log family at kappa = 4 diverges like log log log x), so every
// evaluation goes through LogX, which carries u = log x and v = log log x and
// stays meaningful after x itself has overflowed.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slelab/expr.hpp"

namespace sle {

enum class Family { powlog, itloglog, constant, custom };

struct LogX {
  double u = 0.0;  // log x (may be +inf)
  double v = 0.0;  // log log x

  static LogX from_x(double x);
  static LogX from_u(double u);
  static LogX from_v(double v);
};

struct BoundaryFunction {
  Family family = Family::constant;
  double param = 1.0;  // beta (powlog), alpha (itloglog), c (const)
  double r = 2.0;
  double scale = 1.0;
  bool clipped = false;
  std::optional<Expr> expr;
  /// Growth level declared for custom h: blocks are geometric in x (0),
  /// log x (1) or log log x (2). Without it the integral test is inconclusive.
  std::optional<int> level_hint;

  /// x / (log x)^beta, default r = e.
  static BoundaryFunction powlog(double beta, double r = 2.718281828459045);
  /// x^{-(log log x)^alpha}, default r = e^e.
  static BoundaryFunction itloglog(double alpha, double r = 15.154262241479262);
  static BoundaryFunction constant(double c, double r = 2.0);
  static BoundaryFunction custom(Expr e, double r = 2.0, std::optional<int> level = std::nullopt);

  double operator()(double x) const;
  double log_h(const LogX& p) const;
  /// log(log(x / h(x))), -inf when x/h <= 1, NaN when not representable.
  double log_log_ratio(const LogX& p) const;
  std::string describe() const;
  /// Block variable level used by the integral test, or -1 if unknown.
  int block_level(double kappa) const;
};

/// name(key=value, ...) with names powlog, itloglog, const, custom.
/// Keys: beta | alpha | c, r, scale, clip (0/1); custom takes expr=... and level=0|1|2.
BoundaryFunction parse_family(std::string_view text);

/// min(h, x/2), family kept and marked clipped.
BoundaryFunction clip_half(const BoundaryFunction& h);

double lambda_eval(const BoundaryFunction& h, double kappa, double x);
double log_lambda(const BoundaryFunction& h, double kappa, const LogX& p);

struct RegularityEstimate {
  double value = 1.0;
  double log_x = 0.0;  // maximizing pair, as log x and log y
  double log_y = 0.0;
};

/// sup Lambda(x)/Lambda(y) over r <= x <= y <= 2x, x <= x_max, on a grid
/// uniform in log x with 64 points per doubling. Overflow gives +inf.
RegularityEstimate regularity_sup(const BoundaryFunction& h, double kappa, double x_max);

enum class Verdict { bounded, unbounded, inconclusive };

std::string to_string(Verdict v);

struct BlockIntegral {
  double lo = 0.0;  // block bounds in the level variable
  double hi = 0.0;
  double log2_value = 0.0;
};

struct CriterionVerdict {
  Verdict verdict = Verdict::inconclusive;
  int level = -1;
  std::vector<BlockIntegral> blocks;
  double slope = 0.0;  // fitted d log2 I_k / dk over the tail
  double residual = 0.0;
  RegularityEstimate regularity;
  std::string note;
};

/// Blocks I_k over [2^k y0, 2^{k+1} y0] in the family's level variable
/// y in {x, log x, log log x}; the tail half is fitted by least squares.
/// slope < -margin -> bounded, otherwise unbounded (I_k not summable).
CriterionVerdict integral_test(const BoundaryFunction& h, double kappa, double r,
                               std::size_t block_count = 40, double margin = 0.05);

/// Known classification of the built-in families (constant rescaling and the
/// x/2 clip do not change it); nullopt for custom h.
std::optional<Verdict> analytic_verdict(const BoundaryFunction& h, double kappa);

/// int_a^b Lambda(x) x^{-s} dx.
double criterion_integral(const BoundaryFunction& h, double kappa, double a, double b);

}  // namespace sle
