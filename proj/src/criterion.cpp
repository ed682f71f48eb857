#include "slelab/criterion.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>

#include "slelab/errors.hpp"
#include "slelab/format.hpp"
#include "slelab/specfun.hpp"

namespace sle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogLog2 = std::log(std::numbers::ln2);

void require_lambda_kappa(double kappa) {
  if (!(kappa > 0.0 && kappa <= 4.0)) {
    throw DomainError("Lambda is defined for kappa in (0,4], got " + fmt(kappa));
  }
}

/// (1 - s) * u with the s = 1 case exact even for u = inf.
double affine(double s, double u) { return s == 1.0 ? 0.0 : (1.0 - s) * u; }

}  // namespace

LogX LogX::from_x(double x) {
  const double u = std::log(x);
  return {u, std::log(u)};
}

LogX LogX::from_u(double u) { return {u, std::log(u)}; }

LogX LogX::from_v(double v) { return {std::exp(v), v}; }

BoundaryFunction BoundaryFunction::powlog(double beta, double r) {
  BoundaryFunction h;
  h.family = Family::powlog;
  h.param = beta;
  h.r = r;
  return h;
}

BoundaryFunction BoundaryFunction::itloglog(double alpha, double r) {
  BoundaryFunction h;
  h.family = Family::itloglog;
  h.param = alpha;
  h.r = r;
  return h;
}

BoundaryFunction BoundaryFunction::constant(double c, double r) {
  BoundaryFunction h;
  h.family = Family::constant;
  h.param = c;
  h.r = r;
  return h;
}

BoundaryFunction BoundaryFunction::custom(Expr e, double r, std::optional<int> level) {
  BoundaryFunction h;
  h.family = Family::custom;
  h.expr = std::move(e);
  h.r = r;
  h.level_hint = level;
  return h;
}

double BoundaryFunction::operator()(double x) const {
  double v = 0.0;
  switch (family) {
    case Family::powlog: v = x / std::pow(std::log(x), param); break;
    case Family::itloglog: v = std::pow(x, -std::pow(std::log(std::log(x)), param)); break;
    case Family::constant: v = param; break;
    case Family::custom: v = (*expr)(x); break;
  }
  v *= scale;
  return clipped ? std::min(v, 0.5 * x) : v;
}

double BoundaryFunction::log_h(const LogX& p) const {
  double lh = 0.0;
  switch (family) {
    case Family::powlog: lh = p.u - param * p.v; break;
    case Family::itloglog: lh = -p.u * std::pow(p.v, param); break;
    case Family::constant: lh = std::log(param); break;
    case Family::custom: lh = std::log((*expr)(std::exp(p.u))); break;
  }
  lh += std::log(scale);
  return clipped ? std::min(lh, p.u - std::numbers::ln2) : lh;
}

double BoundaryFunction::log_log_ratio(const LogX& p) const {
  const double lh = log_h(p);
  if (std::isfinite(p.u) && std::isfinite(lh)) {
    const double d = p.u - lh;
    return d > 0.0 ? std::log(d) : -kInf;
  }
  if (family == Family::itloglog && p.v > 0.0) {
    // log(x/h) = u (1 + v^alpha) - log(scale); the scale term vanishes here
    return p.v + std::log1p(std::pow(p.v, param));
  }
  return std::nan("");
}

std::string BoundaryFunction::describe() const {
  std::string out;
  switch (family) {
    case Family::powlog: out = "powlog(beta=" + fmt(param); break;
    case Family::itloglog: out = "itloglog(alpha=" + fmt(param); break;
    case Family::constant: out = "const(c=" + fmt(param); break;
    case Family::custom: out = "custom(expr=" + expr->text(); break;
  }
  out += ",r=" + fmt(r);
  if (scale != 1.0) out += ",scale=" + fmt(scale);
  if (clipped) out += ",clip=1";
  if (level_hint) out += ",level=" + std::to_string(*level_hint);
  return out + ")";
}

int BoundaryFunction::block_level(double kappa) const {
  switch (family) {
    case Family::constant: return kappa < 4.0 ? 0 : 1;
    case Family::powlog: return 1;
    case Family::itloglog: return kappa < 4.0 ? 1 : 2;
    case Family::custom: return level_hint.value_or(-1);
  }
  return -1;
}

namespace {

class FamilyParser {
 public:
  explicit FamilyParser(std::string_view s) : s_(s) {}

  BoundaryFunction run() {
    skip();
    const std::size_t name_pos = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string name(s_.substr(name_pos, pos_ - name_pos));
    BoundaryFunction h;
    if (name == "powlog") {
      h = BoundaryFunction::powlog(1.0);
    } else if (name == "itloglog") {
      h = BoundaryFunction::itloglog(1.0);
    } else if (name == "const") {
      h = BoundaryFunction::constant(1.0);
    } else if (name == "custom") {
      h.family = Family::custom;
    } else {
      throw ParseError("unknown family '" + name + "'", name_pos);
    }
    expect('(');
    bool have_main = false;
    skip();
    if (!peek(')')) {
      do {
        skip();
        const std::size_t key_pos = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string key(s_.substr(key_pos, pos_ - key_pos));
        if (key.empty()) throw ParseError("expected key", key_pos);
        expect('=');
        skip();
        const std::size_t val_pos = pos_;
        const std::string_view val = value();
        assign(h, key, val, key_pos, val_pos, have_main);
      } while (accept(','));
    }
    expect(')');
    skip();
    if (pos_ != s_.size()) throw ParseError("trailing characters", pos_);
    if (h.family == Family::custom && !h.expr) throw ParseError("custom needs expr=...", s_.size());
    if (!(h.r > 1.0)) throw ParseError("r must exceed 1", s_.size());
    if (h.family == Family::itloglog && !(h.r > std::numbers::e)) {
      throw ParseError("itloglog needs r > e", s_.size());
    }
    return h;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) const { return pos_ < s_.size() && s_[pos_] == c; }
  bool accept(char c) {
    skip();
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
  }

  // Raw text up to the next top-level ',' or ')'.
  std::string_view value() {
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (c == '(') ++depth;
      if (c == ')') {
        if (depth == 0) break;
        --depth;
      }
      if (c == ',' && depth == 0) break;
      ++pos_;
    }
    if (pos_ == start) throw ParseError("empty value", pos_);
    return s_.substr(start, pos_ - start);
  }

  static double number(std::string_view text, std::size_t pos) {
    Expr e;
    try {
      e = Expr::parse(text);
    } catch (const ParseError& err) {
      throw ParseError("bad number", pos + err.position());
    }
    const double v = e(std::nan(""));
    if (!std::isfinite(v)) throw ParseError("value must be a finite constant", pos);
    return v;
  }

  static void assign(BoundaryFunction& h, const std::string& key, std::string_view val,
                     std::size_t key_pos, std::size_t val_pos, bool& have_main) {
    const bool main_key = (h.family == Family::powlog && key == "beta") ||
                          (h.family == Family::itloglog && key == "alpha") ||
                          (h.family == Family::constant && key == "c");
    if (main_key) {
      h.param = number(val, val_pos);
      if (h.family == Family::constant && !(h.param > 0.0)) throw ParseError("c must be positive", val_pos);
      have_main = true;
    } else if (key == "r") {
      h.r = number(val, val_pos);
    } else if (key == "scale") {
      h.scale = number(val, val_pos);
      if (!(h.scale > 0.0)) throw ParseError("scale must be positive", val_pos);
    } else if (key == "clip") {
      h.clipped = number(val, val_pos) != 0.0;
    } else if (h.family == Family::custom && key == "expr") {
      try {
        h.expr = Expr::parse(val);
      } catch (const ParseError& err) {
        throw ParseError("bad expr", val_pos + err.position());
      }
    } else if (h.family == Family::custom && key == "level") {
      const double lv = number(val, val_pos);
      if (lv != 0.0 && lv != 1.0 && lv != 2.0) throw ParseError("level must be 0, 1 or 2", val_pos);
      h.level_hint = static_cast<int>(lv);
    } else {
      throw ParseError("unknown key '" + key + "'", key_pos);
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

BoundaryFunction parse_family(std::string_view text) { return FamilyParser(text).run(); }

BoundaryFunction clip_half(const BoundaryFunction& h) {
  BoundaryFunction out = h;
  out.clipped = true;
  return out;
}

double lambda_eval(const BoundaryFunction& h, double kappa, double x) {
  require_lambda_kappa(kappa);
  if (!(x >= h.r) || !std::isfinite(x)) throw DomainError("lambda_eval needs finite x >= r");
  const double hx = h(x);
  if (!(hx > 0.0) || !std::isfinite(hx)) throw DomainError("h(x) must be positive and finite");
  if (kappa == 4.0) return 1.0 / std::log(std::max(x / hx, 2.0));
  return std::pow(hx, s_kappa(kappa) - 1.0);
}

double log_lambda(const BoundaryFunction& h, double kappa, const LogX& p) {
  require_lambda_kappa(kappa);
  if (kappa == 4.0) {
    const double llr = h.log_log_ratio(p);
    if (std::isnan(llr)) return llr;
    return -std::max(llr, kLogLog2);
  }
  return (s_kappa(kappa) - 1.0) * h.log_h(p);
}

RegularityEstimate regularity_sup(const BoundaryFunction& h, double kappa, double x_max) {
  require_lambda_kappa(kappa);
  if (!(x_max > 2.0 * h.r)) throw ParameterError("regularity_sup needs x_max > 2r");
  const int per_doubling = 64;
  const double du = std::numbers::ln2 / per_doubling;
  const double u0 = std::log(h.r);
  const auto n = static_cast<std::size_t>(std::floor((std::log(x_max) - u0) / du)) + 1;
  std::vector<double> ll(n);
  RegularityEstimate best{1.0, u0, u0};
  for (std::size_t i = 0; i < n; ++i) {
    ll[i] = log_lambda(h, kappa, LogX::from_u(u0 + du * static_cast<double>(i)));
    if (!std::isfinite(ll[i])) {
      best.value = kInf;
      best.log_x = best.log_y = u0 + du * static_cast<double>(i);
      return best;
    }
  }
  double best_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j_end = std::min(n, i + per_doubling + 1);
    for (std::size_t j = i; j < j_end; ++j) {
      const double d = ll[i] - ll[j];
      if (d > best_log) {
        best_log = d;
        best.log_x = u0 + du * static_cast<double>(i);
        best.log_y = u0 + du * static_cast<double>(j);
      }
    }
  }
  best.value = std::exp(best_log);
  return best;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::bounded: return "bounded";
    case Verdict::unbounded: return "unbounded";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

/// log of int_lo^hi exp(lf(y)) dy; NaN if lf is NaN or +inf anywhere sampled.
template <class F>
double log_block(const F& lf, double lo, double hi) {
  constexpr int samples = 33;
  double shift = -kInf;
  for (int i = 0; i < samples; ++i) {
    const double y = lo + (hi - lo) * i / (samples - 1);
    const double v = lf(y);
    if (std::isnan(v) || v == kInf) return std::nan("");
    shift = std::max(shift, v);
  }
  if (shift == -kInf) return -kInf;
  const auto g = [&](double y) {
    const double v = lf(y);
    return std::isfinite(v) ? std::exp(v - shift) : 0.0;
  };
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(g, lo, hi, 12, 1e-9, &err);
  if (!(val > 0.0) || !std::isfinite(val)) return val == 0.0 ? -kInf : std::nan("");
  return shift + std::log(val);
}

}  // namespace

CriterionVerdict integral_test(const BoundaryFunction& h_in, double kappa, double r, std::size_t block_count,
                               double margin) {
  require_lambda_kappa(kappa);
  if (block_count < 8) throw ParameterError("integral_test needs block_count >= 8");
  if (!(r > 1.0)) throw ParameterError("integral_test needs r > 1");
  BoundaryFunction h = h_in;
  h.r = r;
  const double s = s_kappa(kappa);

  CriterionVerdict out;
  out.level = h.block_level(kappa);
  const int level = std::max(out.level, 0);
  double y0 = r;
  if (level == 1) y0 = std::max(std::log(r), 1.0);
  if (level == 2) y0 = (r > std::numbers::e) ? std::max(std::log(std::log(r)), 1.0) : 1.0;

  const auto lf = [&](double y) {
    const LogX p = level == 0 ? LogX::from_x(y) : level == 1 ? LogX::from_u(y) : LogX::from_v(y);
    const double ll = log_lambda(h, kappa, p);
    if (level == 0) return ll - s * p.u;
    if (level == 1) return ll + affine(s, p.u);
    return ll + affine(s, p.u) + p.v;
  };

  for (std::size_t k = 0; k < block_count; ++k) {
    const double lo = std::ldexp(y0, static_cast<int>(k));
    const double hi = 2.0 * lo;
    const double lv = log_block(lf, lo, hi);
    if (std::isnan(lv)) {
      out.note = "overflow guard stopped after " + std::to_string(k) + " blocks";
      break;
    }
    out.blocks.push_back({lo, hi, lv / std::numbers::ln2});
  }
  if (out.blocks.size() < 8) {
    if (out.note.empty()) out.note = "fewer than 8 usable blocks";
    return out;
  }

  // regularity up to the end of the last block, capped where x stays finite
  double u_end = out.blocks.back().hi;
  if (level == 0) u_end = std::log(u_end);
  if (level == 2) u_end = std::exp(std::min(u_end, 700.0));
  u_end = std::clamp(u_end, std::log(r) + 2.0 * std::numbers::ln2, 690.0);
  out.regularity = regularity_sup(h, kappa, std::exp(u_end));

  const std::size_t n = out.blocks.size();
  const std::size_t first = n / 2;
  bool all_zero = true;
  double sk = 0, sy = 0, skk = 0, sky = 0;
  const double m = static_cast<double>(n - first);
  for (std::size_t k = first; k < n; ++k) {
    double y = out.blocks[k].log2_value;
    if (y != -kInf) all_zero = false;
    y = std::max(y, -1100.0);
    const double kk = static_cast<double>(k);
    sk += kk;
    sy += y;
    skk += kk * kk;
    sky += kk * y;
  }
  const double slope = all_zero ? -kInf : (m * sky - sk * sy) / (m * skk - sk * sk);
  double rss = 0.0;
  if (!all_zero) {
    const double icpt = (sy - slope * sk) / m;
    for (std::size_t k = first; k < n; ++k) {
      const double res = std::max(out.blocks[k].log2_value, -1100.0) - (icpt + slope * static_cast<double>(k));
      rss += res * res;
    }
  }
  out.slope = slope;
  out.residual = std::sqrt(rss / m);

  if (!std::isfinite(out.regularity.value)) {
    out.note = "regularity supremum is not finite";
    return out;
  }
  if (out.level < 0) {
    out.note = "custom h needs a level hint";
    return out;
  }
  if (!all_zero && out.residual > 0.25 + 0.1 * std::fabs(slope)) {
    out.note = "block integrals are not regularly varying";
    return out;
  }
  out.verdict = slope < -margin ? Verdict::bounded : Verdict::unbounded;
  return out;
}

std::optional<Verdict> analytic_verdict(const BoundaryFunction& h, double kappa) {
  require_lambda_kappa(kappa);
  const bool critical = kappa == 4.0;
  switch (h.family) {
    case Family::powlog:
      // kappa < 4: int (log x)^{-beta(s-1)} dx/x; kappa = 4: int dx/(beta x log x log log x)
      if (critical) return Verdict::unbounded;
      return h.param > 1.0 / (8.0 / kappa - 2.0) ? Verdict::bounded : Verdict::unbounded;
    case Family::itloglog:
      if (critical) return h.param > 1.0 ? Verdict::bounded : Verdict::unbounded;
      return Verdict::bounded;
    case Family::constant:
      return critical ? Verdict::unbounded : Verdict::bounded;
    case Family::custom:
      break;
  }
  return std::nullopt;
}

double criterion_integral(const BoundaryFunction& h, double kappa, double a, double b) {
  require_lambda_kappa(kappa);
  if (!(a >= h.r) || !(b > a)) throw ParameterError("criterion_integral needs r <= a < b");
  const double s = s_kappa(kappa);
  const auto f = [&](double u) { return std::exp(log_lambda(h, kappa, LogX::from_u(u)) + affine(s, u)); };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, std::log(a), std::log(b), 15, 1e-10, &err);
}

}  // namespace sle
