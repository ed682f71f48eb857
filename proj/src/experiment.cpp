#include "slelab/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>

#include "slelab/criterion.hpp"
#include "slelab/errors.hpp"
#include "slelab/format.hpp"
#include "slelab/loewner.hpp"
#include "slelab/mc.hpp"
#include "slelab/specfun.hpp"

#ifndef SLELAB_VERSION
#define SLELAB_VERSION "0.0.0"
#endif

namespace sle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.';
  });
}

bool is_meta(std::string_view key) { return key.starts_with("meta.") || key.starts_with("digest."); }

double to_double(const std::string& key, std::string_view text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParameterError(key + ": not a number: '" + std::string(text) + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, std::string_view text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParameterError(key + ": not a non-negative integer: '" + std::string(text) + "'");
  }
  return v;
}

std::string str(double v) { return std::isfinite(v) ? fmt(v) : (std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf")); }
std::string str(std::uint64_t v) { return std::to_string(v); }

struct KeyDef {
  std::string name;
  std::string fallback;
  bool grid = false;  // consumed whole by one run
};

struct KindDef {
  ExperimentKind kind;
  std::string name;
  std::vector<KeyDef> keys;
  std::vector<std::string> results;
  bool monte_carlo = true;
};

const std::vector<std::string> kEngineKeys = {"resolution", "hit_gap", "miss_ratio", "t_max", "order_tol", "chunk"};

const std::vector<KindDef>& kinds() {
  static const std::vector<KindDef> defs = {
      {ExperimentKind::point_prob,
       "point_prob",
       {{"kappa", "6"}, {"x", "1"}, {"eps", "0.5"}, {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio"}},
      {ExperimentKind::pair_prob,
       "pair_prob",
       {{"kappa", "6"}, {"x", "1"}, {"y", "2"}, {"eps", "0.1"}, {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "marginal_product"}},
      {ExperimentKind::interval_hit,
       "interval_hit",
       {{"kappa", "6"}, {"x", "1"}, {"eps", "1"}, {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio"}},
      {ExperimentKind::strip_hit,
       "strip_hit",
       {{"kappa", "2"}, {"eps", "0.125,0.0625,0.03125,0.015625,0.0078125", true}, {"n", "10000"}, {"method", "direct"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "slope", "slope_se", "expected_slope", "band"}},
      {ExperimentKind::graph_hit,
       "graph_hit",
       {{"kappa", "2"}, {"family", "powlog(beta=1)"}, {"x_max", "1e8"}, {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "integral", "grid_points"}},
      {ExperimentKind::dimension,
       "dimension",
       {{"kappa", "6"}, {"runs", "500"}, {"jmin", "4"}, {"jmax", "10"}, {"initial_points", "65"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "dim", "ci_lo", "ci_hi", "levels"}},
      {ExperimentKind::energy,
       "energy",
       {{"kappa", "6"}, {"eps", "0.015625"}, {"delta", "0.3333333333333333"}, {"n", "2000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "energy", "energy_se"}},
      {ExperimentKind::q_statistic,
       "q_statistic",
       {{"kappa", "6"}, {"family", "custom(expr=x/(2*log(x)),level=0)"}, {"a", "10"}, {"grid_ratio", "1.05"},
        {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "q2", "q2_se", "b", "nodes"}},
      {ExperimentKind::drift,
       "drift",
       {{"observable", "M"},
        {"kappa", "6"},
        {"x", "1"},
        {"y", "1.5"},
        {"eps", "0.3"},
        {"t", "0.1,0.25,0.5,1,2", true},
        {"n", "10000"}},
       {"estimate", "stderr", "exact_or_bound", "ratio", "increment", "increment_se"}},
      {ExperimentKind::criterion,
       "criterion",
       {{"kappa", "2"}, {"family", "powlog(beta=0.6)"}, {"r", "auto"}, {"block_count", "40"}},
       {"verdict", "analytic", "slope", "residual", "regularity", "blocks", "note"},
       false},
  };
  return defs;
}

const KindDef& def_of(ExperimentKind kind) {
  for (const auto& d : kinds()) {
    if (d.kind == kind) return d;
  }
  throw ParameterError("unknown experiment kind");
}

// Values of one row, keyed by parameter name.
class Row {
 public:
  explicit Row(std::map<std::string, std::string> v) : v_(std::move(v)) {}
  const std::string& text(const std::string& key) const {
    const auto it = v_.find(key);
    if (it == v_.end()) throw ParameterError("missing parameter " + key);
    return it->second;
  }
  double num(const std::string& key) const { return to_double(key, text(key)); }
  std::uint64_t count(const std::string& key) const { return to_u64(key, text(key)); }
  bool has(const std::string& key) const { return v_.count(key) > 0; }

 private:
  std::map<std::string, std::string> v_;
};

std::size_t trials(const Row& r, const std::string& key) {
  const auto n = r.count(key);
  if (n < 100) throw ParameterError(key + " must be at least 100");
  return static_cast<std::size_t>(n);
}

RunOptions options(const ExperimentSpec& spec, const Row& r) {
  RunOptions opt;
  opt.seed = spec.seed;
  opt.threads = spec.threads;
  if (r.has("chunk")) opt.chunk = static_cast<std::size_t>(std::max<std::uint64_t>(1, r.count("chunk")));
  if (r.has("resolution")) opt.engine.resolution = r.num("resolution");
  if (r.has("hit_gap")) opt.engine.hit_gap = r.num("hit_gap");
  if (r.has("miss_ratio")) opt.engine.miss_ratio = r.num("miss_ratio");
  if (r.has("t_max")) opt.engine.horizon = r.num("t_max");
  if (r.has("order_tol")) opt.engine.order_tol = r.num("order_tol");
  opt.engine.validate();
  return opt;
}

std::vector<double> grid_values(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  if (out.empty()) throw ParameterError(key + ": empty grid");
  return out;
}

double ratio_of(double a, double b) { return b != 0.0 && std::isfinite(b) ? a / b : kNaN; }

// One or more result rows (grid kinds give several) from a parameter row.
struct Produced {
  std::vector<std::map<std::string, std::string>> params;  // per output row overrides (grid value)
  std::vector<std::vector<std::string>> values;
  std::vector<std::string> status;
  std::vector<PlotSeries> series;
};

std::vector<std::string> estimate_cells(const Estimate& e) {
  return {str(e.estimate), str(e.se), str(e.exact), str(ratio_of(e.estimate, e.exact))};
}

Produced single(std::vector<std::string> values) {
  Produced p;
  p.params.emplace_back();
  p.values.push_back(std::move(values));
  p.status.emplace_back("ok");
  return p;
}

Produced run_row(const ExperimentSpec& spec, const Row& r) {
  switch (spec.kind) {
    case ExperimentKind::point_prob: {
      const auto e = estimate_point_prob(r.num("kappa"), r.num("x"), r.num("eps"), trials(r, "n"), options(spec, r));
      Produced p = single(estimate_cells(e));
      p.series.push_back({"", {e.exact}, {e.estimate}, false});
      return p;
    }
    case ExperimentKind::pair_prob: {
      const double kappa = r.num("kappa");
      const double x = r.num("x");
      const double y = r.num("y");
      const double eps = r.num("eps");
      const auto e = estimate_pair_prob(kappa, x, y, eps, eps, trials(r, "n"), options(spec, r));
      const double s = s_kappa(kappa);
      const double shape = std::pow(eps * eps, s) * std::pow(x, -s) * std::pow(y - x, -s);
      Produced p = single({str(e.estimate), str(e.se), str(shape), str(e.estimate / shape), str(e.exact)});
      p.series.push_back({"", {shape}, {e.estimate}, false});
      return p;
    }
    case ExperimentKind::interval_hit: {
      const auto e =
          estimate_interval_hit(r.num("kappa"), r.num("x"), r.num("eps"), trials(r, "n"), options(spec, r));
      Produced p = single(estimate_cells(e));
      p.series.push_back({"", {e.exact}, {e.estimate}, false});
      return p;
    }
    case ExperimentKind::strip_hit: {
      const auto eps = grid_values("eps", r.text("eps"));
      const std::string& method = r.text("method");
      if (method != "direct" && method != "conditioned") throw ParameterError("method must be direct or conditioned");
      const auto fit = estimate_strip_hit(r.num("kappa"), eps, trials(r, "n"), options(spec, r),
                                          method == "direct" ? StripMethod::direct : StripMethod::conditioned);
      Produced p;
      PlotSeries pts{"P", {}, {}, false};
      PlotSeries line{"fit", {}, {}, true};
      for (double e : eps) {
        p.params.push_back({{"eps", str(e)}});
        const auto it = std::find_if(fit.rows.begin(), fit.rows.end(), [&](const StripRow& s) { return s.eps == e; });
        const double fitted = std::exp(fit.fit.intercept + fit.fit.slope * std::log(e));
        const std::vector<std::string> tail = {str(fit.fit.slope), str(fit.fit.slope_se), str(fit.expected),
                                               str(fit.band)};
        std::vector<std::string> v;
        if (it == fit.rows.end()) {
          v = {"0", "0", str(fitted), "0"};
          p.status.emplace_back("dropped: no hits");
        } else {
          v = {str(it->p.estimate), str(it->p.se), str(fitted), str(it->p.estimate / fitted)};
          p.status.emplace_back("ok");
          pts.x.push_back(e);
          pts.y.push_back(it->p.estimate);
        }
        line.x.push_back(e);
        line.y.push_back(fitted);
        v.insert(v.end(), tail.begin(), tail.end());
        p.values.push_back(std::move(v));
      }
      p.series = {pts, line};
      return p;
    }
    case ExperimentKind::graph_hit: {
      const auto h = parse_family(r.text("family"));
      const auto g = estimate_graph_hit(r.num("kappa"), h, r.num("x_max"), trials(r, "n"), options(spec, r));
      Produced p = single({str(g.p.estimate), str(g.p.se), str(std::min(1.0, g.integral)), str(g.ratio),
                           str(g.integral), str(static_cast<std::uint64_t>(g.grid_points))});
      p.series.push_back({"", {g.integral}, {g.p.estimate}, false});
      return p;
    }
    case ExperimentKind::dimension: {
      const double kappa = r.num("kappa");
      const auto jmin = static_cast<int>(r.count("jmin"));
      const auto jmax = static_cast<int>(r.count("jmax"));
      const auto d = estimate_dimension(kappa, trials(r, "runs"), jmin, jmax, options(spec, r),
                                        static_cast<std::size_t>(r.count("initial_points")));
      const double exact = 2.0 - 8.0 / kappa;
      Produced p = single({str(d.fit.slope), str(d.fit.slope_se), str(exact), str(d.fit.slope / exact),
                           str(d.fit.slope), str(d.ci_lo), str(d.ci_hi),
                           str(static_cast<std::uint64_t>(d.levels.size()))});
      if (!d.dropped.empty()) p.status[0] = "ok: dropped " + std::to_string(d.dropped.size()) + " levels";
      PlotSeries pts{"kappa=" + r.text("kappa"), {}, {}, true};
      for (std::size_t i = 0; i < d.levels.size(); ++i) {
        pts.x.push_back(std::ldexp(1.0, d.levels[i]));
        pts.y.push_back(d.mean_count[i]);
      }
      p.series.push_back(pts);
      return p;
    }
    case ExperimentKind::energy: {
      const auto f = frostman_stats(r.num("kappa"), r.num("eps"), r.num("delta"), trials(r, "n"), options(spec, r));
      auto v = estimate_cells(f.mass);
      v.push_back(str(f.energy.estimate));
      v.push_back(str(f.energy.se));
      Produced p = single(v);
      p.series.push_back({"", {r.num("eps")}, {f.energy.estimate}, false});
      return p;
    }
    case ExperimentKind::q_statistic: {
      const auto h = parse_family(r.text("family"));
      const auto q =
          estimate_Q(r.num("kappa"), h, r.num("a"), trials(r, "n"), options(spec, r), r.num("grid_ratio"));
      auto v = estimate_cells(q.q);
      v.push_back(str(q.q2.estimate));
      v.push_back(str(q.q2.se));
      v.push_back(str(q.b));
      v.push_back(str(static_cast<std::uint64_t>(q.nodes)));
      Produced p = single(v);
      p.series.push_back({"", {q.a}, {q.q2.estimate}, false});
      return p;
    }
    case ExperimentKind::drift: {
      const auto times = grid_values("t", r.text("t"));
      const std::string& obs = r.text("observable");
      const double kappa = r.num("kappa");
      const std::size_t n = trials(r, "n");
      const auto opt = options(spec, r);
      DriftSeries d;
      if (obs == "M") {
        d = drift_stopped_M(kappa, r.num("x"), r.num("eps"), times, n, opt);
      } else if (obs == "Z") {
        const auto z = IntegralObservable::geometric([](double) { return 1.0; }, r.num("x"), r.num("y"));
        d = drift_Z(kappa, z, times, n, opt);
      } else if (obs == "V") {
        d = drift_pair(kappa, r.num("x"), r.num("y"), r.num("eps"), r.num("eps"), times, n, opt);
      } else {
        throw ParameterError("observable must be M, Z or V");
      }
      Produced p;
      PlotSeries line{obs + " kappa=" + r.text("kappa"), {0.0}, {d.initial}, true};
      for (std::size_t k = 0; k < times.size(); ++k) {
        p.params.push_back({{"t", str(times[k])}});
        const auto& e = d.value[k];
        p.values.push_back({str(e.estimate), str(e.se), str(d.initial), str(ratio_of(e.estimate, d.initial)),
                            str(d.increment[k].estimate), str(d.increment[k].se)});
        p.status.emplace_back("ok");
        line.x.push_back(times[k]);
        line.y.push_back(e.estimate);
      }
      p.series.push_back(line);
      return p;
    }
    case ExperimentKind::criterion: {
      auto h = parse_family(r.text("family"));
      const double kappa = r.num("kappa");
      const std::string& rt = r.text("r");
      const double r0 = rt == "auto" ? h.r : to_double("r", rt);
      if (rt != "auto") h.r = r0;
      const auto v = integral_test(h, kappa, r0, static_cast<std::size_t>(r.count("block_count")));
      const auto known = analytic_verdict(h, kappa);
      Produced p = single({to_string(v.verdict), known ? to_string(*known) : "", str(v.slope), str(v.residual),
                           str(v.regularity.value), str(static_cast<std::uint64_t>(v.blocks.size())), v.note});
      PlotSeries line{h.describe() + " kappa=" + r.text("kappa"), {}, {}, true};
      for (std::size_t k = 0; k < v.blocks.size(); ++k) {
        line.x.push_back(static_cast<double>(k));
        line.y.push_back(v.blocks[k].log2_value);
      }
      p.series.push_back(line);
      return p;
    }
  }
  throw ParameterError("unknown experiment kind");
}

Plot plot_for(const KindDef& d) {
  Plot plot;
  plot.title = d.name;
  switch (d.kind) {
    case ExperimentKind::strip_hit:
      plot.x_label = "eps";
      plot.y_label = "P(hit)";
      plot.log_x = plot.log_y = true;
      break;
    case ExperimentKind::dimension:
      plot.x_label = "1/eps";
      plot.y_label = "E N(eps)";
      plot.log_x = plot.log_y = true;
      break;
    case ExperimentKind::drift:
      plot.x_label = "t";
      plot.y_label = "mean";
      break;
    case ExperimentKind::criterion:
      plot.x_label = "block k";
      plot.y_label = "log2 I_k";
      break;
    case ExperimentKind::graph_hit:
      plot.x_label = "integral";
      plot.y_label = "estimate";
      plot.log_x = plot.log_y = true;
      break;
    case ExperimentKind::energy:
      plot.x_label = "eps";
      plot.y_label = "energy";
      plot.log_x = true;
      break;
    case ExperimentKind::q_statistic:
      plot.x_label = "a";
      plot.y_label = "E Q^2";
      plot.log_x = true;
      break;
    default:
      plot.x_label = "exact or bound";
      plot.y_label = "estimate";
      plot.log_x = plot.log_y = true;
      break;
  }
  return plot;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config c;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    if (!trim(line).empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected key=value", pos);
      const auto key = trim(line.substr(0, eq));
      if (!valid_key(key)) throw ParseError("bad key '" + std::string(key) + "'", pos);
      c.set(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    if (eol == text.size()) break;
    pos = eol + 1;
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  for (auto& kv : entries_) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void Config::apply_override(std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ParseError("override must be key=value", assignment.size());
  const auto key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw ParseError("bad key '" + std::string(key) + "'", 0);
  set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

void Config::erase(const std::string& key) {
  std::erase_if(entries_, [&](const auto& kv) { return kv.first == key; });
}

std::optional<std::string> Config::get(const std::string& key) const {
  for (const auto& kv : entries_) {
    if (kv.first == key) return kv.second;
  }
  return std::nullopt;
}

std::string Config::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= value.size(); ++i) {
    const char c = i < value.size() ? value[i] : ',';
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      const auto item = trim(value.substr(start, i - start));
      if (!item.empty()) out.emplace_back(item);
      start = i + 1;
    }
  }
  return out;
}

std::optional<ExperimentKind> parse_kind(std::string_view name) {
  for (const auto& d : kinds()) {
    if (d.name == name) return d.kind;
  }
  return std::nullopt;
}

std::string to_string(ExperimentKind kind) { return def_of(kind).name; }

const std::vector<std::string>& kind_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& d : kinds()) v.push_back(d.name);
    return v;
  }();
  return names;
}

ExperimentSpec ExperimentSpec::from_config(const Config& config, std::optional<ExperimentKind> kind) {
  ExperimentSpec spec;
  if (!kind) {
    const auto named = config.get("kind");
    if (!named) throw ParameterError("no experiment kind given");
    kind = parse_kind(*named);
    if (!kind) throw ParameterError("unknown experiment kind '" + *named + "'");
  }
  spec.kind = *kind;
  if (const auto s = config.get("seed")) spec.seed = to_u64("seed", *s);
  if (const auto t = config.get("threads")) spec.threads = static_cast<int>(to_u64("threads", *t));

  const KindDef& d = def_of(spec.kind);
  for (const auto& [k, v] : config.entries()) {
    if (k == "kind" || k == "seed" || k == "threads" || is_meta(k)) continue;
    const bool known = std::any_of(d.keys.begin(), d.keys.end(), [&](const KeyDef& kd) { return kd.name == k; }) ||
                       (d.monte_carlo && std::find(kEngineKeys.begin(), kEngineKeys.end(), k) != kEngineKeys.end());
    if (!known) throw ParameterError("unknown key '" + k + "' for experiment " + d.name);
  }
  for (const auto& kd : d.keys) spec.params.set(kd.name, config.get(kd.name).value_or(kd.fallback));
  for (const auto& k : kEngineKeys) {
    if (const auto v = config.get(k)) spec.params.set(k, *v);
  }
  return spec;
}

Config ExperimentSpec::echo() const {
  Config c;
  c.set("kind", to_string(kind));
  c.set("seed", std::to_string(seed));
  for (const auto& [k, v] : params.entries()) c.set(k, v);
  return c;
}

std::string ResultTable::csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += "\n";
  }
  return out;
}

ResultTable run_experiment(const ExperimentSpec& spec) {
  const KindDef& d = def_of(spec.kind);
  ResultTable table;
  table.plot = plot_for(d);

  // Parameter keys in column order, with their list values.
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> lists;
  for (const auto& [k, v] : spec.params.entries()) {
    const auto it = std::find_if(d.keys.begin(), d.keys.end(), [&](const KeyDef& kd) { return kd.name == k; });
    const bool is_grid = it != d.keys.end() && it->grid;
    keys.push_back(k);
    // family expressions and grids are single items unless split at top level
    lists.push_back(is_grid ? std::vector<std::string>{v} : split_list(v));
    if (lists.back().empty()) throw ParameterError("empty value for " + k);
  }
  table.columns = keys;
  table.columns.insert(table.columns.end(), d.results.begin(), d.results.end());
  table.columns.emplace_back("status");

  std::vector<std::size_t> idx(keys.size(), 0);
  while (true) {
    std::map<std::string, std::string> values;
    for (std::size_t i = 0; i < keys.size(); ++i) values[keys[i]] = lists[i][idx[i]];
    const Row row(values);
    try {
      Produced p = run_row(spec, row);
      for (std::size_t j = 0; j < p.values.size(); ++j) {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < keys.size(); ++i) {
          const auto o = p.params[j].find(keys[i]);
          out.push_back(o != p.params[j].end() ? o->second : values[keys[i]]);
        }
        out.insert(out.end(), p.values[j].begin(), p.values[j].end());
        out.push_back(p.status[j]);
        table.rows.push_back(std::move(out));
      }
      for (auto& s : p.series) {
        // scatter points of one family share a series
        if (!s.line && !table.plot.series.empty() && !table.plot.series.back().line && s.name.empty()) {
          auto& last = table.plot.series.back();
          last.x.insert(last.x.end(), s.x.begin(), s.x.end());
          last.y.insert(last.y.end(), s.y.begin(), s.y.end());
        } else {
          table.plot.series.push_back(std::move(s));
        }
      }
    } catch (const std::exception& e) {
      std::vector<std::string> out;
      for (std::size_t i = 0; i < keys.size(); ++i) out.push_back(values[keys[i]]);
      out.resize(table.columns.size() - 1);
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out.push_back("error: " + msg);
      table.rows.push_back(std::move(out));
      ++table.failed_rows;
    }
    std::size_t i = keys.size();
    while (i > 0) {
      --i;
      if (++idx[i] < lists[i].size()) break;
      idx[i] = 0;
      if (i == 0) return table;
    }
    if (keys.empty()) return table;
  }
}

const std::vector<std::string>& simulate_keys() {
  static const std::vector<std::string> keys = {"kappa", "dt", "t_max", "seed", "run_index", "points", "zero_drive"};
  return keys;
}

ResultTable run_simulation(const Config& config) {
  for (const auto& [k, v] : config.entries()) {
    if (is_meta(k) || k == "threads") continue;
    if (std::find(simulate_keys().begin(), simulate_keys().end(), k) == simulate_keys().end()) {
      throw ParameterError("unknown key '" + k + "' for simulate");
    }
  }
  const auto num = [&](const std::string& k, double fallback) {
    const auto v = config.get(k);
    return v ? to_double(k, *v) : fallback;
  };
  const auto u64 = [&](const std::string& k, std::uint64_t fallback) {
    const auto v = config.get(k);
    return v ? to_u64(k, *v) : fallback;
  };
  SimParams p;
  p.kappa = num("kappa", 6.0);
  p.dt = num("dt", 1e-3);
  p.t_max = num("t_max", 1.0);
  p.seed = u64("seed", 1);
  p.run_index = u64("run_index", 0);
  p.validate();
  const auto points = std::max<std::uint64_t>(1, u64("points", 200));
  const bool zero = u64("zero_drive", 0) != 0;

  const DrivingPath path = zero ? zero_driving(p.dt, p.t_max) : generate_driving(p);
  const std::size_t n = path.steps();
  std::vector<std::size_t> steps;
  if (n + 1 <= points) {
    for (std::size_t k = 0; k <= n; ++k) steps.push_back(k);
  } else {
    for (std::uint64_t i = 0; i < points; ++i) {
      steps.push_back(static_cast<std::size_t>((static_cast<double>(i) * static_cast<double>(n)) /
                                               static_cast<double>(points - 1) + 0.5));
    }
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  }
  const auto trace = trace_points(path, steps);

  ResultTable table;
  table.columns = {"step", "t", "re", "im"};
  table.plot.title = "trace kappa=" + fmt(p.kappa);
  table.plot.x_label = "Re";
  table.plot.y_label = "Im";
  PlotSeries line{"trace", {}, {}, true};
  for (const auto& s : trace) {
    table.rows.push_back({std::to_string(s.step), fmt(path.times[s.step]), fmt(s.point.real()), fmt(s.point.imag())});
    line.x.push_back(s.point.real());
    line.y.push_back(s.point.imag());
  }
  table.plot.series.push_back(line);
  return table;
}

std::string render_svg(const Plot& plot, int width, int height) {
  const double left = 70;
  const double right = 20;
  const double top = 30;
  const double bottom = 50;
  const auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  const auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  const auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!plot.log_x || x > 0) && (!plot.log_y || y > 0);
  };

  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) {
    x0 = y0 = 0;
    x1 = y1 = 1;
  }
  if (x1 - x0 <= 0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 - y0 <= 0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double w = width - left - right;
  const double h = height - top - bottom;
  const auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * w; };
  const auto py = [&](double v) { return top + h - (ty(v) - y0) / (y1 - y0) * h; };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << plot.title
    << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double lx = plot.log_x ? std::pow(10.0, fx) : fx;
    const double ly = plot.log_y ? std::pow(10.0, fy) : fy;
    char bx[32];
    char by[32];
    std::snprintf(bx, sizeof bx, "%.3g", lx);
    std::snprintf(by, sizeof by, "%.3g", ly);
    const double sx = left + w * i / 4.0;
    const double sy = top + h - h * i / 4.0;
    o << "<text x=\"" << sx << "\" y=\"" << top + h + 16 << "\" text-anchor=\"middle\">" << bx << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << by << "</text>\n";
  }
  o << "<text x=\"" << left + w / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">" << plot.x_label
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + h / 2
    << ")\">" << plot.y_label << "</text>\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* c = colors[k % 6];
    if (s.line) {
      o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (usable(s.x[i], s.y[i])) o << px(s.x[i]) << "," << py(s.y[i]) << " ";
      }
      o << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (usable(s.x[i], s.y[i])) {
          o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
        }
      }
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
    throw NumericalError("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string RunManifest::text() const {
  std::string out = "# run manifest; meta.* and digest.* lines are ignored on replay\n";
  out += spec.text();
  out += "meta.version=" + version + "\n";
  out += "meta.command=" + command + "\n";
  out += "meta.duration_s=" + fmt(duration_s) + "\n";
  out += "meta.threads=" + std::to_string(threads) + "\n";
  for (const auto& [file, digest] : digests) out += "digest." + file + "=" + digest + "\n";
  return out;
}

RunManifest RunManifest::parse(std::string_view text) {
  const Config c = Config::parse(text);
  RunManifest m;
  for (const auto& [k, v] : c.entries()) {
    if (k == "meta.version") {
      m.version = v;
    } else if (k == "meta.command") {
      m.command = v;
    } else if (k == "meta.duration_s") {
      m.duration_s = to_double(k, v);
    } else if (k == "meta.threads") {
      m.threads = static_cast<int>(to_u64(k, v));
    } else if (k.starts_with("digest.")) {
      m.digests[k.substr(7)] = v;
    } else if (!k.starts_with("meta.")) {
      m.spec.set(k, v);
    }
  }
  return m;
}

std::string version() { return SLELAB_VERSION; }

}  // namespace sle
