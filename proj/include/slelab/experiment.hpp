#pragma once

// Experiment configuration and dispatch for the command-line tool.
//
// A config is flat key=value text. Most values may be comma-separated lists;
// the experiment then runs once per combination (cartesian product, in the
// kind's key order) and writes one CSV row each. Grid keys (strip_hit eps,
// drift times) are consumed whole by a single run instead.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sle {

class Config {
 public:
  /// Lines of key=value; '#' starts a comment; later duplicates win.
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// "key=value"; throws ParseError otherwise.
  void apply_override(std::string_view assignment);
  void erase(const std::string& key);

  std::optional<std::string> get(const std::string& key) const;
  bool has(const std::string& key) const { return get(key).has_value(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }
  /// key=value lines in insertion order.
  std::string text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Splits on commas outside parentheses, trimming blanks.
std::vector<std::string> split_list(std::string_view value);

enum class ExperimentKind {
  point_prob,
  pair_prob,
  interval_hit,
  strip_hit,
  graph_hit,
  dimension,
  energy,
  q_statistic,
  drift,
  criterion,
};

std::optional<ExperimentKind> parse_kind(std::string_view name);
std::string to_string(ExperimentKind kind);
const std::vector<std::string>& kind_names();

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::point_prob;
  Config params;  // experiment keys only
  std::uint64_t seed = 1;
  int threads = 0;

  /// Takes kind, seed and threads out of `config` (the explicit kind wins
  /// over a "kind" key); drops meta.* and digest.* keys; rejects keys the kind
  /// does not know with ParameterError.
  static ExperimentSpec from_config(const Config& config, std::optional<ExperimentKind> kind = std::nullopt);
  /// kind, seed and params as config text; feeding it back reproduces the run.
  Config echo() const;
};

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;  // polyline, else scatter
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::size_t failed_rows = 0;
  Plot plot;

  /// Header plus rows; fields holding ',' or '"' are quoted.
  std::string csv() const;
};

ResultTable run_experiment(const ExperimentSpec& spec);

/// Trace of one uniform-grid run: columns step,t,re,im at `points` evenly
/// spaced steps (all steps when fewer). Keys: kappa, dt, t_max, seed,
/// run_index, points, zero_drive (0/1).
ResultTable run_simulation(const Config& config);
const std::vector<std::string>& simulate_keys();

/// Minimal SVG rendering: axes, ticks, polylines and dots.
std::string render_svg(const Plot& plot, int width = 640, int height = 420);

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

struct RunManifest {
  std::string version;
  std::string command;  // "experiment" or "simulate"
  Config spec;          // echo of the spec that produced the outputs
  double duration_s = 0.0;
  int threads = 0;
  std::map<std::string, std::string> digests;  // file name -> sha256

  /// spec lines, then meta.* and digest.* lines.
  std::string text() const;
  static RunManifest parse(std::string_view text);
};

/// Library version string.
std::string version();

}  // namespace sle
