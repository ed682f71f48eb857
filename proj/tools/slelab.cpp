// slelab: simulate traces, run Monte Carlo experiments, classify boundary
// families. Exit codes: 0 success or bounded, 10 unbounded, 20 inconclusive,
// 1 usage error, 2 runtime failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "slelab/criterion.hpp"
#include "slelab/errors.hpp"
#include "slelab/experiment.hpp"
#include "slelab/format.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsage = 1;
constexpr int kRuntime = 2;

const char* kFamilyHelp = R"(Boundary families:
  powlog(beta=B)      h = x / (log x)^B, r = e
  itloglog(alpha=A)   h = x^{-(log log x)^A}, r = e^e
  const(c=C)          h = C, r = 2
  custom(expr=E, level=L)
                      h = E(x); L in {0,1,2} declares the block variable
                      (x, log x, log log x); without it the test is inconclusive
Every family also takes r=R, scale=S (h multiplied by S) and clip=1 (h replaced by min(h, x/2)).
Expressions: numbers, x, e, + - * / ^, log(E), pow(E,E), parentheses.)";

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool svg = false;
  int threads = 0;
  std::vector<std::string> args;
};

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("SLELAB_OUT"); env && *env) return env;
  return "slelab-out";
}

sle::Config gather(const Common& c, std::vector<std::string> overrides) {
  sle::Config cfg = c.config.empty() ? sle::Config{} : sle::Config::load(c.config);
  for (const auto& o : overrides) cfg.apply_override(o);
  if (c.seed_set) cfg.set("seed", std::to_string(c.seed));
  return cfg;
}

std::string write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << bytes;
  f.close();
  if (!f) throw std::runtime_error("write failed for " + path.string());
  return sle::sha256_hex(bytes);
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file (a manifest replays its run)");
  cmd->add_option("--out", c.out, "output directory (default $SLELAB_OUT, else ./slelab-out)");
  cmd->add_option("--seed", c.seed, "master seed")->each([&c](const std::string&) { c.seed_set = true; });
  cmd->add_flag("--svg", c.svg, "also write an SVG plot");
  cmd->add_option("--threads", c.threads, "worker threads (0: OpenMP default)");
}

int cmd_simulate(const Common& c) {
  for (const auto& a : c.args) {
    if (a.find('=') == std::string::npos) throw sle::ParameterError("unexpected argument '" + a + "'");
  }
  const auto start = std::chrono::steady_clock::now();
  sle::Config cfg = gather(c, c.args);
  const sle::ResultTable table = sle::run_simulation(cfg);

  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  sle::RunManifest m;
  m.version = sle::version();
  m.command = "simulate";
  for (const auto& [k, v] : cfg.entries()) {
    if (!k.starts_with("meta.") && !k.starts_with("digest.")) m.spec.set(k, v);
  }
  m.threads = c.threads;
  m.digests["trace.csv"] = write_file(dir / "trace.csv", table.csv());
  if (c.svg) m.digests["trace.svg"] = write_file(dir / "trace.svg", sle::render_svg(table.plot));
  m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(dir / "manifest.txt", m.text());
  std::cout << "wrote " << (dir / "trace.csv").string() << " (" << table.rows.size() << " rows)\n";
  return 0;
}

int cmd_experiment(const Common& c) {
  std::optional<sle::ExperimentKind> kind;
  std::vector<std::string> overrides;
  for (const auto& a : c.args) {
    if (a.find('=') != std::string::npos) {
      overrides.push_back(a);
    } else if (!kind) {
      kind = sle::parse_kind(a);
      if (!kind) throw sle::ParameterError("unknown experiment kind '" + a + "'");
    } else {
      throw sle::ParameterError("unexpected argument '" + a + "'");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  sle::Config cfg = gather(c, overrides);
  sle::ExperimentSpec spec = sle::ExperimentSpec::from_config(cfg, kind);
  spec.threads = c.threads;
  const sle::ResultTable table = sle::run_experiment(spec);

  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  sle::RunManifest m;
  m.version = sle::version();
  m.command = "experiment";
  m.spec = spec.echo();
  m.threads = c.threads;
  const std::string csv = table.csv();
  m.digests["results.csv"] = write_file(dir / "results.csv", csv);
  if (c.svg) m.digests["results.svg"] = write_file(dir / "results.svg", sle::render_svg(table.plot));
  m.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(dir / "manifest.txt", m.text());
  std::cout << csv;
  if (table.failed_rows > 0) {
    std::cerr << table.failed_rows << " of " << table.rows.size() << " rows failed\n";
    return kRuntime;
  }
  return 0;
}

int cmd_criterion(const std::string& family, double kappa, const std::string& r_text, std::size_t blocks) {
  sle::BoundaryFunction h = sle::parse_family(family);
  if (!r_text.empty()) h.r = std::stod(r_text);
  const auto v = sle::integral_test(h, kappa, h.r, blocks);
  std::cout << "family      " << h.describe() << "\n";
  std::cout << "kappa       " << sle::fmt(kappa) << "\n";
  std::cout << "verdict     " << sle::to_string(v.verdict) << "\n";
  if (const auto known = sle::analytic_verdict(h, kappa)) std::cout << "analytic    " << sle::to_string(*known) << "\n";
  const char* level[] = {"x", "log x", "log log x"};
  if (v.level >= 0 && v.level <= 2) std::cout << "blocks in   " << level[v.level] << "\n";
  std::cout << "tail slope  " << sle::fmt(v.slope) << " (log2 I_k per block), residual " << sle::fmt(v.residual)
            << "\n";
  std::cout << "regularity  sup Lambda(x)/Lambda(y) = " << sle::fmt(v.regularity.value) << "\n";
  if (!v.note.empty()) std::cout << "note        " << v.note << "\n";
  std::cout << "k,lo,hi,log2_I\n";
  for (std::size_t k = 0; k < v.blocks.size(); ++k) {
    const auto& b = v.blocks[k];
    std::cout << k << "," << sle::fmt(b.lo) << "," << sle::fmt(b.hi) << "," << sle::fmt(b.log2_value) << "\n";
  }
  switch (v.verdict) {
    case sle::Verdict::bounded: return 0;
    case sle::Verdict::unbounded: return 10;
    case sle::Verdict::inconclusive: return 20;
  }
  return 20;
}

int cmd_verify(const std::string& manifest_path, const Common& c) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw sle::ParameterError("cannot read manifest " + manifest_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const sle::RunManifest m = sle::RunManifest::parse(ss.str());
  sle::ResultTable table;
  std::string file;
  if (m.command == "simulate") {
    table = sle::run_simulation(m.spec);
    file = "trace.csv";
  } else {
    sle::ExperimentSpec spec = sle::ExperimentSpec::from_config(m.spec);
    spec.threads = c.threads;
    table = sle::run_experiment(spec);
    file = "results.csv";
  }
  const auto it = m.digests.find(file);
  if (it == m.digests.end()) throw sle::ParameterError("manifest has no digest for " + file);
  const std::string digest = sle::sha256_hex(table.csv());
  const bool same = digest == it->second;
  std::cout << file << " " << (same ? "reproduced" : "DIFFERS") << " (" << digest << ")\n";
  return same ? 0 : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments for chordal SLE boundary hitting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sle::version());
  app.footer(kFamilyHelp);

  Common sim;
  auto* simulate = app.add_subcommand("simulate", "sample one trace on a uniform grid, write trace.csv");
  add_common(simulate, sim);
  simulate->add_option("overrides", sim.args, "key=value (kappa dt t_max seed run_index points zero_drive)");

  Common exp;
  auto* experiment = app.add_subcommand("experiment", "run an experiment, write results.csv and manifest.txt");
  add_common(experiment, exp);
  std::string kinds;
  for (const auto& k : sle::kind_names()) kinds += (kinds.empty() ? "" : ", ") + k;
  experiment->add_option("args", exp.args, "KIND then key=value overrides; kinds: " + kinds);
  experiment->footer("List values (a=1,2,3) run every combination, one CSV row each.");

  std::string family;
  double kappa = 2.0;
  std::string r_text;
  std::size_t blocks = 40;
  auto* criterion = app.add_subcommand("criterion", "integral test for a boundary family");
  criterion->add_option("family", family, "family expression, e.g. powlog(beta=0.6)")->required();
  criterion->add_option("--kappa", kappa, "kappa in (0,4]")->capture_default_str();
  criterion->add_option("--r", r_text, "start of the half-line (default per family)");
  criterion->add_option("--blocks", blocks, "block count (>= 8)")->capture_default_str();
  criterion->footer(kFamilyHelp);

  Common ver;
  std::string manifest;
  auto* verify = app.add_subcommand("verify", "rerun a manifest and compare the CSV digest");
  verify->add_option("manifest", manifest, "manifest.txt")->required();
  verify->add_option("--threads", ver.threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*experiment) return cmd_experiment(exp);
    if (*criterion) return cmd_criterion(family, kappa, r_text, blocks);
    if (*verify) return cmd_verify(manifest, ver);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const sle::DomainError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
