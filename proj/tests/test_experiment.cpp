#include <cmath>
#include <string>

#include "doctest.h"
#include "slelab/errors.hpp"
#include "slelab/experiment.hpp"

using namespace sle;
using doctest::Approx;

namespace {

std::size_t column(const ResultTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i] == name) return i;
  }
  FAIL("missing column " << name);
  return 0;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = Config::parse("# comment\nkappa = 6\n\nx=1  # trailing\nkappa=3\n");
  CHECK(c.get("kappa") == "3");
  CHECK(c.get("x") == "1");
  CHECK(!c.has("y"));
  CHECK(c.entries().size() == 2);
  try {
    Config::parse("kappa=6\nbroken line\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.position() == 8);
  }
  Config d;
  d.apply_override("eps=0.1,0.2");
  CHECK(d.get("eps") == "0.1,0.2");
  CHECK_THROWS_AS(d.apply_override("eps"), ParseError);
  CHECK(Config::parse(d.text()).get("eps") == "0.1,0.2");
}

TEST_CASE("list splitting respects parentheses") {
  CHECK(split_list("1, 2 ,3") == std::vector<std::string>{"1", "2", "3"});
  CHECK(split_list("powlog(beta=1,r=3),const(c=0.1)") ==
        std::vector<std::string>{"powlog(beta=1,r=3)", "const(c=0.1)"});
}

TEST_CASE("spec from config") {
  Config c;
  c.set("kind", "point_prob");
  c.set("seed", "42");
  c.set("meta.version", "0");
  c.set("x", "2");
  const auto s = ExperimentSpec::from_config(c);
  CHECK(s.kind == ExperimentKind::point_prob);
  CHECK(s.seed == 42);
  CHECK(s.params.get("x") == "2");
  CHECK(s.params.get("kappa") == "6");
  CHECK(!s.params.has("meta.version"));

  const auto again = ExperimentSpec::from_config(s.echo());
  CHECK(again.params.text() == s.params.text());
  CHECK(again.seed == 42);

  c.set("bogus", "1");
  CHECK_THROWS_AS(ExperimentSpec::from_config(c), ParameterError);
  CHECK_THROWS_AS(ExperimentSpec::from_config(Config{}), ParameterError);
  CHECK(!parse_kind("nope"));
}

TEST_CASE("point_prob row carries the closed form") {
  Config c;
  c.set("n", "200");
  auto s = ExperimentSpec::from_config(c, ExperimentKind::point_prob);
  const auto t = run_experiment(s);
  REQUIRE(t.rows.size() == 1);
  CHECK(std::stod(t.rows[0][column(t, "exact_or_bound")]) == Approx(0.79370).epsilon(1e-5));
  CHECK(t.rows[0][column(t, "status")] == "ok");
  CHECK(t.csv() == run_experiment(s).csv());
}

TEST_CASE("list values expand to one row per combination") {
  Config c;
  c.set("n", "100");
  c.set("x", "1,2");
  c.set("eps", "0.5,1,3");
  const auto t = run_experiment(ExperimentSpec::from_config(c, ExperimentKind::point_prob));
  CHECK(t.rows.size() == 6);
  CHECK(t.failed_rows == 0);
}

TEST_CASE("bad rows are marked, not fatal") {
  Config c;
  c.set("n", "100");
  c.set("kappa", "6,9");
  const auto t = run_experiment(ExperimentSpec::from_config(c, ExperimentKind::point_prob));
  REQUIRE(t.rows.size() == 2);
  CHECK(t.failed_rows == 1);
  CHECK(t.rows[1][column(t, "status")].starts_with("error"));
  c.set("n", "10");
  CHECK(run_experiment(ExperimentSpec::from_config(c, ExperimentKind::point_prob)).failed_rows == 2);
}

TEST_CASE("strip method selection") {
  Config c;
  c.set("n", "100");
  c.set("kappa", "3");
  c.set("eps", "0.5,0.25");
  c.set("method", "conditioned");
  const auto t = run_experiment(ExperimentSpec::from_config(c, ExperimentKind::strip_hit));
  REQUIRE(t.rows.size() == 2);
  CHECK(t.failed_rows == 0);
  c.set("method", "importance");
  const auto bad = run_experiment(ExperimentSpec::from_config(c, ExperimentKind::strip_hit));
  CHECK(bad.failed_rows == 1);
  CHECK(bad.rows[0][column(bad, "status")].starts_with("error: method"));
}

TEST_CASE("criterion kind reports verdicts") {
  Config c;
  c.set("family", "powlog(beta=0.6),powlog(beta=0.5)");
  const auto t = run_experiment(ExperimentSpec::from_config(c, ExperimentKind::criterion));
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][column(t, "verdict")] == "bounded");
  CHECK(t.rows[1][column(t, "verdict")] == "unbounded");
  CHECK(t.rows[0][column(t, "analytic")] == "bounded");
}

TEST_CASE("simulate outputs") {
  Config zero;
  zero.set("t_max", "0");
  const auto z = run_simulation(zero);
  CHECK(z.columns == std::vector<std::string>{"step", "t", "re", "im"});
  REQUIRE(z.rows.size() == 1);
  CHECK(z.rows[0] == std::vector<std::string>{"0", "0", "0", "0"});

  Config flat;
  flat.set("zero_drive", "1");
  flat.set("t_max", "1");
  flat.set("dt", "0.001");
  flat.set("points", "20");
  const auto f = run_simulation(flat);
  CHECK(f.rows.size() >= 20);
  for (const auto& r : f.rows) {
    CHECK(std::fabs(std::stod(r[2])) < 1e-6);
    CHECK(std::stod(r[3]) == Approx(2.0 * std::sqrt(std::stod(r[1]))).epsilon(1e-6));
  }

  Config rnd;
  rnd.set("kappa", "3");
  rnd.set("seed", "5");
  CHECK(sha256_hex(run_simulation(rnd).csv()) == sha256_hex(run_simulation(rnd).csv()));
  rnd.set("colour", "red");
  CHECK_THROWS_AS(run_simulation(rnd), ParameterError);
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.version = "1.2.3";
  m.command = "experiment";
  m.spec.set("kind", "point_prob");
  m.spec.set("x", "1,2");
  m.duration_s = 1.5;
  m.threads = 2;
  m.digests["results.csv"] = sha256_hex("abc");
  const auto p = RunManifest::parse(m.text());
  CHECK(p.version == m.version);
  CHECK(p.command == m.command);
  CHECK(p.spec.text() == m.spec.text());
  CHECK(p.threads == 2);
  CHECK(p.digests == m.digests);
  CHECK(m.digests["results.csv"] == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("csv quoting and svg rendering") {
  ResultTable t;
  t.columns = {"a", "b"};
  t.rows = {{"1", "x,y"}, {"2", "say \"hi\""}};
  CHECK(t.csv() == "a,b\n1,\"x,y\"\n2,\"say \"\"hi\"\"\"\n");

  Plot p;
  p.title = "t";
  p.series.push_back({"s", {1, 2, 3}, {1, 4, 9}, true});
  const auto svg = render_svg(p);
  CHECK(svg.starts_with("<svg"));
  CHECK(svg.find("polyline") != std::string::npos);
}
