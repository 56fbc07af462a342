#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "doctest.h"
#include "experiments.hpp"
#include "report.hpp"

using namespace occupation;
using namespace occupation::cli;

namespace {

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) {
    out.push_back(l);
  }
  return out;
}

/// CSV text with the wall_time_s column dropped.
std::string without_wall_time(const std::string& csv) {
  std::string out;
  for (const std::string& l : lines_of(csv)) {
    out += l.substr(0, l.rfind(',')) + "\n";
  }
  return out;
}

std::string csv_of(const std::vector<Row>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

Row row_with(Verdict v) {
  Row r;
  r.experiment = "x";
  r.quantity = "q";
  r.verdict = v;
  return r;
}

std::string error_of(const std::string& text) {
  try {
    validate_config(parse_config_text(text, "t.cfg"));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parsing: comments, blanks, whitespace") {
  const ExperimentConfig cfg = parse_config_text(
      "# header\n\nexperiment = tau-mass\n  seed=7   # trailing comment\nn=100\n", "t.cfg");
  CHECK(cfg.experiment == "tau-mass");
  CHECK(cfg.values.size() == 2);
  CHECK(cfg.values.at("seed") == "7");
  CHECK(cfg.values.at("n") == "100");
  CHECK(cfg.lines.at("n") == 5);
}

TEST_CASE("config parsing errors name the line") {
  CHECK_THROWS_WITH_AS(parse_config_text("seed=1\nseed=2\n", "t.cfg"), "t.cfg:2: duplicate key 'seed'",
                       ConfigParseError);
  CHECK_THROWS_WITH_AS(parse_config_text("seed=1\njunk\n", "t.cfg"), "t.cfg:2: expected key=value",
                       ConfigParseError);
  CHECK_THROWS_WITH_AS(parse_config_text("Seed=1\n", "t.cfg"), "t.cfg:1: invalid key 'Seed'",
                       ConfigParseError);
  CHECK_THROWS_WITH_AS(parse_config_text("\nn=\n", "t.cfg"), "t.cfg:2: field 'n' has no value",
                       ConfigParseError);
}

TEST_CASE("config validation: unknown experiment, unknown key, missing seed, bad values") {
  CHECK(error_of("experiment=nope\nseed=1\n").find("unknown experiment") != std::string::npos);
  CHECK(error_of("experiment=tau-mass\nseed=1\nwidth=3\n") ==
        "line 3: unknown key 'width' for experiment tau-mass");
  CHECK(error_of("experiment=tau-mass\nn=5\n") == "field 'seed': required but not set");
  CHECK(error_of("experiment=tau-mass\nseed=-4\n").find("field 'seed'") != std::string::npos);
  CHECK(error_of("experiment=tau-mass\nseed=4\n").empty());

  const ExperimentConfig bad = parse_config_text("experiment=tau-mass\nseed=1\nn=abc\n");
  CHECK_THROWS_WITH_AS(run_experiment(bad), "line 3: field 'n': expected a number, got 'abc'",
                       ConfigParseError);
  const ExperimentConfig frac = parse_config_text("experiment=tau-mass\nseed=1\nn=2.5\n");
  CHECK_THROWS_AS(run_experiment(frac), ConfigParseError);
  const ExperimentConfig range = parse_config_text("experiment=tau-mass\nseed=1\neps=0.5\nn=10\n");
  CHECK_THROWS_AS(run_experiment(range), ConfigError);
}

TEST_CASE("config round trip is idempotent") {
  std::mt19937_64 gen(3);
  const std::vector<std::string> keys{"a", "n", "seed", "tol", "f1", "z9", "kurt_dt", "b_2"};
  const std::vector<std::string> vals{"1", "disc(0.1,0,0.2)", "1e-5", "walk", "0.1,0.05", "x y"};
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig cfg;
    if (gen() % 2) {
      cfg.experiment = "exc-cov";
    }
    for (const auto& k : keys) {
      if (gen() % 2) {
        cfg.values[k] = vals[gen() % vals.size()];
      }
    }
    const std::string once = serialize(cfg);
    const ExperimentConfig back = parse_config_text(once);
    CHECK(back.experiment == cfg.experiment);
    CHECK(back.values == cfg.values);
    CHECK(serialize(back) == once);
  }
  const std::string text = "# c\nseed = 3\nexperiment=dirichlet\nboundary=sin\n";
  const std::string s1 = serialize(parse_config_text(text));
  CHECK(s1 == "experiment=dirichlet\nboundary=sin\nseed=3\n");
  CHECK(serialize(parse_config_text(s1)) == s1);
}

TEST_CASE("region syntax") {
  CHECK(parse_region("disc(0.1, -0.2, 0.3)") == Region::disc({0.1, -0.2}, 0.3));
  CHECK(parse_region("rect(0,0,0.5,0.25)") == Region::rect({0.0, 0.0}, {0.5, 0.25}));
  CHECK(parse_region(" empty ").is_empty());
  CHECK_THROWS_AS(parse_region("disc(0,0)"), ConfigParseError);
  CHECK_THROWS_AS(parse_region("ball(0,0,1)"), ConfigParseError);
  CHECK_THROWS_AS(parse_region("disc(0,0,x)"), ConfigParseError);
  CHECK_THROWS_AS(parse_region("disc(0,0,-1)"), ConfigError);
  for (const char* s : {"disc(0.1,-0.2,0.3)", "rect(0,0,0.5,0.25)", "empty"}) {
    CHECK(format_region(parse_region(s)) == s);
  }
}

TEST_CASE("number formatting uses nine significant digits") {
  CHECK(format_number(2.0 * kPi) == "6.28318531");
  CHECK(format_number(1e-12) == "1e-12");
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(123456789012.0) == "1.23456789e+11");
}

TEST_CASE("csv layout") {
  Row r = row_with(Verdict::pass);
  r.quantity = "a,b";
  r.estimate = 1.5;
  r.target = 1.0;
  r.seed = 9;
  const std::string csv = csv_of({r});
  const auto ls = lines_of(csv);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0] == "experiment,quantity,estimate,std_error,ci_lo,ci_hi,target,rel_err,verdict,"
                 "n_samples,eps,dt,seed,wall_time_s");
  CHECK(ls[1] == "x,\"a,b\",1.5,,,,1,,pass,,,,9,0");
  CHECK(csv.back() == '\n');
}

TEST_CASE("exit code contract") {
  using V = Verdict;
  CHECK(exit_code({row_with(V::pass), row_with(V::pass)}) == 0);
  CHECK(exit_code({row_with(V::pass), row_with(V::fail)}) == 2);
  CHECK(exit_code({row_with(V::underpowered), row_with(V::fail)}) == 2);
  CHECK(exit_code({row_with(V::pass), row_with(V::underpowered)}) == 3);
  for (V v : {V::pass, V::fail, V::underpowered}) {
    const auto ls = lines_of(csv_of({row_with(v)}));
    CHECK(ls[1].find("," + std::string(to_string(v)) + ",") != std::string::npos);
  }
}

TEST_CASE("every listed experiment has an identity and accepts its own defaults") {
  CHECK(experiments().size() == 11);
  for (const ExperimentInfo& e : experiments()) {
    CHECK(!e.identity.empty());
    ExperimentConfig cfg;
    cfg.experiment = e.id;
    cfg.values = e.defaults;
    cfg.values["seed"] = "1";
    CHECK_NOTHROW(validate_config(cfg));
    // Defaults survive the provenance round trip.
    std::ostringstream prov;
    write_provenance(prov, cfg);
    const ExperimentConfig back = parse_config_text(prov.str());
    CHECK(back.experiment == e.id);
    for (const auto& [k, v] : e.defaults) {
      CHECK(back.values.at(k) == v);
    }
  }
}

TEST_CASE("tau-mass row") {
  const ExperimentConfig cfg =
      parse_config_text("experiment=tau-mass\nseed=1\neps=0.05\ndt=1e-4\nn=200000\n");
  const auto rows = run_experiment(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].quantity == "mu(tau)");
  CHECK(format_number(*rows[0].target) == "6.28318531");
  CHECK(rows[0].verdict == Verdict::pass);
  CHECK(*rows[0].eps == 0.05);
  CHECK(rows[0].seed == 1);
}

TEST_CASE("quad-selfcheck rows") {
  const auto rows = run_experiment(parse_config_text("experiment=quad-selfcheck\nseed=1\n"));
  REQUIRE(rows.size() == 6);
  const double ys[3] = {0.3, 0.5, 0.7};
  for (int k = 0; k < 3; ++k) {
    const double l = std::log(ys[k]);
    CHECK(*rows[static_cast<std::size_t>(k)].target == doctest::Approx(l * l / (kPi * kPi)).epsilon(1e-15));
  }
  CHECK(exit_code(rows) == 0);
}

TEST_CASE("oracle-exact on a reduced model set") {
  const auto rows =
      run_experiment(parse_config_text("experiment=oracle-exact\nseed=5\nrandom_models=10\n"));
  REQUIRE(rows.size() == 3);
  for (const Row& r : rows) {
    CHECK(r.verdict == Verdict::pass);
    CHECK(*r.std_error <= 1e-10);
  }
}

TEST_CASE("csv estimate columns do not depend on the worker count") {
  const std::string base = "experiment=exc-cov\nseed=11\neps=0.05\ndt=1e-4\nn=20000\ntasks=8\n";
  const std::string one = csv_of(run_experiment(parse_config_text(base + "workers=1\n")));
  const std::string again = csv_of(run_experiment(parse_config_text(base + "workers=1\n")));
  const std::string three = csv_of(run_experiment(parse_config_text(base + "workers=3\n")));
  CHECK(without_wall_time(one) == without_wall_time(again));
  CHECK(without_wall_time(one) == without_wall_time(three));
  const std::string other = csv_of(run_experiment(parse_config_text(
      "experiment=exc-cov\nseed=12\neps=0.05\ndt=1e-4\nn=20000\ntasks=8\n")));
  CHECK(without_wall_time(one) != without_wall_time(other));
}
