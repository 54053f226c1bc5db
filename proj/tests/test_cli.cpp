#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "achopf/acceptance.hpp"
#include "achopf/config.hpp"
#include "achopf/rates.hpp"
#include "achopf/report.hpp"

using namespace achopf;

namespace {

const std::string kParams =
    "params.Pr = 2\n"
    "params.d = 0.1\n"
    "params.R2 = 44.721359549995796\n"
    "params.alpha = 2.2214414690791831\n";

}  // namespace

TEST_CASE("config: defaults and overrides") {
  const RunConfig c = parse_config(kParams + "grid.eps = 0.1, 0.05  # two values\ntruncation.M = 4\nrun.svg = true\n");
  CHECK(c.params.Pr == 2);
  CHECK(c.eps_grid == std::vector<double>{0.1, 0.05});
  CHECK(c.M == 4);
  CHECK(c.svg);
  CHECK(c.trunc.j_max == 16);
  CHECK(c.seed == 20240601u);
  CHECK(c.omega_grid.size() == 7u);
}

TEST_CASE("config: errors name the line and the key") {
  CHECK_THROWS_WITH_AS(parse_config(kParams + "grid.bogus = 1\n", "x.cfg"), doctest::Contains("x.cfg:5: grid.bogus: unknown key"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(kParams + "params.Pr = 3\n"), doctest::Contains("key given twice"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("# comment\nparams.Pr = abc\n"), doctest::Contains(":2: params.Pr"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("params.Pr = 2\nparams.d = 0.1\nparams.alpha = 1\n"),
                       doctest::Contains("missing required key 'params.R2'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(kParams + "truncation.M = 2.5\n"), doctest::Contains("integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(kParams + "just words\n"), doctest::Contains("section.key = value"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/achopf.cfg"), ConfigError);
}

TEST_CASE("config: validation") {
  RunConfig c = parse_config(kParams);
  CHECK_NOTHROW(validate_config(c));
  c.eps_grid = {0.5};
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config(kParams);
  c.omega_grid = {0.3};
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = parse_config(kParams);
  c.params.Pr = -1;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
}

TEST_CASE("config: canonical text round trip") {
  RunConfig c = parse_config(kParams + "grid.radii = 1e-3, 1e-4, 1e-5\nrun.seed = 17\nenergy.c0 = 0.005\n");
  c.output_dir = "some dir";
  const std::string t = config_to_text(c);
  const RunConfig d = parse_config(t);
  CHECK(config_to_text(d) == t);
  CHECK(d.radii == c.radii);
  CHECK(d.seed == 17u);
  CHECK(d.energy_c0 == 0.005);
  CHECK(d.output_dir == "some dir");
  CHECK(d.params.R2 == c.params.R2);
}

TEST_CASE("rates: synthetic series") {
  const std::vector<double> x{0.1, 0.05, 0.025, 0.0125, 0.00625};
  std::vector<double> e2, ep, ec;
  for (size_t i = 0; i < x.size(); ++i) {
    e2.push_back(x[i] * x[i]);
    ep.push_back(x[i] * x[i] * (1 + 0.1 * ((i % 2) ? 1 : -1)));
    ec.push_back(1.0);
  }
  const RateFit f2 = fit_rate(x, e2);
  CHECK(std::abs(f2.slope - 2) <= 1e-12);
  CHECK(f2.r_squared == doctest::Approx(1.0));
  CHECK(f2.monotone);
  CHECK(f2.converging);
  const RateFit fp = fit_rate(x, ep);
  CHECK(fp.slope >= 1.9);
  CHECK(fp.slope <= 2.1);
  const RateFit fc = fit_rate(x, ec);
  CHECK_FALSE(fc.converging);
  const RateFit fz = fit_rate(x, {0.01, 0.0, 6.25e-4, 1.5625e-4, 3.90625e-5});
  CHECK(fz.warnings.size() == 1u);
  CHECK(fz.xs.size() == 4u);
  CHECK_THROWS_AS(fit_rate({1, 2, 3}, {1, 0, -1}), InvalidInput);
  CHECK(spread_ratio({2, 4, 3}) == 2);
  CHECK(std::isinf(spread_ratio({1, 0})));
  CHECK(median({3, 1, 2}) == 2);
}

TEST_CASE("report: CSV keeps 17 significant digits; JSON parses") {
  ReportBundle b;
  b.subcommand = "demo";
  Table& t = b.table("t.csv", {"x", "y"});
  t.add({1.0 / 3.0, 0.1});
  CHECK_THROWS(t.add({1.0}));
  const std::string csv = t.to_csv();
  CHECK(csv.find("x,y") == 0);
  CHECK(csv.find("0.33333333333333331") != std::string::npos);
  CHECK(std::stod(fmt17(0.1)) == 0.1);
  b.check(1, "one", true, "fine");
  CHECK(b.passed());
  b.check(2, "two", false, "broken");
  CHECK_FALSE(b.passed());
  b.json["z"] = to_json(cplx(1, -2));
  const auto j = nlohmann::json::parse(render_json(b));
  CHECK(j["results"]["z"][1] == -2.0);
  CHECK(render_summary(b).find("two") != std::string::npos);
  Chart c{"c.svg", "title", "x", "y", true, false, {{"s", {{1, 2}, {10, 3}}}}};
  CHECK(render_svg(c).find("<svg") != std::string::npos);
}

TEST_CASE("subcommands: names and a cheap pipeline") {
  CHECK(subcommands().size() == 10u);
  RunConfig c = parse_config(kParams + "stokes.n_max = 4\n");
  CHECK_THROWS_AS(run_subcommand("nope", c), InvalidInput);
  const ReportBundle a = run_subcommand("stokes-check", c);
  const ReportBundle b = run_subcommand("stokes-check", c);
  CHECK(a.passed());
  CHECK(render_json(a) == render_json(b));
  REQUIRE_FALSE(a.checks.empty());
  CHECK(a.checks.back().id == 12);
}

TEST_CASE("shipped default config matches the built-in defaults") {
  const RunConfig shipped = load_config(std::string(ACHOPF_SOURCE_DIR) + "/configs/default.cfg");
  const RunConfig builtin = parse_config(kParams);
  CHECK(config_to_text(shipped) == config_to_text(builtin));
}
