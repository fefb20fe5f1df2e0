#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "riskdep/cli.hpp"
#include "riskdep/distributions.hpp"
#include "riskdep/errors.hpp"
#include "riskdep/io.hpp"
#include "riskdep/scenario.hpp"

namespace fs = std::filesystem;
using namespace riskdep;
using Json = nlohmann::ordered_json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("riskdep-unit-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write(const fs::path& p, const std::string& text) {
  io::write_file_atomic(p, text);
  return p.string();
}

Json read_json(const fs::path& p) { return Json::parse(io::read_file(p)); }

const char* kSingleCell = R"({
  "seed": 5,
  "cells": [{"theta_lambda": 5, "alpha": 2, "volume": 1}],
  "bayes": {"prior_a": 2, "prior_b": 2.5, "xi": 2},
  "chain": {"iterations": 50000, "burnin": 10000}
})";

}  // namespace

TEST_CASE("counts and experts csv round trip") {
  const bayes::Dataset d{3, 2, 1, {4, 5, 0, 12, 7, 3}, {2.0, 8.25}};
  auto back = io::parse_counts_csv(io::counts_csv(d), "counts");
  io::parse_experts_csv(io::experts_csv(d), "experts", back);
  CHECK(back == d);

  CHECK_THROWS_AS(io::parse_counts_csv("year,cell_1\n1,2.5\n", "c"), ValidationError);
  CHECK_THROWS_AS(io::parse_counts_csv("year,cell_1\n1,-2\n", "c"), ValidationError);
  CHECK_THROWS_AS(io::parse_counts_csv("year,cell_1,cell_2\n1,2\n", "c"), ValidationError);
  bayes::Dataset e = back;
  CHECK_THROWS_AS(io::parse_experts_csv("expert,cell_1,cell_2\n1,-2,3\n", "e", e), ValidationError);
  io::parse_experts_csv("", "e", e);
  CHECK(e.experts_count == 0);
  CHECK(e.experts.empty());
}

TEST_CASE("samples csv is lossless") {
  mcmc::PosteriorSamples s;
  s.cells = 2;
  s.states = {{{1.0 / 3.0, 5.123456789012345}, {}, 0.9}, {{2e-9, 7.0}, {}, -0.25}};
  const auto back = io::parse_samples_csv(io::samples_csv(s), "samples");
  REQUIRE(back.states.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.states[i].theta == s.states[i].theta);
    CHECK(back.states[i].rho == s.states[i].rho);
  }
  CHECK(io::format_number(1.23456, io::kSummaryDigits) == "1.235");
  CHECK(std::stod(io::format_number(0.1, io::kSampleDigits)) == 0.1);
}

TEST_CASE("scenario parsing is strict and names the offending path") {
  const auto s = scenario::parse_scenario_text(kSingleCell, "single");
  CHECK(s.cells.size() == 1);
  CHECK(s.cells[0].severity_mu_psi == 2.0);
  CHECK(s.bayes->prior_b == std::vector<double>{2.5});
  const auto again = scenario::parse_scenario(scenario::to_json(s));
  CHECK(scenario::to_json(again) == scenario::to_json(s));

  try {
    scenario::parse_scenario_text(R"({"cells": [{"theta_lambda": 5, "alpha": 2}, {"theta_lambda": 5, "alpah": 2}]})", "bad");
    FAIL("accepted an unknown key");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("$.cells[1]") != std::string::npos);
    CHECK(std::string(e.what()).find("alpah") != std::string::npos);
  }
  CHECK_THROWS_AS(scenario::parse_scenario_text(R"({"cells": [{"theta_lambda": 5, "alpha": -2}]})", "bad"),
                  ValidationError);
  CHECK_THROWS_AS(scenario::parse_scenario_text("{not json", "bad"), ValidationError);
  CHECK_THROWS_AS(scenario::parse_scenario_text(
                      R"({"cells": [{"theta_lambda": 5}], "copulas": {"frequency": {"family": "clayton", "rho": -1}}})",
                      "bad"),
                  ValidationError);
}

TEST_CASE("simulate writes the annual loss table") {
  const auto dir = scratch("simulate");
  const auto r = invoke({"simulate", SCENARIO_DIR "/annual_losses.json", "--years", "3", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  const auto t = io::parse_csv(io::read_file(dir / "a" / "annual_losses.csv"), "t");
  CHECK(t.header == std::vector<std::string>{"year", "cell", "lambda", "psi", "count", "loss", "total"});
  CHECK(t.rows.size() == 9);
  std::size_t totals = 0;
  for (const auto& row : t.rows) {
    if (row[1] == "total") {
      ++totals;
      continue;
    }
    CHECK(std::stod(row[5]) >= 0.0);
  }
  CHECK(totals == 3);

  const auto zero = write(dir / "zero.json", R"({"seed": 3, "cells": [{"theta_lambda": 0, "alpha": 2}, {"theta_lambda": 4, "alpha": 2}]})");
  REQUIRE(invoke({"simulate", zero, "--years", "50", "--out", (dir / "z").string()}).code == 0);
  for (const auto& row : io::parse_csv(io::read_file(dir / "z" / "annual_losses.csv"), "z").rows)
    if (row[1] == "1") CHECK(std::stod(row[5]) == 0.0);
}

TEST_CASE("replay reproduces every output byte for byte") {
  const auto dir = scratch("replay");
  REQUIRE(invoke({"simulate", SCENARIO_DIR "/annual_losses.json", "--years", "20", "--out", (dir / "a").string()}).code ==
          0);
  REQUIRE(invoke({"replay", (dir / "a" / "manifest.json").string(), "--out", (dir / "b").string()}).code == 0);
  CHECK(io::read_file(dir / "a" / "annual_losses.csv") == io::read_file(dir / "b" / "annual_losses.csv"));
  const auto m = read_json(dir / "a" / "manifest.json");
  CHECK(m["outputs"][0]["fnv1a64"] == read_json(dir / "b" / "manifest.json")["outputs"][0]["fnv1a64"]);
  CHECK(m["version"] == cli::kVersion);
  CHECK(m["seed"] == 7);
  CHECK(m.contains("wall_clock_seconds"));
  CHECK(m["scenario"]["cells"].size() == 2);
}

TEST_CASE("fit on the single cell fixture matches quadrature") {
  const auto dir = scratch("fit");
  const auto scen = write(dir / "s.json", kSingleCell);
  const auto counts = write(dir / "n.csv", "year,cell_1\n1,4\n2,6\n3,5\n4,3\n5,7\n");
  const auto experts = write(dir / "d.csv", "expert,cell_1\n1,2\n");
  const auto r = invoke({"fit", scen, counts, experts, "--out", (dir / "f").string()});
  REQUIRE(r.code == 0);
  const auto summary = read_json(dir / "f" / "summary.json");
  const double mean = summary["parameters"][0]["mean"].get<double>();

  const auto s = scenario::parse_scenario_text(kSingleCell, "s");
  bayes::Dataset d{5, 1, 1, {4, 6, 5, 3, 7}, {2.0}};
  const auto cfg = s.bayes_config();
  const double shift = -bayes::single_cell_log_marginal_posterior(3.0, d, cfg);
  const auto f = [&](double th) { return std::exp(bayes::single_cell_log_marginal_posterior(th, d, cfg) + shift); };
  const double truth =
      oracle::integrate_ts([&](double th) { return th * f(th); }, 0.0, 80.0) / oracle::integrate_ts(f, 0.0, 80.0);
  CHECK(std::abs(mean / truth - 1.0) < 0.02);

  // No experts: K = 0 recorded in the manifest.
  const auto empty = write(dir / "none.csv", "");
  REQUIRE(invoke({"fit", scen, counts, empty, "--out", (dir / "k0").string()}).code == 0);
  CHECK(read_json(dir / "k0" / "manifest.json")["experts"] == 0);

  // Fit output round trip: counts re-read equal the input.
  const auto back = io::parse_counts_csv(io::read_file(counts), counts);
  CHECK(back.counts == d.counts);

  // Predict: the tower property and a complete VaR table.
  REQUIRE(invoke({"predict", (dir / "f").string(), "--draws", "40000", "--quantiles", "0.5,0.9"}).code == 0);
  const auto pred = io::parse_csv(io::read_file(dir / "f" / "predict" / "predictive.csv"), "p");
  std::vector<double> n;
  for (const auto& row : pred.rows) n.push_back(std::stod(row.back()));
  CHECK(std::abs(oracle::mean(n) - mean) < 3.0 * std::sqrt(oracle::variance(n) / n.size()) + 0.02 * mean);
  const auto var = io::parse_csv(io::read_file(dir / "f" / "predict" / "var.csv"), "v");
  REQUIRE(var.rows.size() == 3);
  CHECK(var.rows.back()[0] == "0.999");
  // The fit manifest is left intact.
  CHECK(read_json(dir / "f" / "manifest.json")["command"] == "fit");
}

TEST_CASE("predict from a point mass posterior matches the negative binomial quantile") {
  const auto dir = scratch("pointmass");
  const auto scen = write(dir / "s.json", R"({"seed": 2, "cells": [{"theta_lambda": 5, "alpha": 2, "volume": 3}],
    "bayes": {"prior_a": 2, "prior_b": 0.4, "xi": 2}, "chain": {"iterations": 200, "burnin": 50}})");
  const auto counts = write(dir / "n.csv", "year,cell_1\n1,4\n");
  REQUIRE(invoke({"fit", scen, counts, "--out", (dir / "f").string()}).code == 0);
  std::string samples = "draw,theta[1],rho\n";
  for (int i = 1; i <= 10; ++i) samples += std::to_string(i) + ",5,0\n";
  write(dir / "f" / "samples.csv", samples);
  REQUIRE(invoke({"predict", (dir / "f").string(), "--draws", "200000", "--resample", "--out", (dir / "p").string()}).code ==
          0);
  const auto var = io::parse_csv(io::read_file(dir / "p" / "var.csv"), "v");
  double cum = 0.0;
  std::int64_t q999 = 0;
  while ((cum += dist::neg_binomial_pmf(q999, 5.0, 3.0, 2.0)) < 0.999) ++q999;
  const double got = std::stod(var.rows.back()[1]);
  CHECK(std::abs(got - static_cast<double>(q999)) <= 3.0);
  const double median = std::stod(var.rows.front()[1]);
  CHECK(median > 0.0);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  // Validation: unknown scenario key, bad grid, unknown fixture, benchmark without lambda.
  const auto bad = write(dir / "bad.json", R"({"cells": [{"theta_lambda": 5}], "colupas": {}})");
  auto r = invoke({"simulate", bad, "--out", (dir / "x").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("colupas") != std::string::npos);
  r = invoke({"sweep", SCENARIO_DIR "/annual_losses.json", "--family", "clayton", "--rho-grid", "1,-2",
           "--years-per-point", "10", "--out", (dir / "s").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("-2") != std::string::npos);
  CHECK(invoke({"experiment", "--fixture", "nope", "--out", (dir / "e").string()}).code == cli::kValidation);
  CHECK(invoke({"frobnicate"}).code == cli::kValidation);
  const auto scen = write(dir / "s.json", kSingleCell);
  const auto counts = write(dir / "n.csv", "year,cell_1\n1,4\n");
  r = invoke({"fit", scen, counts, "--mode", "benchmark", "--out", (dir / "b").string()});
  CHECK(r.code == cli::kValidation);
  CHECK(r.err.find("--lambda") != std::string::npos);
  const auto two = write(dir / "two.csv", "year,cell_1,cell_2\n1,4,5\n");
  CHECK(invoke({"fit", scen, two, "--out", (dir / "m").string()}).code == cli::kValidation);
  const auto frac = write(dir / "frac.csv", "year,cell_1\n1,4.5\n");
  CHECK(invoke({"fit", scen, frac, "--out", (dir / "q").string()}).code == cli::kValidation);

  // IO: missing inputs and missing fit artifacts.
  CHECK(invoke({"simulate", (dir / "missing.json").string(), "--out", (dir / "x").string()}).code == cli::kIo);
  CHECK(invoke({"fit", scen, (dir / "missing.csv").string(), "--out", (dir / "y").string()}).code == cli::kIo);
  CHECK(invoke({"predict", (dir / "nothing").string()}).code == cli::kIo);

  // Numerical: a shrinkage budget of one step exhausts far above the threshold.
  const auto tight = write(dir / "tight.json", R"({"seed": 1, "cells": [{"theta_lambda": 5, "alpha": 2}],
    "bayes": {"prior_a": 2, "prior_b": 0.4, "xi": 2}, "exhaustion_threshold": 0.001,
    "chain": {"iterations": 500, "burnin": 100, "theta_slice": {"width": 1000, "max_shrink": 1},
              "lambda_slice": {"width": 1000, "max_shrink": 1}}})");
  r = invoke({"fit", tight, counts, "--out", (dir / "n").string()});
  CHECK(r.code == cli::kNumerical);
  const auto m = read_json(dir / "n" / "manifest.json");
  CHECK(m["status"] == "numerical-failure");
  CHECK(m["slice_exhausted"].get<int>() > 0);
}

TEST_CASE("experiment command writes the tables layout") {
  const auto dir = scratch("experiment");
  const auto r = invoke({"experiment", "--fixture", "table5", "--replicates", "1", "--iterations", "300", "--years", "1,2",
                      "--out", (dir / "t").string()});
  REQUIRE(r.code == 0);
  const auto t = io::parse_csv(io::read_file(dir / "t" / "report.csv"), "r");
  CHECK(t.header == std::vector<std::string>{"family", "mode", "parameter", "1", "2"});
  bool rho = false;
  for (const auto& row : t.rows) {
    rho = rho || row[2] == "rho";
    CHECK(row[3].find('(') != std::string::npos);
  }
  CHECK(rho);
  REQUIRE(invoke({"replay", (dir / "t" / "manifest.json").string(), "--out", (dir / "u").string()}).code == 0);
  CHECK(io::read_file(dir / "t" / "report.csv") == io::read_file(dir / "u" / "report.csv"));
  CHECK(io::read_file(dir / "t" / "report.json") == io::read_file(dir / "u" / "report.json"));
}
