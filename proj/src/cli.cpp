#include "riskdep/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "riskdep/errors.hpp"
#include "riskdep/experiments.hpp"
#include "riskdep/io.hpp"
#include "riskdep/scenario.hpp"

namespace riskdep::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Everything a command needs; also what the manifest records for replay.
struct Invocation {
  std::string command;
  Json args = Json::object();
  std::optional<scenario::ScenarioFile> scen;
  fs::path out_dir;
};

struct Outputs {
  std::vector<std::string> files;
  Json extra = Json::object();
  // Set when outputs were written but the run must still exit as a numerical failure.
  std::optional<std::string> numerical_failure;
};

void write_output(const fs::path& dir, const std::string& name, const std::string& content, Outputs& outs) {
  io::write_file_atomic(dir / name, content);
  outs.files.push_back(name);
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

const scenario::ScenarioFile& need_scenario(const Invocation& inv) {
  if (!inv.scen) throw ValidationError(inv.command + " needs --scenario");
  return *inv.scen;
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

// ---- commands --------------------------------------------------------------

Outputs cmd_simulate(const Invocation& inv) {
  const auto& s = need_scenario(inv);
  const std::size_t years = inv.args.value("years", static_cast<std::size_t>(s.years));
  RngStream rng(s.seed, stream_id_for("simulate"));
  const auto table = loss::simulate_annual_losses(s.loss_spec(years), rng);
  Outputs outs;
  write_output(inv.out_dir, "annual_losses.csv", io::annual_loss_csv(table), outs);
  return outs;
}

Outputs cmd_sweep(const Invocation& inv) {
  const auto& s = need_scenario(inv);
  const auto family = copula::family_from_string(inv.args.at("family").get<std::string>());
  std::vector<double> grid = inv.args.value("rho_grid", std::vector<double>{});
  if (grid.empty()) grid = loss::default_rho_grid(family);
  const std::size_t years = inv.args.value("years_per_point", static_cast<std::size_t>(10000));
  RngStream rng(s.seed, stream_id_for("sweep"));
  const auto points = loss::dependence_sweep(s.loss_spec(1), family, grid, years, rng);
  Outputs outs;
  write_output(inv.out_dir, "sweep.csv", io::sweep_csv(family, points), outs);
  return outs;
}

Outputs cmd_fit(const Invocation& inv) {
  const auto& s = need_scenario(inv);
  const std::string counts_path = inv.args.at("counts").get<std::string>();
  bayes::Dataset data = io::parse_counts_csv(io::read_file(counts_path), counts_path);
  if (data.cells != s.cells.size()) {
    throw ValidationError(counts_path + ": " + std::to_string(data.cells) + " cell columns but the scenario has " +
                          std::to_string(s.cells.size()) + " cells");
  }
  if (inv.args.contains("experts")) {
    const std::string p = inv.args.at("experts").get<std::string>();
    io::parse_experts_csv(io::read_file(p), p, data);
  }
  data.validate();

  const auto mode = experiments::mode_from_string(inv.args.value("mode", std::string("joint")));
  const bool estimate_rho = inv.args.value("estimate_rho", false);
  bayes::BayesConfig cfg = s.bayes_config();
  mcmc::ChainConfig ccfg = s.chain;
  ccfg.update_rho = estimate_rho && mode == experiments::Mode::Joint;
  ccfg.fixed_rho = s.bayes->rho;
  RngStream rng(s.seed, stream_id_for("fit-" + experiments::to_string(mode)));

  mcmc::PosteriorSamples samples;
  switch (mode) {
    case experiments::Mode::Joint:
      samples = mcmc::run_chain(data, cfg, ccfg, std::nullopt, rng);
      break;
    case experiments::Mode::Benchmark: {
      if (!inv.args.contains("lambda")) throw ValidationError("--mode benchmark requires --lambda (true intensities CSV)");
      const std::string p = inv.args.at("lambda").get<std::string>();
      const auto lambda = io::parse_lambda_csv(io::read_file(p), p, data.years, data.cells);
      samples = mcmc::run_benchmark_chain(data, cfg, ccfg, lambda, rng);
      break;
    }
    case experiments::Mode::Marginal: {
      // Independent single-cell chains, zipped state by state.
      samples.cells = data.cells;
      samples.years = data.years;
      for (std::size_t j = 0; j < data.cells; ++j) {
        bayes::BayesConfig one{{cfg.cells[j]}, copula::Family::Independence,
                               bayes::default_rho_range(copula::Family::Independence)};
        RngStream cell_rng = rng.split(j);
        const auto r = mcmc::run_chain(data.cell(j), one, ccfg, std::nullopt, cell_rng);
        if (j == 0) samples.states.resize(r.states.size(), bayes::ChainState{{}, {}, 0.0});
        for (std::size_t i = 0; i < r.states.size(); ++i) samples.states[i].theta.push_back(r.states[i].theta[0]);
        samples.theta_stats.steps += r.theta_stats.steps;
        samples.theta_stats.exhausted += r.theta_stats.exhausted;
        samples.lambda_stats.steps += r.lambda_stats.steps;
        samples.lambda_stats.exhausted += r.lambda_stats.exhausted;
        samples.iterations_run = r.iterations_run;
      }
      break;
    }
  }
  const bool include_rho = mode != experiments::Mode::Marginal && cfg.family != copula::Family::Independence;
  Outputs outs;
  write_output(inv.out_dir, "samples.csv", io::samples_csv(samples), outs);
  write_output(inv.out_dir, "summary.json", io::summary_json(mcmc::summarize(samples, include_rho), samples, data.experts_count),
               outs);
  outs.extra["experts"] = data.experts_count;
  outs.extra["years"] = data.years;
  outs.extra["retained"] = samples.states.size();
  outs.extra["slice_exhausted"] = samples.total_exhausted();

  const double steps = static_cast<double>(std::max<std::uint64_t>(1, samples.total_steps()));
  if (static_cast<double>(samples.total_exhausted()) / steps > s.exhaustion_threshold) {
    outs.numerical_failure = "slice sampler exhausted its shrinkage budget in " +
                             std::to_string(samples.total_exhausted()) + " of " +
                             std::to_string(samples.total_steps()) + " updates";
  }
  return outs;
}

Outputs cmd_predict(const Invocation& inv) {
  const fs::path fit_dir = inv.args.at("fit").get<std::string>();
  const fs::path manifest_path = fit_dir / "manifest.json";
  const fs::path samples_path = fit_dir / "samples.csv";
  if (!fs::exists(manifest_path) || !fs::exists(samples_path)) {
    throw IoError("fit directory '" + fit_dir.string() + "' lacks manifest.json or samples.csv");
  }
  Json fit_manifest;
  try {
    fit_manifest = Json::parse(io::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  if (fit_manifest.value("command", std::string()) != "fit") throw ValidationError(manifest_path.string() + ": not a fit manifest");
  const auto s = scenario::parse_scenario(fit_manifest.at("scenario"));
  auto samples = io::parse_samples_csv(io::read_file(samples_path), samples_path.string());
  if (samples.cells != s.cells.size()) throw ValidationError("samples do not match the fit scenario's cell count");

  bayes::BayesConfig cfg = s.bayes_config();
  if (fit_manifest.at("args").value("mode", std::string("joint")) == "marginal") cfg.family = copula::Family::Independence;

  std::optional<std::vector<experiments::SeverityParams>> sev;
  if (inv.args.value("losses", false)) {
    sev.emplace();
    for (const auto& c : s.cells) sev->push_back({c.severity_mu_psi, c.severity_omega_psi, c.severity_sigma});
  }
  const std::size_t draws = inv.args.value("draws", samples.states.size());
  std::vector<double> quantiles = inv.args.value("quantiles", std::vector<double>{0.5, 0.9, 0.99});
  if (std::find(quantiles.begin(), quantiles.end(), 0.999) == quantiles.end()) quantiles.push_back(0.999);
  for (double q : quantiles) {
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile " + io::format_number(q, 6) + " is outside [0, 1]");
  }
  std::sort(quantiles.begin(), quantiles.end());
  RngStream rng(s.seed, stream_id_for("predict"));
  const auto p = experiments::sample_full_predictive(samples, cfg, sev, draws, inv.args.value("resample", false), rng);
  Outputs outs;
  write_output(inv.out_dir, "predictive.csv", io::predictive_csv(p), outs);
  write_output(inv.out_dir, "var.csv", io::var_csv(p, quantiles), outs);
  return outs;
}

Outputs cmd_experiment(const Invocation& inv) {
  const std::string fixture = inv.args.at("fixture").get<std::string>();
  const bool paper = inv.args.value("paper_scale", false);
  const std::uint64_t seed = inv.args.value("seed", std::uint64_t{20090101});
  auto plans = experiments::fixture_plans(fixture, paper, seed);
  experiments::ExperimentReport report;
  report.name = fixture;
  for (auto& plan : plans) {
    if (inv.args.contains("replicates")) plan.replicates = inv.args.at("replicates").get<std::size_t>();
    if (inv.args.contains("iterations")) {
      plan.chain.iterations = inv.args.at("iterations").get<std::size_t>();
      plan.chain.burnin = plan.chain.iterations / 5;
    }
    if (inv.args.contains("years")) plan.year_subsets = inv.args.at("years").get<std::vector<std::size_t>>();
    report.append(plan.estimate_rho ? experiments::run_joint_rho_experiment(plan) : experiments::run_experiment(plan));
  }
  Outputs outs;
  write_output(inv.out_dir, "report.csv", io::report_csv(report), outs);
  write_output(inv.out_dir, "report.json", io::report_json(report), outs);
  outs.extra["slice_exhausted"] = report.total_exhausted();
  return outs;
}

Outputs dispatch(const Invocation& inv) {
  if (inv.command == "simulate") return cmd_simulate(inv);
  if (inv.command == "sweep") return cmd_sweep(inv);
  if (inv.command == "fit") return cmd_fit(inv);
  if (inv.command == "predict") return cmd_predict(inv);
  if (inv.command == "experiment") return cmd_experiment(inv);
  throw ValidationError("unknown command '" + inv.command + "'");
}

// Runs the command and writes its manifest, also when a numerical failure
// is reported after the outputs were written.
void execute(const Invocation& inv, std::ostream& out) {
  ensure_out_dir(inv.out_dir);
  const auto start = std::chrono::steady_clock::now();
  Json manifest;
  manifest["command"] = inv.command;
  manifest["version"] = kVersion;
  manifest["args"] = inv.args;
  if (inv.scen) {
    manifest["seed"] = inv.scen->seed;
    manifest["scenario"] = scenario::to_json(*inv.scen);
  } else if (inv.args.contains("seed")) {
    manifest["seed"] = inv.args.at("seed");
  }
  manifest["out"] = absolute(inv.out_dir.string());

  auto finish = [&](const Outputs& outs, const std::string& status) {
    manifest["status"] = status;
    for (auto it = outs.extra.begin(); it != outs.extra.end(); ++it) manifest[it.key()] = it.value();
    auto& files = manifest["outputs"] = Json::array();
    for (const auto& f : outs.files) files.push_back({{"file", f}, {"fnv1a64", io::file_digest(inv.out_dir / f)}});
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_file_atomic(inv.out_dir / "manifest.json", manifest.dump(2) + "\n");
    for (const auto& f : outs.files) out << (inv.out_dir / f).string() << "\n";
  };

  const Outputs outs = dispatch(inv);
  if (outs.numerical_failure) {
    finish(outs, "numerical-failure");
    throw NumericalError(*outs.numerical_failure);
  }
  finish(outs, "ok");
}

Invocation from_manifest(const fs::path& path, const std::optional<std::string>& out_override) {
  Json m;
  try {
    m = Json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  Invocation inv;
  try {
    inv.command = m.at("command").get<std::string>();
    inv.args = m.at("args");
    if (m.contains("scenario")) inv.scen = scenario::parse_scenario(m.at("scenario"));
    inv.out_dir = out_override ? fs::path(*out_override) : fs::path(m.at("out").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": malformed manifest: " + e.what());
  }
  return inv;
}

scenario::ScenarioFile load_scenario(const std::string& path) {
  return scenario::parse_scenario_text(io::read_file(path), path);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operational-risk loss simulation and Bayesian copula estimation", "riskdep"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string scenario_path, out_dir, family, counts, experts, lambda, mode = "joint", fit_dir, fixture, manifest;
  std::optional<std::string> replay_out;
  std::size_t years = 0, years_per_point = 10000, draws = 0, replicates = 0, iterations = 0;
  std::vector<double> rho_grid, quantiles;
  std::vector<std::size_t> year_subsets;
  bool estimate_rho = false, losses = false, resample = false, paper_scale = false;
  std::uint64_t seed = 20090101;

  auto* sim = app.add_subcommand("simulate", "Simulate annual losses for a scenario");
  sim->add_option("scenario", scenario_path, "Scenario JSON")->required();
  sim->add_option("--years", years, "Number of years (default: scenario years)");
  sim->add_option("--out", out_dir, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Spearman correlation of annual losses against the copula parameter");
  sweep->add_option("scenario", scenario_path, "Scenario JSON")->required();
  sweep->add_option("--family", family, "gaussian, clayton or gumbel")->required();
  sweep->add_option("--rho-grid", rho_grid, "Comma separated copula parameters")->delimiter(',');
  sweep->add_option("--years-per-point", years_per_point, "Simulated years per grid point");
  sweep->add_option("--out", out_dir, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Sample the posterior of the risk characteristics");
  fit->add_option("scenario", scenario_path, "Scenario JSON")->required();
  fit->add_option("counts", counts, "Counts CSV (year x cell)")->required();
  fit->add_option("experts", experts, "Expert opinions CSV (expert x cell)");
  fit->add_option("--mode", mode, "joint, marginal or benchmark");
  fit->add_option("--lambda", lambda, "True intensities CSV (benchmark mode)");
  fit->add_flag("--estimate-rho", estimate_rho, "Update the copula parameter");
  fit->add_option("--out", out_dir, "Output directory")->required();

  auto* predict = app.add_subcommand("predict", "Full predictive distribution of next year's counts and losses");
  predict->add_option("fit_dir", fit_dir, "Output directory of a fit run")->required();
  predict->add_option("--draws", draws, "Predictive draws (default: retained states)");
  predict->add_option("--quantiles", quantiles, "Comma separated VaR levels (0.999 always included)")->delimiter(',');
  predict->add_flag("--losses", losses, "Also simulate severities and annual losses");
  predict->add_flag("--resample", resample, "Allow more draws than retained states");
  predict->add_option("--out", out_dir, "Output directory (default: <fit_dir>/predict)");

  auto* exp = app.add_subcommand("experiment", "Replicated estimation study");
  exp->add_option("--fixture", fixture, "example1, example2 or table5")->required();
  exp->add_flag("--paper-scale", paper_scale, "20 replicates and the longer chains");
  exp->add_option("--seed", seed, "Top-level seed");
  exp->add_option("--replicates", replicates, "Override the replicate count");
  exp->add_option("--iterations", iterations, "Override the chain length (burn-in is a fifth)");
  exp->add_option("--years", year_subsets, "Comma separated year subsets")->delimiter(',');
  exp->add_option("--out", out_dir, "Output directory")->required();

  auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
  replay->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
  replay->add_option("--out", replay_out, "Output directory (default: the original one)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    Invocation inv;
    if (*replay) {
      inv = from_manifest(manifest, replay_out);
    } else {
      inv.out_dir = out_dir;
      if (*sim) {
        inv.command = "simulate";
        if (years > 0) inv.args["years"] = years;
      } else if (*sweep) {
        inv.command = "sweep";
        inv.args["family"] = family;
        if (!rho_grid.empty()) inv.args["rho_grid"] = rho_grid;
        inv.args["years_per_point"] = years_per_point;
      } else if (*fit) {
        inv.command = "fit";
        inv.args["counts"] = absolute(counts);
        if (!experts.empty()) inv.args["experts"] = absolute(experts);
        if (!lambda.empty()) inv.args["lambda"] = absolute(lambda);
        inv.args["mode"] = mode;
        inv.args["estimate_rho"] = estimate_rho;
      } else if (*predict) {
        inv.command = "predict";
        inv.args["fit"] = absolute(fit_dir);
        if (draws > 0) inv.args["draws"] = draws;
        if (!quantiles.empty()) inv.args["quantiles"] = quantiles;
        inv.args["losses"] = losses;
        inv.args["resample"] = resample;
        if (out_dir.empty()) inv.out_dir = fs::path(fit_dir) / "predict";
      } else if (*exp) {
        inv.command = "experiment";
        inv.args["fixture"] = fixture;
        inv.args["paper_scale"] = paper_scale;
        inv.args["seed"] = seed;
        if (replicates > 0) inv.args["replicates"] = replicates;
        if (iterations > 0) inv.args["iterations"] = iterations;
        if (!year_subsets.empty()) inv.args["years"] = year_subsets;
      }
      if (!scenario_path.empty()) {
        inv.args["scenario_path"] = absolute(scenario_path);
        inv.scen = load_scenario(scenario_path);
      }
    }
    execute(inv, out);
    return kOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace riskdep::cli
