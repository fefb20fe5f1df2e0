#include "riskdep/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "riskdep/errors.hpp"

namespace riskdep::experiments {

void Truth::validate() const {
  const std::size_t j = cells();
  if (j == 0) throw ValidationError("truth needs at least one cell");
  if (alpha.size() != j || volume.size() != j) throw ValidationError("truth alpha/volume must have one entry per cell");
  for (std::size_t i = 0; i < j; ++i) {
    if (!(theta_true[i] > 0.0) || !(alpha[i] > 0.0) || !(volume[i] > 0.0)) {
      throw ValidationError("truth theta, alpha and volume must be positive (cell " + std::to_string(i + 1) + ")");
    }
  }
  if (experts.size() != experts_count * j) throw ValidationError("truth experts must be K x J");
  for (double d : experts) {
    if (!(d > 0.0)) throw ValidationError("expert opinions must be positive");
  }
  copula.validate();
}

GeneratedData GeneratedData::first_years(std::size_t years) const {
  GeneratedData out;
  out.data = data.first_years(years);
  out.true_lambda.assign(true_lambda.begin(), true_lambda.begin() + static_cast<std::ptrdiff_t>(years * data.cells));
  return out;
}

GeneratedData generate_dataset(const Truth& truth, std::size_t years, RngStream& rng) {
  truth.validate();
  const std::size_t cells = truth.cells();
  GeneratedData g;
  g.data.years = years;
  g.data.cells = cells;
  g.data.experts_count = truth.experts_count;
  g.data.experts = truth.experts;
  g.data.counts.resize(years * cells);
  g.true_lambda.resize(years * cells);
  std::vector<double> u(cells);
  const bool coupled = cells >= 2 && truth.copula.family != copula::Family::Independence;
  for (std::size_t t = 0; t < years; ++t) {
    if (coupled) {
      copula::sample_into(truth.copula, u, rng);
    } else {
      for (double& x : u) x = rng.uniform_open();
    }
    for (std::size_t j = 0; j < cells; ++j) {
      const auto marginal = dist::GammaParams::from_shape_mean(truth.alpha[j], truth.theta_true[j]);
      const double lambda = dist::gamma_quantile(u[j], marginal);
      g.true_lambda[t * cells + j] = lambda;
      const double mean = truth.volume[j] * lambda;
      g.data.counts[t * cells + j] = mean > 0.0 ? dist::poisson_sample(mean, rng) : 0;
    }
  }
  return g;
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Joint: return "joint";
    case Mode::Marginal: return "marginal";
    case Mode::Benchmark: return "benchmark";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "joint") return Mode::Joint;
  if (s == "marginal") return Mode::Marginal;
  if (s == "benchmark") return Mode::Benchmark;
  throw ValidationError("unknown mode '" + s + "' (expected joint, marginal or benchmark)");
}

std::size_t ExperimentPlan::max_years() const {
  return year_subsets.empty() ? 0 : *std::max_element(year_subsets.begin(), year_subsets.end());
}

void ExperimentPlan::validate() const {
  truth.validate();
  if (priors.size() != truth.cells()) throw ValidationError("plan needs one prior per cell");
  for (std::size_t j = 0; j < priors.size(); ++j) {
    if (priors[j].alpha != truth.alpha[j] || priors[j].volume != truth.volume[j]) {
      throw ValidationError("prior alpha/volume must match the truth (cell " + std::to_string(j + 1) + ")");
    }
  }
  if (year_subsets.empty() || year_subsets.front() == 0) throw ValidationError("year subsets must be positive");
  if (!std::is_sorted(year_subsets.begin(), year_subsets.end())) {
    throw ValidationError("year subsets must be nondecreasing");
  }
  if (replicates == 0) throw ValidationError("replicates must be positive");
  if (modes.empty()) throw ValidationError("plan needs at least one mode");
  chain.validate();
  bayes::BayesConfig cfg{priors, sampler_family(), bayes::default_rho_range(sampler_family())};
  cfg.validate();
}

const ReportCell* ExperimentReport::find(Mode mode, copula::Family family, std::size_t years,
                                         const std::string& parameter) const {
  for (const auto& c : cells) {
    if (c.mode == mode && c.family == family && c.years == years && c.parameter == parameter) return &c;
  }
  return nullptr;
}

std::uint64_t ExperimentReport::total_exhausted() const {
  std::uint64_t n = 0;
  for (const auto& c : cells) n += c.slice_exhausted;
  return n;
}

void ExperimentReport::append(const ExperimentReport& other) {
  for (std::size_t y : other.year_subsets) {
    if (std::find(year_subsets.begin(), year_subsets.end(), y) == year_subsets.end()) year_subsets.push_back(y);
  }
  std::sort(year_subsets.begin(), year_subsets.end());
  cells.insert(cells.end(), other.cells.begin(), other.cells.end());
}

unsigned worker_threads() {
  if (const char* env = std::getenv("RISKDEP_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Run tasks [0, n) on up to worker_threads() threads; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::string theta_name(std::size_t j) { return "theta[" + std::to_string(j + 1) + "]"; }

struct Estimate {
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  std::uint64_t exhausted = 0;
};

std::vector<Estimate> estimates(const mcmc::PosteriorSamples& s, bool include_rho, std::size_t offset = 0) {
  std::vector<Estimate> out;
  for (std::size_t j = 0; j < s.cells; ++j) {
    const auto c = mcmc::summarize_values(theta_name(j + offset), mcmc::theta_trace(s, j));
    out.push_back({c.name, c.mean, c.sd, 0});
  }
  if (include_rho) {
    const auto c = mcmc::summarize_values("rho", mcmc::rho_trace(s));
    out.push_back({c.name, c.mean, c.sd, 0});
  }
  if (!out.empty()) out.front().exhausted = s.total_exhausted();
  return out;
}

bayes::BayesConfig joint_config(const ExperimentPlan& plan) {
  const auto family = plan.sampler_family();
  return {plan.priors, family, bayes::default_rho_range(family)};
}

mcmc::ChainConfig joint_chain(const ExperimentPlan& plan, bool estimate_rho) {
  mcmc::ChainConfig c = plan.chain;
  c.keep_lambda = false;
  c.update_rho = estimate_rho;
  c.fixed_rho = plan.sampler_family() == plan.truth.copula.family ? plan.truth.copula.rho
                                                                   : bayes::default_rho_range(plan.sampler_family()).midpoint();
  return c;
}

std::vector<Estimate> run_mode(const ExperimentPlan& plan, Mode mode, const GeneratedData& g, RngStream& rng) {
  switch (mode) {
    case Mode::Joint: {
      const auto cfg = joint_config(plan);
      const auto ccfg = joint_chain(plan, plan.estimate_rho);
      return estimates(mcmc::run_chain(g.data, cfg, ccfg, std::nullopt, rng), plan.estimate_rho);
    }
    case Mode::Benchmark: {
      const auto cfg = joint_config(plan);
      const auto ccfg = joint_chain(plan, false);
      return estimates(mcmc::run_benchmark_chain(g.data, cfg, ccfg, g.true_lambda, rng), false);
    }
    case Mode::Marginal: {
      std::vector<Estimate> out;
      mcmc::ChainConfig ccfg = plan.chain;
      ccfg.keep_lambda = false;
      ccfg.update_rho = false;
      for (std::size_t j = 0; j < plan.priors.size(); ++j) {
        bayes::BayesConfig cfg{{plan.priors[j]}, copula::Family::Independence,
                               bayes::default_rho_range(copula::Family::Independence)};
        RngStream cell_rng = rng.split(j);
        auto e = estimates(mcmc::run_chain(g.data.cell(j), cfg, ccfg, std::nullopt, cell_rng), false, j);
        out.insert(out.end(), e.begin(), e.end());
      }
      return out;
    }
  }
  return {};
}

// Average per-task estimates into report cells in (mode, years, parameter) order.
ExperimentReport reduce(const ExperimentPlan& plan, const std::vector<std::vector<Estimate>>& results,
                        std::size_t replicates) {
  ExperimentReport report;
  report.name = plan.name;
  report.year_subsets = plan.year_subsets;
  const std::size_t subsets = plan.year_subsets.size();
  const std::size_t modes = plan.modes.size();
  for (std::size_t m = 0; m < modes; ++m) {
    for (std::size_t s = 0; s < subsets; ++s) {
      const std::size_t first = m * subsets + s;
      const auto& proto = results[first];
      for (std::size_t p = 0; p < proto.size(); ++p) {
        ReportCell cell{plan.modes[m], plan.truth.copula.family, plan.year_subsets[s], proto[p].parameter};
        std::uint64_t exhausted = 0;
        for (std::size_t r = 0; r < replicates; ++r) {
          const auto& e = results[r * modes * subsets + first];
          cell.mean += e[p].mean;
          cell.sd += e[p].sd;
          exhausted += e[p].exhausted;
        }
        cell.mean /= static_cast<double>(replicates);
        cell.sd /= static_cast<double>(replicates);
        cell.replicates = replicates;
        cell.slice_exhausted = exhausted;
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  const std::size_t subsets = plan.year_subsets.size();
  const std::size_t modes = plan.modes.size();

  std::vector<GeneratedData> datasets;
  datasets.reserve(plan.replicates);
  for (std::size_t r = 0; r < plan.replicates; ++r) {
    RngStream rng(plan.seed, stream_id_for("dataset-" + std::to_string(r)));
    datasets.push_back(generate_dataset(plan.truth, plan.max_years(), rng));
  }

  // Task index = (r * modes + m) * subsets + s; the reduction reads it back in that order.
  std::vector<std::vector<Estimate>> results(plan.replicates * modes * subsets);
  parallel_for(results.size(), [&](std::size_t i) {
    const std::size_t s = i % subsets;
    const std::size_t m = (i / subsets) % modes;
    const std::size_t r = i / (subsets * modes);
    const std::size_t years = plan.year_subsets[s];
    RngStream rng(plan.seed, stream_id_for("chain-" + std::to_string(r) + "-" + std::to_string(years) + "-" +
                                           to_string(plan.modes[m])));
    results[i] = run_mode(plan, plan.modes[m], datasets[r].first_years(years), rng);
  });
  return reduce(plan, results, plan.replicates);
}

ExperimentReport run_joint_rho_experiment(const ExperimentPlan& plan) {
  plan.validate();
  if (plan.sampler_family() == copula::Family::Independence) {
    throw ValidationError("joint rho estimation needs a dependent sampler family");
  }
  RngStream data_rng(plan.seed, stream_id_for("dataset-0"));
  const GeneratedData g = generate_dataset(plan.truth, plan.max_years(), data_rng);

  ExperimentPlan joint = plan;
  joint.modes = {Mode::Joint};
  joint.estimate_rho = true;
  const std::size_t subsets = plan.year_subsets.size();
  std::vector<std::vector<Estimate>> results(subsets);
  parallel_for(subsets, [&](std::size_t s) {
    const std::size_t years = plan.year_subsets[s];
    RngStream rng(plan.seed, stream_id_for("chain-0-" + std::to_string(years) + "-joint-rho"));
    results[s] = run_mode(joint, Mode::Joint, g.first_years(years), rng);
  });
  return reduce(joint, results, 1);
}

Predictive sample_full_predictive(const mcmc::PosteriorSamples& samples, const bayes::BayesConfig& cfg,
                                  const std::optional<std::vector<SeverityParams>>& severities,
                                  std::size_t draws, bool resample, RngStream& rng) {
  cfg.validate();
  const std::size_t retained = samples.states.size();
  if (retained == 0) throw ValidationError("predictive needs at least one retained posterior state");
  if (draws == 0) throw ValidationError("predictive needs at least one draw");
  if (draws > retained && !resample) {
    throw ValidationError("requested " + std::to_string(draws) + " draws but only " + std::to_string(retained) +
                          " retained states (enable resampling)");
  }
  const std::size_t cells = cfg.dimension();
  if (severities && severities->size() != cells) throw ValidationError("need one severity entry per cell");

  Predictive p;
  p.draws = draws;
  p.cells = cells;
  p.counts.resize(draws * cells);
  p.total_counts.assign(draws, 0.0);
  if (severities) {
    p.losses.resize(draws * cells);
    p.total_losses.assign(draws, 0.0);
  }
  std::vector<double> u(cells);
  const bool coupled = cells >= 2 && cfg.family != copula::Family::Independence;
  for (std::size_t l = 0; l < draws; ++l) {
    const std::size_t idx = draws > retained ? rng.index(retained) : l * retained / draws;
    const auto& state = samples.states[idx];
    if (state.theta.size() != cells) throw ValidationError("posterior state does not match the config dimension");
    if (coupled) {
      copula::sample_into({cfg.family, state.rho, std::nullopt}, u, rng);
    } else {
      for (double& x : u) x = rng.uniform_open();
    }
    for (std::size_t j = 0; j < cells; ++j) {
      loss::RiskCellParams cell;
      cell.theta_lambda = state.theta[j];
      cell.alpha = cfg.cells[j].alpha;
      cell.volume = cfg.cells[j].volume;
      if (severities) {
        cell.severity_mu_psi = (*severities)[j].mu_psi;
        cell.severity_omega_psi = (*severities)[j].omega_psi;
        cell.severity_sigma = (*severities)[j].sigma;
      }
      // Severity profiles are not estimated; they are drawn independently.
      const double v = severities ? rng.uniform_open() : 0.5;
      loss::CellYear y;
      if (severities) {
        y = loss::simulate_cell_year(cell, u[j], v, rng);
      } else {
        y.lambda = dist::gamma_quantile(u[j], dist::GammaParams::from_shape_mean(cell.alpha, cell.theta_lambda));
        const double mean = cell.volume * y.lambda;
        y.count = mean > 0.0 ? dist::poisson_sample(mean, rng) : 0;
      }
      p.counts[l * cells + j] = y.count;
      p.total_counts[l] += static_cast<double>(y.count);
      if (severities) {
        p.losses[l * cells + j] = y.loss;
        p.total_losses[l] += y.loss;
      }
    }
  }
  return p;
}

namespace {

ExperimentPlan example_plan(const std::string& name, std::vector<double> theta_true, std::vector<double> experts,
                            std::vector<double> prior_scale, const copula::CopulaSpec& truth_copula, bool paper_scale,
                            std::uint64_t seed) {
  ExperimentPlan plan;
  plan.name = name;
  const std::size_t cells = theta_true.size();
  plan.truth.theta_true = std::move(theta_true);
  plan.truth.alpha.assign(cells, 2.0);
  plan.truth.volume.assign(cells, 1.0);
  plan.truth.experts = std::move(experts);
  plan.truth.experts_count = 1;
  plan.truth.copula = truth_copula;
  // The tabulated examples quote b as a scale (prior mean a * b = theta_true);
  // only that reading reproduces their one-year posterior spread.
  for (std::size_t j = 0; j < cells; ++j) plan.priors.push_back({2.0, 1.0 / prior_scale[j], 2.0, 2.0, 1.0});
  plan.replicates = paper_scale ? 20 : 10;
  plan.chain.iterations = paper_scale ? 50000 : 20000;
  plan.chain.burnin = paper_scale ? 10000 : 4000;
  // Full sweeps mix far better per iteration than one coordinate at a time.
  plan.chain.scan = mcmc::ScanOrder::SystematicFullScan;
  plan.chain.scale_moves = true;
  plan.seed = seed;
  if (truth_copula.family == copula::Family::Independence) plan.modes = {Mode::Marginal};
  return plan;
}

std::vector<copula::CopulaSpec> table_copulas() {
  return {copula::CopulaSpec::independence(), copula::CopulaSpec::gaussian(0.9), copula::CopulaSpec::clayton(10.0),
          copula::CopulaSpec::gumbel(3.0)};
}

}  // namespace

std::vector<ExperimentPlan> fixture_plans(const std::string& fixture, bool paper_scale, std::uint64_t seed) {
  std::vector<ExperimentPlan> plans;
  for (const auto& c : table_copulas()) {
    const std::string family(copula::to_string(c.family));
    if (fixture == "example1") {
      plans.push_back(example_plan("example1-" + family, {5.0, 5.0}, {2.0, 8.0}, {2.5, 2.5}, c, paper_scale, seed));
    } else if (fixture == "example2") {
      plans.push_back(example_plan("example2-" + family, {5.0, 10.0}, {2.0, 13.0}, {2.5, 5.0}, c, paper_scale, seed));
    } else if (fixture == "table5") {
      auto plan = example_plan("table5-" + family, {5.0, 5.0}, {2.0, 8.0}, {2.5, 2.5}, c, paper_scale, seed);
      plan.replicates = 1;
      plan.modes = {Mode::Joint};
      plan.estimate_rho = true;
      plan.chain.iterations = paper_scale ? 150000 : 50000;
      plan.chain.burnin = paper_scale ? 20000 : 10000;
      // Independent data are fitted with a Gaussian copula so rho can be estimated around 0.
      if (c.family == copula::Family::Independence) plan.model_family = copula::Family::Gaussian;
      plans.push_back(std::move(plan));
    } else {
      throw ValidationError("unknown fixture '" + fixture + "' (expected example1, example2 or table5)");
    }
  }
  return plans;
}

}  // namespace riskdep::experiments
