#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "riskdep/bayes_model.hpp"
#include "riskdep/chain.hpp"
#include "riskdep/copulas.hpp"
#include "riskdep/loss_model.hpp"

namespace riskdep::scenario {

// Hyperparameters of the fitted model. Alpha and volume come from the cells.
struct BayesSection {
  std::vector<double> prior_a;
  std::vector<double> prior_b;
  std::vector<double> xi;
  copula::Family family = copula::Family::Independence;
  double rho = 0.0;  // used when rho is not estimated
  bayes::RhoRange rho_range;
};

struct ScenarioFile {
  std::vector<loss::RiskCellParams> cells;
  copula::CopulaSpec frequency_copula;
  copula::CopulaSpec severity_copula;
  std::optional<copula::CopulaSpec> joint_copula;
  std::optional<BayesSection> bayes;
  mcmc::ChainConfig chain;
  // Fraction of slice steps allowed to exhaust before a run counts as a numerical failure.
  double exhaustion_threshold = 0.01;
  std::size_t years = 20;
  std::uint64_t seed = 1;

  loss::ScenarioSpec loss_spec(std::size_t years) const;
  // Throws ValidationError when the file has no bayes section.
  bayes::BayesConfig bayes_config() const;
};

// Strict parse: unknown keys and wrong types are rejected with the JSON path
// of the offending field, e.g. "$.cells[1].alpha".
ScenarioFile parse_scenario(const nlohmann::ordered_json& doc);
ScenarioFile parse_scenario_text(const std::string& text, const std::string& source);

// Fully resolved form (every default written out); parses back to the same file.
nlohmann::ordered_json to_json(const ScenarioFile& s);

}  // namespace riskdep::scenario
