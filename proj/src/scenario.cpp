#include "riskdep/scenario.hpp"

#include <cmath>
#include <initializer_list>
#include <set>

#include "riskdep/errors.hpp"

namespace riskdep::scenario {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError("scenario " + path + ": " + what);
}

void check_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown key");
  }
}

double number(const Json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    fail(path + "." + key, "required field missing");
  }
  const Json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path + "." + key, "expected a finite number");
  return x;
}

double positive(const Json& obj, const std::string& path, const char* key, std::optional<double> fallback = {}) {
  const double x = number(obj, path, key, fallback);
  if (!(x > 0.0)) fail(path + "." + key, "must be positive");
  return x;
}

std::uint64_t integer(const Json& obj, const std::string& path, const char* key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    fail(path + "." + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const Json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) fail(path + "." + key, "expected a string");
  return obj.at(key).get<std::string>();
}

copula::Family family(const Json& obj, const std::string& path) {
  try {
    return copula::family_from_string(text(obj, path, "family", "independence"));
  } catch (const ValidationError& e) {
    fail(path + ".family", e.what());
  }
}

copula::CopulaSpec parse_copula(const Json& obj, const std::string& path) {
  check_keys(obj, path, {"family", "rho"});
  copula::CopulaSpec c;
  c.family = family(obj, path);
  c.rho = number(obj, path, "rho", c.family == copula::Family::Gumbel ? 1.0 : 0.0);
  if (c.family != copula::Family::Independence && !c.rho_in_family_range()) fail(path + ".rho", "outside the family range");
  return c;
}

loss::RiskCellParams parse_cell(const Json& obj, const std::string& path) {
  check_keys(obj, path, {"theta_lambda", "alpha", "volume", "severity_mu_psi", "severity_omega_psi", "severity_sigma"});
  loss::RiskCellParams c;
  c.theta_lambda = number(obj, path, "theta_lambda");
  if (c.theta_lambda < 0.0) fail(path + ".theta_lambda", "must be non-negative");
  c.alpha = positive(obj, path, "alpha");
  c.volume = positive(obj, path, "volume", 1.0);
  c.severity_mu_psi = number(obj, path, "severity_mu_psi", 2.0);
  c.severity_omega_psi = positive(obj, path, "severity_omega_psi", 0.4);
  c.severity_sigma = positive(obj, path, "severity_sigma", 1.0);
  return c;
}

mcmc::SliceConfig parse_slice(const Json& obj, const std::string& path, const mcmc::SliceConfig& d) {
  check_keys(obj, path, {"width", "max_stepout", "lower", "upper", "max_shrink"});
  mcmc::SliceConfig s;
  s.width = positive(obj, path, "width", d.width);
  s.max_stepout = static_cast<int>(integer(obj, path, "max_stepout", static_cast<std::uint64_t>(d.max_stepout)));
  s.lower = number(obj, path, "lower", d.lower);
  s.upper = number(obj, path, "upper", d.upper);
  s.max_shrink = static_cast<int>(integer(obj, path, "max_shrink", static_cast<std::uint64_t>(d.max_shrink)));
  if (!(s.lower < s.upper)) fail(path, "lower must be below upper");
  if (s.max_shrink < 1) fail(path + ".max_shrink", "must be at least 1");
  return s;
}

mcmc::ChainConfig parse_chain(const Json& obj, const std::string& path) {
  check_keys(obj, path, {"iterations", "burnin", "scan", "tempering", "theta_slice", "lambda_slice",
                         "rho_width_fraction", "rho_max_stepout", "rho_max_shrink", "scale_moves"});
  mcmc::ChainConfig c;
  c.iterations = integer(obj, path, "iterations", c.iterations);
  c.burnin = integer(obj, path, "burnin", c.burnin);
  try {
    c.scan = mcmc::scan_from_string(text(obj, path, "scan", mcmc::to_string(c.scan)));
  } catch (const ValidationError& e) {
    fail(path + ".scan", e.what());
  }
  if (obj.contains("scale_moves")) {
    if (!obj.at("scale_moves").is_boolean()) fail(path + ".scale_moves", "expected true or false");
    c.scale_moves = obj.at("scale_moves").get<bool>();
  }
  if (obj.contains("tempering") && !obj.at("tempering").is_null()) {
    const Json& t = obj.at("tempering");
    const std::string tp = path + ".tempering";
    check_keys(t, tp, {"period", "floor"});
    mcmc::TemperingConfig tc;
    tc.period = integer(t, tp, "period", tc.period);
    tc.floor = positive(t, tp, "floor", tc.floor);
    c.tempering = tc;
  }
  if (obj.contains("theta_slice")) c.theta_slice = parse_slice(obj.at("theta_slice"), path + ".theta_slice", c.theta_slice);
  if (obj.contains("lambda_slice")) c.lambda_slice = parse_slice(obj.at("lambda_slice"), path + ".lambda_slice", c.lambda_slice);
  c.rho_width_fraction = positive(obj, path, "rho_width_fraction", c.rho_width_fraction);
  c.rho_max_stepout = static_cast<int>(integer(obj, path, "rho_max_stepout", static_cast<std::uint64_t>(c.rho_max_stepout)));
  c.rho_max_shrink = static_cast<int>(integer(obj, path, "rho_max_shrink", static_cast<std::uint64_t>(c.rho_max_shrink)));
  try {
    c.validate();
  } catch (const ValidationError& e) {
    fail(path, e.what());
  }
  return c;
}

std::vector<double> per_cell(const Json& obj, const std::string& path, const char* key, std::size_t cells) {
  if (!obj.contains(key)) fail(path + "." + key, "required field missing");
  const Json& v = obj.at(key);
  std::vector<double> out;
  if (v.is_number()) {
    out.assign(cells, v.get<double>());
  } else if (v.is_array()) {
    if (v.size() != cells) fail(path + "." + key, "expected one entry per cell");
    for (const auto& x : v) {
      if (!x.is_number()) fail(path + "." + key, "expected numbers");
      out.push_back(x.get<double>());
    }
  } else {
    fail(path + "." + key, "expected a number or an array");
  }
  for (double x : out) {
    if (!(x > 0.0) || !std::isfinite(x)) fail(path + "." + key, "entries must be positive");
  }
  return out;
}

BayesSection parse_bayes(const Json& obj, const std::string& path, std::size_t cells) {
  check_keys(obj, path, {"prior_a", "prior_b", "xi", "family", "rho", "rho_range"});
  BayesSection b;
  b.prior_a = per_cell(obj, path, "prior_a", cells);
  b.prior_b = per_cell(obj, path, "prior_b", cells);
  b.xi = per_cell(obj, path, "xi", cells);
  b.family = family(obj, path);
  b.rho_range = bayes::default_rho_range(b.family);
  if (obj.contains("rho_range")) {
    const Json& r = obj.at("rho_range");
    const std::string rp = path + ".rho_range";
    check_keys(r, rp, {"lower", "upper"});
    b.rho_range.lower = number(r, rp, "lower", b.rho_range.lower);
    b.rho_range.upper = number(r, rp, "upper", b.rho_range.upper);
    if (!(b.rho_range.lower < b.rho_range.upper)) fail(rp, "lower must be below upper");
  }
  b.rho = number(obj, path, "rho", b.family == copula::Family::Independence ? 0.0 : b.rho_range.midpoint());
  if (b.family != copula::Family::Independence && !b.rho_range.contains(b.rho)) fail(path + ".rho", "outside rho_range");
  return b;
}

}  // namespace

loss::ScenarioSpec ScenarioFile::loss_spec(std::size_t y) const {
  loss::ScenarioSpec s;
  s.cells = cells;
  s.frequency_copula = frequency_copula;
  s.severity_copula = severity_copula;
  s.joint_copula = joint_copula;
  s.years = y;
  return s;
}

bayes::BayesConfig ScenarioFile::bayes_config() const {
  if (!bayes) throw ValidationError("scenario $.bayes: required for model fitting");
  bayes::BayesConfig cfg;
  for (std::size_t j = 0; j < cells.size(); ++j) {
    cfg.cells.push_back({bayes->prior_a[j], bayes->prior_b[j], cells[j].alpha, bayes->xi[j], cells[j].volume});
  }
  cfg.family = bayes->family;
  cfg.rho_range = bayes->rho_range;
  cfg.validate();
  return cfg;
}

ScenarioFile parse_scenario(const Json& doc) {
  check_keys(doc, "$", {"$schema", "seed", "years", "cells", "copulas", "bayes", "chain", "exhaustion_threshold"});
  ScenarioFile s;
  s.seed = integer(doc, "$", "seed", s.seed);
  s.years = integer(doc, "$", "years", s.years);
  if (!doc.contains("cells") || !doc.at("cells").is_array() || doc.at("cells").empty()) {
    fail("$.cells", "expected a non-empty array");
  }
  const Json& cells = doc.at("cells");
  for (std::size_t j = 0; j < cells.size(); ++j) s.cells.push_back(parse_cell(cells[j], "$.cells[" + std::to_string(j) + "]"));
  if (doc.contains("copulas")) {
    const Json& c = doc.at("copulas");
    check_keys(c, "$.copulas", {"frequency", "severity", "joint"});
    if (c.contains("frequency")) s.frequency_copula = parse_copula(c.at("frequency"), "$.copulas.frequency");
    if (c.contains("severity")) s.severity_copula = parse_copula(c.at("severity"), "$.copulas.severity");
    if (c.contains("joint") && !c.at("joint").is_null()) s.joint_copula = parse_copula(c.at("joint"), "$.copulas.joint");
  }
  if (doc.contains("bayes") && !doc.at("bayes").is_null()) s.bayes = parse_bayes(doc.at("bayes"), "$.bayes", s.cells.size());
  if (doc.contains("chain")) s.chain = parse_chain(doc.at("chain"), "$.chain");
  s.exhaustion_threshold = number(doc, "$", "exhaustion_threshold", s.exhaustion_threshold);
  if (s.exhaustion_threshold < 0.0 || s.exhaustion_threshold > 1.0) fail("$.exhaustion_threshold", "must lie in [0, 1]");
  try {
    s.loss_spec(s.years).validate();
  } catch (const ValidationError& e) {
    fail("$", e.what());
  }
  return s;
}

ScenarioFile parse_scenario_text(const std::string& text, const std::string& source) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(source + ": invalid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

namespace {

Json copula_json(const copula::CopulaSpec& c) {
  return {{"family", copula::to_string(c.family)}, {"rho", c.rho}};
}

Json slice_json(const mcmc::SliceConfig& s) {
  return {{"width", s.width}, {"max_stepout", s.max_stepout}, {"lower", s.lower}, {"upper", s.upper},
          {"max_shrink", s.max_shrink}};
}

}  // namespace

Json to_json(const ScenarioFile& s) {
  Json doc;
  doc["seed"] = s.seed;
  doc["years"] = s.years;
  auto& cells = doc["cells"] = Json::array();
  for (const auto& c : s.cells) {
    cells.push_back({{"theta_lambda", c.theta_lambda},
                     {"alpha", c.alpha},
                     {"volume", c.volume},
                     {"severity_mu_psi", c.severity_mu_psi},
                     {"severity_omega_psi", c.severity_omega_psi},
                     {"severity_sigma", c.severity_sigma}});
  }
  doc["copulas"] = {{"frequency", copula_json(s.frequency_copula)}, {"severity", copula_json(s.severity_copula)}};
  if (s.joint_copula) doc["copulas"]["joint"] = copula_json(*s.joint_copula);
  if (s.bayes) {
    doc["bayes"] = {{"prior_a", s.bayes->prior_a},
                    {"prior_b", s.bayes->prior_b},
                    {"xi", s.bayes->xi},
                    {"family", copula::to_string(s.bayes->family)},
                    {"rho", s.bayes->rho}};
    if (s.bayes->family != copula::Family::Independence) {
      doc["bayes"]["rho_range"] = {{"lower", s.bayes->rho_range.lower}, {"upper", s.bayes->rho_range.upper}};
    }
  }
  Json chain = {{"iterations", s.chain.iterations},
                {"burnin", s.chain.burnin},
                {"scan", mcmc::to_string(s.chain.scan)},
                {"scale_moves", s.chain.scale_moves},
                {"theta_slice", slice_json(s.chain.theta_slice)},
                {"lambda_slice", slice_json(s.chain.lambda_slice)},
                {"rho_width_fraction", s.chain.rho_width_fraction},
                {"rho_max_stepout", s.chain.rho_max_stepout},
                {"rho_max_shrink", s.chain.rho_max_shrink}};
  if (s.chain.tempering) chain["tempering"] = {{"period", s.chain.tempering->period}, {"floor", s.chain.tempering->floor}};
  doc["chain"] = chain;
  doc["exhaustion_threshold"] = s.exhaustion_threshold;
  return doc;
}

}  // namespace riskdep::scenario
